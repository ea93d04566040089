#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ikd/dataset.hpp"
#include "ikd/koopman.hpp"
#include "ikd/metrics.hpp"
#include "ikd/mpc.hpp"

namespace ikd {

struct IterationRecord;

/// Settings of the alternating growth loop: per iteration the lift dimension
/// grows by delta_n, a fresh model is trained (halving the epoch budget after
/// a failed attempt, down to a floor of 2), and the tracking failures on the
/// training references are harvested into the dataset for the next round.
struct IncrementalConfig {
  int iterations = 4;
  int n0 = 8;          ///< lift dimension of the first iteration
  int delta_n = 8;     ///< lift growth per iteration (0 freezes the dimension)
  bool harvest = true; ///< false freezes the dataset
  double eps_conv = 0.02;
  TrainConfig train;
  MpcConfig mpc;
  TrackOptions track;
  /// Replaces train_koopman when set (used to exercise the retry path).
  std::function<TrainReport(const Dataset&, int, const TrainConfig&)> train_fn;
  /// Called after every completed iteration (checkpointing hook).
  std::function<void(const IterationRecord&, const KoopmanModel&)> on_iteration;
};

struct IterationRecord {
  int iteration = 0;      ///< 0-based
  int lift_dim = 0;
  int dataset_segments = 0;  ///< training set size for this iteration
  int epochs_used = 0;       ///< after any halving
  double final_loss = 0.0;
  double train_mean_t_sur = 0.0;  ///< on the harvesting references
  double eval_mean_t_sur = 0.0;   ///< on the held-out references
  double eval_mean_joint_position_error = 0.0;
  int harvested_segments = 0;
};

struct IncrementalResult {
  std::vector<IterationRecord> records;
  KoopmanModel best_model;
  int best_iteration = 0;
  std::vector<double> eval_history;  ///< eval mean survival per iteration
  bool converged = false;            ///< stopped early because progress stalled
  Dataset dataset;                   ///< after the final merge
};

/// Tracking of every reference in a repository (references are mapped back to
/// plant units through the repository normalizer). Outcomes keep reference
/// order; per-reference work parallelizes.
struct RepoTrackResult {
  std::vector<TrackOutcome> outcomes;
  std::vector<TrackingMetrics> metrics;
  double mean_t_sur = 0.0;
  int full_runs = 0;  ///< outcomes that survived to t_max
};
RepoTrackResult track_repo(const PlantSpec& spec, const KoopmanModel& model,
                           const MpcConfig& cfg, const TrackOptions& opts,
                           const ReferenceRepository& repo, ExecMode mode = ExecMode::Serial);

/// Failure windows of length seg_len ending at each failed outcome's failure
/// step. Outcomes that survived, or failed before seg_len steps completed,
/// contribute nothing.
std::vector<Segment> collect_failures(const std::vector<TrackOutcome>& outcomes, int seg_len,
                                      std::uint32_t iteration);

/// True when the newest survival score no longer clears the previous one by
/// the relative margin eps: latest < previous * (1 + eps). Needs at least two
/// entries.
bool track_converge_check(const std::vector<double>& history, double eps = 0.02);

/// The full loop. Throws TrainingCollapsed when an iteration keeps failing at
/// the epoch floor. The best model is the one with the highest held-out mean
/// survival, ties resolved toward the latest iteration. Harvested segments
/// are merged without refitting the normalizer: the frame fixed by the
/// initial dataset is kept so controller costs, failure thresholds, and loss
/// values stay comparable across iterations.
IncrementalResult incremental_run(const PlantSpec& spec, Dataset dataset,
                                  const ReferenceRepository& train_repo,
                                  const ReferenceRepository& eval_repo,
                                  const IncrementalConfig& cfg,
                                  ExecMode mode = ExecMode::Serial);

}  // namespace ikd
