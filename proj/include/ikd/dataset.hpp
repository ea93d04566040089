#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ikd/parallel.hpp"
#include "ikd/plants.hpp"

namespace ikd {

/// Per-dimension affine state normalizer: apply(x) = (x - mean) / std with the
/// population standard deviation floored at 1e-8.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd invert_rows(const Eigen::MatrixXd& rows) const;

  /// Identity normalizer (mean 0, std 1) of the given dimension.
  static Normalizer identity(int dim);
};

/// Where a segment came from.
enum class Provenance : std::uint8_t { Initial = 0, Incremental = 1 };

/// A contiguous (state, control) window in plant units: l+1 state rows and
/// l control rows.
struct Segment {
  Eigen::MatrixXd states;
  Eigen::MatrixXd controls;
  Provenance provenance = Provenance::Initial;
  std::uint32_t iteration = 0;
};

/// Segment collection with a shared segment length and the normalizer fitted
/// on the states it was built from.
struct Dataset {
  int state_dim = 0;    ///< n'
  int control_dim = 0;  ///< m'
  int seg_len = 0;      ///< l, equal to the training/MPC horizon H
  Normalizer normalizer;
  std::vector<Segment> segments;
};

/// Noisy expert reference trajectories for tracking. The matrices are stored
/// in the repository's own normalized units; `normalizer` (fitted on the
/// clean rollouts that produced the repo) maps them back to plant units.
struct ReferenceRepository {
  int state_dim = 0;
  std::vector<Eigen::MatrixXd> references;
  Normalizer normalizer;
  std::uint64_t seed = 0;
  double noise_halfwidth = 0.0;
};

/// Randomization used when collecting expert data: a box for command targets,
/// a step range for command durations, and a box of offsets added to the rest
/// state when drawing initial states.
struct CollectOptions {
  Eigen::VectorXd target_lo;
  Eigen::VectorXd target_hi;
  int duration_lo = 20;
  int duration_hi = 60;
  Eigen::VectorXd init_lo;
  Eigen::VectorXd init_hi;
  int max_retries = 64;
};

/// Collection defaults per plant (moderate command and start ranges).
CollectOptions default_collect_options(const PlantSpec& spec);

/// Population mean/std per column, std floored at 1e-8. Columns hitting the
/// floor are reported through `degenerate_columns` when non-null.
Normalizer fit_normalizer(const Eigen::MatrixXd& states,
                          std::vector<int>* degenerate_columns = nullptr);

/// Runs n_traj expert rollouts of l_init steps with randomized commands and
/// starts, extracts one uniformly placed segment of length l_seg from each,
/// and fits the normalizer on every collected state. Deterministic per seed;
/// trajectory i draws from its own derived stream. Throws
/// RepoGenerationFailed when a slot exhausts its retry budget.
Dataset collect_initial_dataset(const PlantSpec& spec, const CollectOptions& opts, int n_traj,
                                int l_init, int l_seg, std::uint64_t seed,
                                ExecMode mode = ExecMode::Serial);

/// Concatenates the segments of a and b (a first) and refits the normalizer
/// on the union of their states. Dims and segment lengths must agree.
Dataset merge_datasets(const Dataset& a, const Dataset& b);

/// Generates `count` clean expert rollouts of `length` states, fits the repo
/// normalizer on them, normalizes, then perturbs every entry with i.i.d.
/// uniform noise from [-noise_halfwidth, +noise_halfwidth]. Deterministic per
/// seed. Throws RepoGenerationFailed when rollouts keep failing.
ReferenceRepository make_reference_repo(const PlantSpec& spec, const CollectOptions& opts,
                                        int count, int length, double noise_halfwidth,
                                        std::uint64_t seed);

/// The segment of the executed trajectory that ends at failure step t_fail:
/// states t_fail-l .. t_fail, controls t_fail-l .. t_fail-1. Requires
/// t_fail >= l.
Segment failure_segment(const Trajectory& traj, int t_fail, int l, std::uint32_t iteration);

/// Checks the internal consistency of a dataset (segment shapes, shared
/// segment length, normalizer dimension). Throws ShapeMismatch on violation.
void validate_dataset(const Dataset& ds);

}  // namespace ikd
