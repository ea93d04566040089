#include "ikd/incremental.hpp"

#include <algorithm>
#include <sstream>

#include "ikd/errors.hpp"
#include "ikd/parallel.hpp"

namespace ikd {

RepoTrackResult track_repo(const PlantSpec& spec, const KoopmanModel& model,
                           const MpcConfig& cfg, const TrackOptions& opts,
                           const ReferenceRepository& repo, ExecMode mode) {
  if (repo.references.empty()) throw EmptyDataset("track_repo: repository has no references");
  if (repo.state_dim != spec.state_dim) {
    throw ShapeMismatch("track_repo: repository dimension does not match the plant");
  }
  RepoTrackResult res;
  res.outcomes.resize(repo.references.size());
  res.metrics.resize(repo.references.size());
  parallel_for_index(static_cast<int>(repo.references.size()), mode, [&](int i) {
    const Eigen::MatrixXd ref = repo.normalizer.invert_rows(repo.references[i]);
    res.outcomes[i] = track_reference(spec, model, cfg, ref, opts);
    res.metrics[i] = tracking_metrics(spec, res.outcomes[i].traj.states, ref,
                                      res.outcomes[i].t_sur);
  });
  double total = 0.0;
  for (const TrackOutcome& out : res.outcomes) {
    total += out.t_sur;
    if (!out.failed) ++res.full_runs;
  }
  res.mean_t_sur = total / static_cast<double>(res.outcomes.size());
  return res;
}

std::vector<Segment> collect_failures(const std::vector<TrackOutcome>& outcomes, int seg_len,
                                      std::uint32_t iteration) {
  if (seg_len < 1) throw BadDims("collect_failures: seg_len must be >= 1");
  std::vector<Segment> segments;
  for (const TrackOutcome& out : outcomes) {
    if (!out.failed) continue;
    if (out.fail_step < seg_len || out.fail_step > out.traj.steps) continue;
    Segment seg = failure_segment(out.traj, out.fail_step, seg_len, iteration);
    seg.provenance = Provenance::Incremental;
    segments.push_back(std::move(seg));
  }
  return segments;
}

bool track_converge_check(const std::vector<double>& history, double eps) {
  if (history.size() < 2) return false;
  const double latest = history[history.size() - 1];
  const double previous = history[history.size() - 2];
  return latest < previous * (1.0 + eps);
}

IncrementalResult incremental_run(const PlantSpec& spec, Dataset dataset,
                                  const ReferenceRepository& train_repo,
                                  const ReferenceRepository& eval_repo,
                                  const IncrementalConfig& cfg, ExecMode mode) {
  if (cfg.iterations < 1) throw BadDims("incremental_run: iterations must be >= 1");
  if (cfg.n0 < spec.state_dim) {
    throw BadDims("incremental_run: n0 must be at least the state dimension");
  }
  if (cfg.delta_n < 0) throw BadDims("incremental_run: delta_n must be >= 0");
  validate_dataset(dataset);

  IncrementalResult result;
  double best_score = -1.0;
  for (int j = 0; j < cfg.iterations; ++j) {
    const int lift = cfg.n0 + j * cfg.delta_n;

    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + static_cast<std::uint64_t>(j);
    tc.mode = mode;
    int epochs = cfg.train.epochs;
    TrainReport report;
    for (;;) {
      tc.epochs = epochs;
      report = cfg.train_fn ? cfg.train_fn(dataset, lift, tc)
                            : train_koopman(dataset, lift, tc);
      if (!report.failed) break;
      if (epochs <= 2) {
        std::ostringstream os;
        os << "iteration " << j << " failed at the epoch floor: " << report.fail_reason;
        throw TrainingCollapsed(os.str());
      }
      epochs = std::max(2, epochs / 2);
    }

    IterationRecord rec;
    rec.iteration = j;
    rec.lift_dim = lift;
    rec.dataset_segments = static_cast<int>(dataset.segments.size());
    rec.epochs_used = epochs;
    rec.final_loss = report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();

    const RepoTrackResult eval_res =
        track_repo(spec, report.model, cfg.mpc, cfg.track, eval_repo, mode);
    rec.eval_mean_t_sur = eval_res.mean_t_sur;
    double jpe = 0.0;
    int jpe_count = 0;
    for (const TrackingMetrics& m : eval_res.metrics) {
      if (m.joint_position_error) {
        jpe += *m.joint_position_error;
        ++jpe_count;
      }
    }
    rec.eval_mean_joint_position_error = jpe_count > 0 ? jpe / jpe_count : 0.0;

    const RepoTrackResult train_res =
        track_repo(spec, report.model, cfg.mpc, cfg.track, train_repo, mode);
    rec.train_mean_t_sur = train_res.mean_t_sur;

    if (cfg.harvest) {
      std::vector<Segment> harvested = collect_failures(
          train_res.outcomes, dataset.seg_len, static_cast<std::uint32_t>(j + 1));
      rec.harvested_segments = static_cast<int>(harvested.size());
      if (!harvested.empty()) {
        Dataset extra;
        extra.state_dim = dataset.state_dim;
        extra.control_dim = dataset.control_dim;
        extra.seg_len = dataset.seg_len;
        extra.normalizer = dataset.normalizer;
        extra.segments = std::move(harvested);
        dataset = merge_datasets(dataset, extra);
        dataset.normalizer = extra.normalizer;
      }
    }

    result.records.push_back(rec);
    result.eval_history.push_back(rec.eval_mean_t_sur);
    if (cfg.on_iteration) cfg.on_iteration(rec, report.model);
    if (rec.eval_mean_t_sur >= best_score) {
      best_score = rec.eval_mean_t_sur;
      result.best_model = report.model;
      result.best_iteration = j;
    }
    if (track_converge_check(result.eval_history, cfg.eps_conv)) {
      result.converged = true;
      break;
    }
  }
  result.dataset = std::move(dataset);
  return result;
}

}  // namespace ikd
