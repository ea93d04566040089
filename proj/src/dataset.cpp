#include "ikd/dataset.hpp"

#include <cmath>
#include <sstream>

#include "ikd/errors.hpp"
#include "ikd/rng.hpp"

namespace ikd {

namespace {

constexpr double kStdFloor = 1e-8;

Eigen::VectorXd uniform_box(std::mt19937_64& rng, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
  Eigen::VectorXd out(lo.size());
  for (int i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> dist(lo(i), hi(i));
    out(i) = lo(i) == hi(i) ? lo(i) : dist(rng);
  }
  return out;
}

/// Piecewise-constant command schedule covering at least `steps` steps.
std::vector<Command> sample_schedule(const CollectOptions& opts, int steps,
                                     std::mt19937_64& rng) {
  std::vector<Command> schedule;
  int covered = 0;
  while (covered < steps) {
    Command cmd;
    cmd.target = uniform_box(rng, opts.target_lo, opts.target_hi);
    std::uniform_int_distribution<int> dur(opts.duration_lo, opts.duration_hi);
    cmd.duration = dur(rng);
    covered += cmd.duration;
    schedule.push_back(cmd);
  }
  return schedule;
}

const Command& command_at(const std::vector<Command>& schedule, int t) {
  int covered = 0;
  for (const Command& cmd : schedule) {
    covered += cmd.duration;
    if (t < covered) return cmd;
  }
  return schedule.back();
}

/// One randomized expert rollout, retried with fresh derived streams until it
/// survives the full step count.
Trajectory expert_rollout_with_retry(const PlantSpec& spec, const CollectOptions& opts,
                                     int steps, std::uint64_t seed, int slot,
                                     std::mt19937_64* segment_rng) {
  const int stride = opts.max_retries + 1;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    std::mt19937_64 rng =
        derived_rng(seed, static_cast<std::uint64_t>(slot) * stride + attempt);
    PlantState s0 = default_state(spec);
    s0.x += uniform_box(rng, opts.init_lo, opts.init_hi);
    if (spec.id == PlantId::Hopper1D) {
      s0.mode = s0.x(2) - s0.x(0) <= 0.0 ? HybridMode::Stance : HybridMode::Flight;
    }
    std::vector<Command> schedule = sample_schedule(opts, steps, rng);
    Trajectory traj = rollout(
        spec, s0,
        [&](const PlantState& s, int t) { return expert_control(spec, s, command_at(schedule, t)); },
        steps);
    if (!traj.failed && traj.steps == steps) {
      if (segment_rng) *segment_rng = rng;
      return traj;
    }
  }
  std::ostringstream os;
  os << "expert rollout for slot " << slot << " failed " << (opts.max_retries + 1)
     << " times";
  throw RepoGenerationFailed(os.str());
}

}  // namespace

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(std);
}

Eigen::VectorXd Normalizer::invert(const Eigen::VectorXd& x) const {
  return x.cwiseProduct(std) + mean;
}

Eigen::MatrixXd Normalizer::apply_rows(const Eigen::MatrixXd& rows) const {
  return (rows.rowwise() - mean.transpose()) * std.cwiseInverse().asDiagonal();
}

Eigen::MatrixXd Normalizer::invert_rows(const Eigen::MatrixXd& rows) const {
  return (rows * std.asDiagonal()).rowwise() + mean.transpose();
}

Normalizer Normalizer::identity(int dim) {
  Normalizer n;
  n.mean = Eigen::VectorXd::Zero(dim);
  n.std = Eigen::VectorXd::Ones(dim);
  return n;
}

CollectOptions default_collect_options(const PlantSpec& spec) {
  CollectOptions opts;
  switch (spec.id) {
    case PlantId::Pendulum:
      opts.target_lo = Eigen::VectorXd::Constant(1, -1.2);
      opts.target_hi = Eigen::VectorXd::Constant(1, 1.2);
      opts.init_lo = Eigen::Vector2d(-0.3, -0.5);
      opts.init_hi = Eigen::Vector2d(0.3, 0.5);
      break;
    case PlantId::Cartpole:
      opts.target_lo = Eigen::VectorXd::Constant(1, -1.0);
      opts.target_hi = Eigen::VectorXd::Constant(1, 1.0);
      opts.init_lo = Eigen::Vector4d(-0.15, -0.3, -0.5, -0.3);
      opts.init_hi = Eigen::Vector4d(0.15, 0.3, 0.5, 0.3);
      break;
    case PlantId::Hopper1D:
      opts.target_lo = Eigen::VectorXd::Constant(1, 0.55);
      opts.target_hi = Eigen::VectorXd::Constant(1, 0.95);
      opts.init_lo = Eigen::Vector4d(-0.02, -0.05, -0.02, -0.1);
      opts.init_hi = Eigen::Vector4d(0.02, 0.05, 0.05, 0.1);
      break;
  }
  return opts;
}

Normalizer fit_normalizer(const Eigen::MatrixXd& states, std::vector<int>* degenerate_columns) {
  if (states.rows() == 0) throw BadDims("fit_normalizer needs at least one row");
  Normalizer n;
  n.mean = states.colwise().mean();
  Eigen::MatrixXd centered = states.rowwise() - n.mean.transpose();
  Eigen::VectorXd var = centered.array().square().colwise().mean();
  n.std = var.cwiseSqrt();
  if (degenerate_columns) degenerate_columns->clear();
  for (int c = 0; c < n.std.size(); ++c) {
    if (n.std(c) < kStdFloor) {
      n.std(c) = kStdFloor;
      if (degenerate_columns) degenerate_columns->push_back(c);
    }
  }
  return n;
}

Dataset collect_initial_dataset(const PlantSpec& spec, const CollectOptions& opts, int n_traj,
                                int l_init, int l_seg, std::uint64_t seed, ExecMode mode) {
  if (n_traj <= 0) throw BadDims("collect_initial_dataset needs n_traj > 0");
  if (l_seg <= 0 || l_seg > l_init) throw BadDims("need 0 < l_seg <= l_init");
  Dataset ds;
  ds.state_dim = spec.state_dim;
  ds.control_dim = spec.control_dim;
  ds.seg_len = l_seg;
  ds.segments.resize(n_traj);

  parallel_for_index(n_traj, mode, [&](int i) {
    std::mt19937_64 rng;
    Trajectory traj = expert_rollout_with_retry(spec, opts, l_init, seed, i, &rng);
    std::uniform_int_distribution<int> start_dist(0, l_init - l_seg);
    const int start = start_dist(rng);
    Segment seg;
    seg.states = traj.states.middleRows(start, l_seg + 1);
    seg.controls = traj.controls.middleRows(start, l_seg);
    seg.provenance = Provenance::Initial;
    seg.iteration = 0;
    ds.segments[i] = std::move(seg);
  });

  Eigen::MatrixXd all_states(static_cast<Eigen::Index>(n_traj) * (l_seg + 1), spec.state_dim);
  for (int i = 0; i < n_traj; ++i) {
    all_states.middleRows(static_cast<Eigen::Index>(i) * (l_seg + 1), l_seg + 1) =
        ds.segments[i].states;
  }
  ds.normalizer = fit_normalizer(all_states);
  return ds;
}

Dataset merge_datasets(const Dataset& a, const Dataset& b) {
  if (a.state_dim != b.state_dim || a.control_dim != b.control_dim) {
    throw ShapeMismatch("merge_datasets: state/control dims differ");
  }
  if (a.seg_len != b.seg_len) {
    throw ShapeMismatch("merge_datasets: segment lengths differ");
  }
  Dataset out;
  out.state_dim = a.state_dim;
  out.control_dim = a.control_dim;
  out.seg_len = a.seg_len;
  out.segments.reserve(a.segments.size() + b.segments.size());
  out.segments.insert(out.segments.end(), a.segments.begin(), a.segments.end());
  out.segments.insert(out.segments.end(), b.segments.begin(), b.segments.end());
  if (out.segments.empty()) throw EmptyDataset("merge_datasets: both inputs empty");

  const Eigen::Index rows_per_seg = a.seg_len + 1;
  Eigen::MatrixXd all_states(rows_per_seg * static_cast<Eigen::Index>(out.segments.size()),
                             out.state_dim);
  for (std::size_t i = 0; i < out.segments.size(); ++i) {
    all_states.middleRows(static_cast<Eigen::Index>(i) * rows_per_seg, rows_per_seg) =
        out.segments[i].states;
  }
  out.normalizer = fit_normalizer(all_states);
  validate_dataset(out);
  return out;
}

ReferenceRepository make_reference_repo(const PlantSpec& spec, const CollectOptions& opts,
                                        int count, int length, double noise_halfwidth,
                                        std::uint64_t seed) {
  if (count <= 0 || length < 2) throw BadDims("make_reference_repo needs count > 0, length >= 2");
  if (noise_halfwidth < 0.0) throw BadDims("noise_halfwidth must be >= 0");
  ReferenceRepository repo;
  repo.state_dim = spec.state_dim;
  repo.seed = seed;
  repo.noise_halfwidth = noise_halfwidth;
  repo.references.resize(count);

  for (int i = 0; i < count; ++i) {
    Trajectory traj = expert_rollout_with_retry(spec, opts, length - 1, seed, i, nullptr);
    repo.references[i] = traj.states;
  }

  Eigen::MatrixXd all_states(static_cast<Eigen::Index>(count) * length, spec.state_dim);
  for (int i = 0; i < count; ++i) {
    all_states.middleRows(static_cast<Eigen::Index>(i) * length, length) = repo.references[i];
  }
  repo.normalizer = fit_normalizer(all_states);

  for (int i = 0; i < count; ++i) {
    repo.references[i] = repo.normalizer.apply_rows(repo.references[i]);
    if (noise_halfwidth > 0.0) {
      std::mt19937_64 noise_rng = derived_rng(~seed, i);
      std::uniform_real_distribution<double> dist(-noise_halfwidth, noise_halfwidth);
      for (Eigen::Index r = 0; r < repo.references[i].rows(); ++r) {
        for (Eigen::Index c = 0; c < repo.references[i].cols(); ++c) {
          repo.references[i](r, c) += dist(noise_rng);
        }
      }
    }
  }
  return repo;
}

Segment failure_segment(const Trajectory& traj, int t_fail, int l, std::uint32_t iteration) {
  if (l <= 0) throw BadDims("failure_segment needs l > 0");
  if (t_fail < l) {
    std::ostringstream os;
    os << "failure at step " << t_fail << " is too early for a segment of length " << l;
    throw BadDims(os.str());
  }
  if (traj.steps < t_fail) throw ShapeMismatch("trajectory shorter than failure step");
  Segment seg;
  seg.states = traj.states.middleRows(t_fail - l, l + 1);
  seg.controls = traj.controls.middleRows(t_fail - l, l);
  seg.provenance = Provenance::Incremental;
  seg.iteration = iteration;
  return seg;
}

void validate_dataset(const Dataset& ds) {
  if (ds.state_dim <= 0 || ds.control_dim <= 0 || ds.seg_len <= 0) {
    throw ShapeMismatch("dataset dims must be positive");
  }
  if (ds.normalizer.mean.size() != ds.state_dim || ds.normalizer.std.size() != ds.state_dim) {
    throw ShapeMismatch("dataset normalizer dimension mismatch");
  }
  for (const Segment& seg : ds.segments) {
    if (seg.states.rows() != ds.seg_len + 1 || seg.states.cols() != ds.state_dim ||
        seg.controls.rows() != ds.seg_len || seg.controls.cols() != ds.control_dim) {
      throw ShapeMismatch("segment shape inconsistent with dataset dims");
    }
  }
}

}  // namespace ikd
