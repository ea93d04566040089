#include "ikd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ikd/errors.hpp"
#include "ikd/koopman.hpp"
#include "ikd/rng.hpp"

namespace ikd {

Eigen::VectorXd fourier_features(int count, double x) {
  if (count < 1) throw BadDims("fourier_features: count must be >= 1");
  Eigen::VectorXd f(count);
  f(0) = 1.0;
  const double root2 = std::sqrt(2.0);
  for (int j = 1; j < count; ++j) {
    const int k = (j + 1) / 2;
    f(j) = j % 2 == 1 ? root2 * std::cos(k * x) : root2 * std::sin(k * x);
  }
  return f;
}

LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ShapeMismatch("fit_loglog_slope: length mismatch");
  if (xs.size() < 2) throw DegenerateFit("fit_loglog_slope: need at least two points");
  const int n = static_cast<int>(xs.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (xs[i] <= 0.0 || ys[i] <= 0.0) {
      throw DegenerateFit("fit_loglog_slope: nonpositive value has no logarithm");
    }
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw DegenerateFit("fit_loglog_slope: all abscissae coincide");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

double spectral_norm(const Eigen::MatrixXd& m, std::uint64_t seed) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  std::mt19937_64 rng(mix64(seed ^ 0x7370656374726cull));
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(m.cols(), [&]() { return dist(rng); });
  const double vn = v.norm();
  if (vn == 0.0) return 0.0;
  v /= vn;
  double sigma = 0.0;
  for (int it = 0; it < 10000; ++it) {
    const Eigen::VectorXd u = m * v;
    const double s = u.norm();
    if (s < 1e-300) return 0.0;
    Eigen::VectorXd next = m.transpose() * u;
    const double nn = next.norm();
    if (nn < 1e-300) return s;
    v = next / nn;
    if (std::abs(s - sigma) <= 1e-10 * std::max(1.0, s)) {
      sigma = s;
      break;
    }
    sigma = s;
  }
  return sigma;
}

SyntheticOperator make_synthetic_operator(int features, double scale, double decay, bool rotate,
                                          std::uint64_t seed) {
  if (features < 1) throw BadDims("make_synthetic_operator: features must be >= 1");
  SyntheticOperator op;
  op.features = features;
  op.scale = scale;
  op.decay = decay;
  op.spectrum.resize(features);
  for (int i = 0; i < features; ++i) {
    op.spectrum(i) = scale / std::pow(static_cast<double>(i + 1), decay);
  }
  if (rotate) {
    std::mt19937_64 rng(mix64(seed ^ 0x726f74617465ull));
    std::normal_distribution<double> dist(0.0, 1.0);
    const Eigen::MatrixXd gauss =
        Eigen::MatrixXd::NullaryExpr(features, features, [&]() { return dist(rng); });
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ() *
        Eigen::MatrixXd::Identity(features, features);
    op.matrix = q * op.spectrum.asDiagonal() * q.transpose();
  } else {
    op.matrix = Eigen::MatrixXd(op.spectrum.asDiagonal());
  }
  return op;
}

Eigen::MatrixXd quadrature_projection(const SyntheticOperator& op, int n, int nodes) {
  if (n < 1 || n > op.features) throw BadDims("quadrature_projection: n out of range");
  if (nodes <= op.features) {
    throw BadDims("quadrature_projection: need more nodes than the operator bandwidth");
  }
  const Eigen::MatrixXd top = op.matrix.topRows(n);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  const double step = 2.0 * M_PI / nodes;
  for (int q = 0; q < nodes; ++q) {
    const Eigen::VectorXd phi = fourier_features(op.features, q * step);
    acc.noalias() += (top * phi) * phi.head(n).transpose();
  }
  return acc / static_cast<double>(nodes);
}

AssumptionDiagnostics assumption_diagnostics(const Eigen::MatrixXd& z_rows, double delta) {
  if (z_rows.rows() < 1 || z_rows.cols() < 1) {
    throw BadDims("assumption_diagnostics: empty sample");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    throw BadDims("assumption_diagnostics: delta must lie in (0, 1)");
  }
  const double m = static_cast<double>(z_rows.rows());
  const double n = static_cast<double>(z_rows.cols());
  AssumptionDiagnostics diag;
  diag.feature_bound = z_rows.rowwise().norm().maxCoeff();
  const Eigen::MatrixXd gram = (z_rows.transpose() * z_rows) / m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  diag.gram_min_eig = eig.eigenvalues().minCoeff();
  if (diag.gram_min_eig <= 0.0) {
    diag.concentration_bound = std::numeric_limits<double>::infinity();
    return diag;
  }
  const double b2 = diag.feature_bound * diag.feature_bound;
  diag.concentration_bound = 2.0 * b2 * std::sqrt(2.0 * std::log(2.0 * n / delta)) *
                             (b2 / diag.gram_min_eig + 1.0) /
                             (diag.gram_min_eig * std::sqrt(m));
  return diag;
}

SamplingResult sampling_experiment(const SamplingConfig& cfg) {
  if (cfg.observed < 1 || cfg.observed > cfg.features) {
    throw BadDims("sampling_experiment: observed dimension out of range");
  }
  if (cfg.sample_counts.empty()) throw BadDims("sampling_experiment: no sample counts");
  for (int m : cfg.sample_counts) {
    if (m < cfg.observed) throw BadDims("sampling_experiment: sample count below dimension");
  }
  if (cfg.trials < 1) throw BadDims("sampling_experiment: trials must be >= 1");

  const SyntheticOperator op =
      make_synthetic_operator(cfg.features, cfg.scale, cfg.decay, true, cfg.seed);
  const Eigen::MatrixXd target = quadrature_projection(op, cfg.observed, cfg.nodes);
  const Eigen::MatrixXd top = op.matrix.topRows(cfg.observed);

  const int counts = static_cast<int>(cfg.sample_counts.size());
  const int slots = counts * cfg.trials;
  std::vector<double> errors(slots);
  std::vector<double> bounds(slots);
  parallel_for_index(slots, cfg.mode, [&](int slot) {
    const int ci = slot / cfg.trials;
    const int m = cfg.sample_counts[ci];
    std::mt19937_64 rng = derived_rng(cfg.seed, static_cast<std::uint64_t>(slot));
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
    Eigen::MatrixXd z(m, cfg.observed);
    Eigen::MatrixXd y(m, cfg.observed);
    for (int j = 0; j < m; ++j) {
      const Eigen::VectorXd phi = fourier_features(cfg.features, unif(rng));
      z.row(j) = phi.head(cfg.observed).transpose();
      y.row(j) = (top * phi).transpose();
    }
    const EdmdResult fit = edmd_fit(z, y);
    errors[slot] = spectral_norm(fit.K - target);
    bounds[slot] = assumption_diagnostics(z, cfg.delta).concentration_bound;
  });

  SamplingResult res;
  res.sample_counts = cfg.sample_counts;
  res.trial_errors.assign(counts, {});
  res.trial_bounds.assign(counts, {});
  int held = 0;
  for (int ci = 0; ci < counts; ++ci) {
    double total = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      const int slot = ci * cfg.trials + t;
      res.trial_errors[ci].push_back(errors[slot]);
      res.trial_bounds[ci].push_back(bounds[slot]);
      total += errors[slot];
      if (bounds[slot] >= errors[slot]) ++held;
    }
    res.mean_errors.push_back(total / cfg.trials);
  }
  res.bound_hold_fraction = static_cast<double>(held) / slots;
  std::vector<double> xs(cfg.sample_counts.begin(), cfg.sample_counts.end());
  res.fit = fit_loglog_slope(xs, res.mean_errors);
  return res;
}

namespace {

/// Quadrature L2 norms of the tail sums past each requested dimension for the
/// observable with coefficients 1/sqrt(N) under the diagonal spectrum.
std::vector<double> quadrature_tail_norms(const ProjectionConfig& cfg,
                                          const std::vector<int>& dims) {
  const int n_feat = cfg.features;
  if (cfg.nodes <= 2 * n_feat) {
    throw BadDims("projection quadrature needs more than twice the feature count in nodes");
  }
  Eigen::VectorXd weights(n_feat);
  const double c = 1.0 / std::sqrt(static_cast<double>(n_feat));
  for (int i = 0; i < n_feat; ++i) {
    weights(i) = c * cfg.scale / std::pow(static_cast<double>(i + 1), cfg.decay);
  }

  std::vector<int> order(dims.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return dims[a] < dims[b]; });

  std::vector<double> acc(dims.size(), 0.0);
  const double step = 2.0 * M_PI / cfg.nodes;
  std::vector<double> prefix_at(dims.size());
  for (int q = 0; q < cfg.nodes; ++q) {
    const Eigen::VectorXd phi = fourier_features(n_feat, q * step);
    double prefix = 0.0;
    std::size_t next = 0;
    for (int i = 0; i < n_feat; ++i) {
      prefix += weights(i) * phi(i);
      while (next < order.size() && dims[order[next]] == i + 1) {
        prefix_at[order[next]] = prefix;
        ++next;
      }
    }
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const double tail = prefix - prefix_at[d];
      acc[d] += tail * tail;
    }
  }
  std::vector<double> norms(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    norms[d] = std::sqrt(acc[d] / cfg.nodes);
  }
  return norms;
}

void check_projection_dim(const ProjectionConfig& cfg, int n, bool allow_full) {
  const int hi = allow_full ? cfg.features : cfg.features - 1;
  if (n < 1 || n > hi) throw BadDims("projection dimension out of range");
}

}  // namespace

ProjectionResult projection_experiment(const ProjectionConfig& cfg) {
  if (cfg.dims.size() < 2) throw BadDims("projection_experiment: need at least two dims");
  for (int n : cfg.dims) check_projection_dim(cfg, n, false);

  ProjectionResult res;
  res.dims = cfg.dims;
  res.errors = quadrature_tail_norms(cfg, cfg.dims);
  for (int n : cfg.dims) {
    const double lam = cfg.scale / std::pow(static_cast<double>(n + 1), cfg.decay);
    const double tail_mass =
        std::sqrt(static_cast<double>(cfg.features - n) / cfg.features);
    res.tail_bounds.push_back(lam * tail_mass);
  }
  std::vector<double> xs(cfg.dims.begin(), cfg.dims.end());
  res.fit = fit_loglog_slope(xs, res.errors);
  return res;
}

double projection_error(const ProjectionConfig& cfg, int n) {
  check_projection_dim(cfg, n, true);
  return quadrature_tail_norms(cfg, {n})[0];
}

}  // namespace ikd
