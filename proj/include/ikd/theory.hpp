#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ikd/parallel.hpp"

namespace ikd {

/// Orthonormal trigonometric features on [0, 2pi) under the uniform measure:
/// feature 0 is the constant 1, features 2k-1 and 2k are sqrt(2) cos(kx) and
/// sqrt(2) sin(kx).
Eigen::VectorXd fourier_features(int count, double x);

/// Least-squares line through (ln x, ln y). Throws DegenerateFit when the
/// abscissae carry no spread or any value is nonpositive.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

/// Largest singular value by power iteration on m'm, deterministic per seed.
double spectral_norm(const Eigen::MatrixXd& m, std::uint64_t seed = 0);

/// Dense self-adjoint reference operator on the span of the first `features`
/// trigonometric features, with spectrum scale / i^decay. With rotate the
/// eigenbasis is a seeded random orthogonal matrix, so truncating the feature
/// set genuinely loses information; without it the operator is diagonal.
struct SyntheticOperator {
  int features = 0;
  double scale = 0.9;
  double decay = 1.0;
  Eigen::VectorXd spectrum;
  Eigen::MatrixXd matrix;
};
SyntheticOperator make_synthetic_operator(int features, double scale, double decay, bool rotate,
                                          std::uint64_t seed);

/// Compression of the operator onto the first n features under the uniform
/// measure, computed by periodic quadrature over equispaced nodes (exact for
/// trigonometric polynomials at any node count above twice the bandwidth).
Eigen::MatrixXd quadrature_projection(const SyntheticOperator& op, int n, int nodes = 16384);

/// Concentration-style diagnostics of one feature sample: the largest feature
/// vector norm, the smallest eigenvalue of the sampled Gram matrix, and the
/// resulting error bound at confidence 1 - delta.
struct AssumptionDiagnostics {
  double feature_bound = 0.0;        ///< max row 2-norm of z_rows
  double gram_min_eig = 0.0;         ///< lambda_min of z'z / m
  double concentration_bound = 0.0;
};
AssumptionDiagnostics assumption_diagnostics(const Eigen::MatrixXd& z_rows, double delta = 0.05);

/// Estimation-error experiment: fit the compressed operator from m sampled
/// feature pairs and compare against the quadrature compression in spectral
/// norm, over a grid of sample counts with several trials each. Trials draw
/// from per-slot random streams, so results do not depend on the execution
/// mode.
struct SamplingConfig {
  int features = 256;  ///< N, ambient feature count of the reference operator
  int observed = 32;   ///< n, retained features
  double scale = 0.9;
  double decay = 1.0;
  std::vector<int> sample_counts = {1000, 3000, 10000, 30000, 100000};
  int trials = 10;
  int nodes = 16384;
  double delta = 0.05;
  std::uint64_t seed = 0;
  ExecMode mode = ExecMode::Serial;
};
struct SamplingResult {
  std::vector<int> sample_counts;
  std::vector<double> mean_errors;
  std::vector<std::vector<double>> trial_errors;  ///< [count index][trial]
  std::vector<std::vector<double>> trial_bounds;  ///< concentration bounds
  double bound_hold_fraction = 0.0;  ///< trials with bound >= error
  LogLogFit fit;                     ///< mean error against sample count
};
SamplingResult sampling_experiment(const SamplingConfig& cfg);

/// Truncation-error experiment on the aligned (diagonal) operator: the
/// observable sum_i c_i phi_i with c_i = 1/sqrt(N) is pushed through the
/// compressed operator and compared with the full image in L2, by quadrature.
struct ProjectionConfig {
  int features = 2048;  ///< N
  double scale = 0.9;
  double decay = 1.0;
  std::vector<int> dims = {4, 8, 16, 32, 64, 128};
  int nodes = 16384;
};
struct ProjectionResult {
  std::vector<int> dims;
  std::vector<double> errors;
  std::vector<double> tail_bounds;  ///< lambda_{n+1} ||(I - P_n) psi||, unit constant
  LogLogFit fit;
};
ProjectionResult projection_experiment(const ProjectionConfig& cfg);

/// Truncation error for a single retained dimension n <= N. n = N is allowed
/// here (and is exactly zero), unlike in the experiment whose grid must stay
/// strictly inside to keep the log-log fit defined.
double projection_error(const ProjectionConfig& cfg, int n);

}  // namespace ikd
