#pragma once

#include <Eigen/Dense>

#include "ikd/koopman.hpp"
#include "ikd/plants.hpp"

namespace ikd {

/// ADMM parameters for the box-constrained QP solver.
struct AdmmConfig {
  double rho = 1.0;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iters = 10000;
};

enum class QpStatus { Converged, MaxIters };

struct QpResult {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::Converged;
  int iters = 0;
  double r_prim = 0.0;
  double r_dual = 0.0;
};

/// min 1/2 u'Pu + q'u subject to lo <= u <= hi, P symmetric positive definite.
struct BoxQp {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

/// Receding-horizon controller settings. The per-step state weight is
/// state_weight I, the terminal weight terminal_weight I, the control weight
/// control_weight I. Bounds are elementwise in plant units; controls are
/// never normalized.
struct MpcConfig {
  int horizon = 15;
  double state_weight = 1.0;
  double terminal_weight = 1.0;
  double control_weight = 0.01;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;
  AdmmConfig admm;
};

/// Controller config with bounds taken from the plant.
MpcConfig make_mpc_config(const PlantSpec& spec, int horizon);

/// Condensed horizon-H QP over the stacked control sequence
/// [u_0; ...; u_{H-1}]. Predicted latents under z+ = A z + B u are affine in
/// the controls; the cost sums quadratic tracking error of the retrieved
/// state against ref_rows (row h-1 is the target for step h, normalized
/// units) plus the control penalty. z0 is the current latent.
BoxQp build_condensed_qp(const KoopmanModel& model, const MpcConfig& cfg,
                         const Eigen::VectorXd& z0, const Eigen::MatrixXd& ref_rows);

/// Over-relaxation-free ADMM on the u = v splitting with v clamped to the
/// box. Factors P + rho I once; the returned point is the feasible iterate v.
/// Throws NotPD when P + rho I has no Cholesky factorization.
QpResult solve_box_qp(const BoxQp& qp, const AdmmConfig& cfg);

/// Exhaustive reference solver: enumerates every free/lower/upper assignment
/// of the coordinates, solves the reduced stationarity system, and returns
/// the feasible candidate with the smallest objective. Exact for strictly
/// convex problems; dimension above 8 throws DimTooLarge.
Eigen::VectorXd qp_solve_reference(const BoxQp& qp);

/// Largest stationarity violation of u for the box QP: |grad| on free
/// coordinates, -grad at the lower bound, +grad at the upper bound, and any
/// bound infeasibility. Bounds count as active within tol_active.
double kkt_violation(const BoxQp& qp, const Eigen::VectorXd& u, double tol_active = 1e-6);

/// One receding-horizon control: lift the measured state, solve the condensed
/// QP against the window (H reference rows in plant units), return the first
/// control block clamped to the bounds.
Eigen::VectorXd mpc_step(const KoopmanModel& model, const MpcConfig& cfg,
                         const Eigen::VectorXd& x, const Eigen::MatrixXd& window);

struct TrackOptions {
  int t_max = 200;
  double eps_fail = 0.7;  ///< mean joint-position L1 failure threshold
};

/// Closed-loop tracking outcome. t_sur counts executed steps: the step whose
/// resulting state first violates the failure threshold when failed, t_max
/// otherwise. traj holds the executed states and controls in plant units.
struct TrackOutcome {
  Trajectory traj;
  int t_sur = 0;
  bool failed = false;
  int fail_step = 0;
};

/// Runs the controller on the real plant along a reference (rows in plant
/// units, row 0 doubles as the start state). The lookahead window repeats the
/// final reference row once the horizon reaches past the end, and tracking
/// continues against that row until t_max steps. Failure is declared when the
/// mean absolute joint-position error of a reached state exceeds eps_fail, or
/// when the plant or the lift leaves finite range.
TrackOutcome track_reference(const PlantSpec& spec, const KoopmanModel& model,
                             const MpcConfig& cfg, const Eigen::MatrixXd& ref_plant_rows,
                             const TrackOptions& opts);

}  // namespace ikd
