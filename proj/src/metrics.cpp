#include "ikd/metrics.hpp"

#include <cmath>
#include <limits>

#include "ikd/errors.hpp"

namespace ikd {

double k_step_prediction_error(const KoopmanModel& model, const std::vector<Segment>& segments,
                               int k) {
  if (k < 1) throw BadDims("k_step_prediction_error: k must be >= 1");
  if (segments.empty()) throw EmptyDataset("k_step_prediction_error: no segments");
  const int np = model.state_dim();
  double total = 0.0;
  for (const Segment& seg : segments) {
    if (seg.controls.rows() < k) {
      throw BadDims("k_step_prediction_error: segment shorter than k");
    }
    if (seg.states.cols() != np) {
      throw ShapeMismatch("k_step_prediction_error: segment state dimension mismatch");
    }
    double err;
    try {
      const Eigen::VectorXd x0 = model.normalizer.apply(seg.states.row(0).transpose());
      const Eigen::MatrixXd pred = predict_states(model, x0, seg.controls.topRows(k), true);
      err = (pred.bottomRows(k) - seg.states.middleRows(1, k)).cwiseAbs().sum() /
            (static_cast<double>(k) * np);
    } catch (const NonFinitePrediction&) {
      err = std::numeric_limits<double>::infinity();
    }
    total += err;
  }
  return total / static_cast<double>(segments.size());
}

PredictionCurve prediction_curve(const KoopmanModel& model, const std::vector<Segment>& segments,
                                 const std::vector<int>& ks) {
  PredictionCurve curve;
  curve.ks = ks;
  curve.errors.reserve(ks.size());
  for (int k : ks) curve.errors.push_back(k_step_prediction_error(model, segments, k));
  return curve;
}

namespace {

/// Mean |a - b| over the rows t = 1..t_eff restricted to a role block, where
/// the reference row index saturates at its last row.
std::optional<double> block_error(const Eigen::MatrixXd& exec, const Eigen::MatrixXd& ref,
                                  const RoleSlice& slice, int t_eff) {
  if (slice.count == 0 || t_eff < 1) return std::nullopt;
  const int last = static_cast<int>(ref.rows()) - 1;
  double total = 0.0;
  for (int t = 1; t <= t_eff; ++t) {
    const int r = std::min(t, last);
    total += (exec.row(t).segment(slice.first, slice.count) -
              ref.row(r).segment(slice.first, slice.count))
                 .cwiseAbs()
                 .sum();
  }
  return total / (static_cast<double>(t_eff) * slice.count);
}

/// Same over first differences of a velocity block scaled by 1/dt.
std::optional<double> block_accel_error(const Eigen::MatrixXd& exec, const Eigen::MatrixXd& ref,
                                        const RoleSlice& slice, int t_eff, double dt) {
  if (slice.count == 0 || t_eff < 1) return std::nullopt;
  const int last = static_cast<int>(ref.rows()) - 1;
  double total = 0.0;
  for (int t = 1; t <= t_eff; ++t) {
    const int r = std::min(t, last);
    const int r_prev = std::min(t - 1, last);
    const Eigen::RowVectorXd a_exec =
        (exec.row(t).segment(slice.first, slice.count) -
         exec.row(t - 1).segment(slice.first, slice.count)) /
        dt;
    const Eigen::RowVectorXd a_ref =
        (ref.row(r).segment(slice.first, slice.count) -
         ref.row(r_prev).segment(slice.first, slice.count)) /
        dt;
    total += (a_exec - a_ref).cwiseAbs().sum();
  }
  return total / (static_cast<double>(t_eff) * slice.count);
}

}  // namespace

TrackingMetrics tracking_metrics(const PlantSpec& spec, const Eigen::MatrixXd& executed_states,
                                 const Eigen::MatrixXd& ref_plant_rows, int t_sur) {
  if (executed_states.cols() != spec.state_dim || ref_plant_rows.cols() != spec.state_dim) {
    throw ShapeMismatch("tracking_metrics: state dimension mismatch");
  }
  if (ref_plant_rows.rows() < 1) throw BadDims("tracking_metrics: empty reference");
  const int t_eff =
      std::min(t_sur, static_cast<int>(executed_states.rows()) - 1);

  TrackingMetrics m;
  m.joint_position_error = block_error(executed_states, ref_plant_rows,
                                       role_slice(spec, StateRole::JointPosition), t_eff);
  m.joint_velocity_error = block_error(executed_states, ref_plant_rows,
                                       role_slice(spec, StateRole::JointVelocity), t_eff);
  m.joint_acceleration_error =
      block_accel_error(executed_states, ref_plant_rows,
                        role_slice(spec, StateRole::JointVelocity), t_eff, spec.dt);
  m.root_height_error = block_error(executed_states, ref_plant_rows,
                                    role_slice(spec, StateRole::RootHeight), t_eff);
  m.root_orientation_error =
      block_error(executed_states, ref_plant_rows,
                  role_slice(spec, StateRole::RootOrientationScalar), t_eff);
  m.root_linear_velocity_error =
      block_error(executed_states, ref_plant_rows,
                  role_slice(spec, StateRole::RootLinearVelocity), t_eff);
  m.root_angular_velocity_error =
      block_error(executed_states, ref_plant_rows,
                  role_slice(spec, StateRole::RootAngularVelocity), t_eff);
  return m;
}

}  // namespace ikd
