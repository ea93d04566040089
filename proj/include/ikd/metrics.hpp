#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ikd/dataset.hpp"
#include "ikd/koopman.hpp"
#include "ikd/plants.hpp"

namespace ikd {

/// Mean absolute open-loop prediction error over the first k steps: the model
/// is rolled out from each segment's first state under the segment's recorded
/// controls, and |predicted - actual| is averaged over those k steps, the
/// state dimensions, and the segments. Everything is compared in plant units.
/// A rollout that leaves finite range contributes +infinity.
double k_step_prediction_error(const KoopmanModel& model, const std::vector<Segment>& segments,
                               int k);

/// k_step_prediction_error evaluated on a grid of step counts.
struct PredictionCurve {
  std::vector<int> ks;
  std::vector<double> errors;
};
PredictionCurve prediction_curve(const KoopmanModel& model, const std::vector<Segment>& segments,
                                 const std::vector<int>& ks = {1, 3, 6, 9, 12, 15});

/// Mean absolute tracking errors per semantic state block, averaged over the
/// executed steps 1..t_sur and the dimensions of each block, in plant units.
/// Acceleration errors compare first differences of the velocity block scaled
/// by 1/dt. Blocks absent from the plant's layout stay empty.
struct TrackingMetrics {
  std::optional<double> joint_position_error;
  std::optional<double> joint_velocity_error;
  std::optional<double> joint_acceleration_error;
  std::optional<double> root_height_error;
  std::optional<double> root_orientation_error;
  std::optional<double> root_linear_velocity_error;
  std::optional<double> root_angular_velocity_error;
};

/// Errors of an executed trajectory against a reference in plant units. The
/// reference's final row extends past its end, mirroring how tracking runs.
/// Steps beyond what the trajectory actually executed are skipped; a
/// trajectory with no executed steps yields empty metrics.
TrackingMetrics tracking_metrics(const PlantSpec& spec, const Eigen::MatrixXd& executed_states,
                                 const Eigen::MatrixXd& ref_plant_rows, int t_sur);

}  // namespace ikd
