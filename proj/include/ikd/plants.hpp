#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ikd {

enum class PlantId { Pendulum, Cartpole, Hopper1D };

/// Semantic meaning of one state dimension. Metrics aggregate over the
/// contiguous block of dimensions sharing a role.
enum class StateRole {
  JointPosition,
  JointVelocity,
  RootHeight,
  RootLinearVelocity,
  RootOrientationScalar,
  RootAngularVelocity,
};

/// Hybrid mode of the 1-D hopper. Plants without contact report None.
enum class HybridMode : std::uint8_t { None = 0, Flight = 1, Stance = 2 };

/// Immutable description of a simulated plant: dimensions, integration step,
/// state layout, physical parameters, control bounds, and the gains used by
/// the scripted expert.
struct PlantSpec {
  PlantId id = PlantId::Pendulum;
  int state_dim = 0;    ///< n'
  int control_dim = 0;  ///< m'
  double dt = 0.02;
  std::vector<StateRole> state_layout;
  std::map<std::string, double> physical_params;
  Eigen::VectorXd u_min;  ///< elementwise control lower bound (plant units)
  Eigen::VectorXd u_max;  ///< elementwise control upper bound (plant units)
  Eigen::VectorXd kp;     ///< expert proportional gains, one per control dim
  Eigen::VectorXd kd;     ///< expert derivative gains, one per control dim
};

struct PlantState {
  Eigen::VectorXd x;
  HybridMode mode = HybridMode::None;
};

/// A piecewise-constant movement command for the scripted expert: a target per
/// control dimension and the number of steps it stays active.
struct Command {
  Eigen::VectorXd target;
  int duration = 0;
};

/// Closed-loop or scripted trajectory. states has steps+1 rows, controls has
/// steps rows. failed marks an aborted run (non-finite state); the matrices
/// then hold only the steps that completed.
struct Trajectory {
  Eigen::MatrixXd states;
  Eigen::MatrixXd controls;
  std::vector<HybridMode> modes;
  int steps = 0;
  bool failed = false;
};

/// Plant spec with desk-scale default parameters for the given id.
PlantSpec make_plant_spec(PlantId id);

/// Rest state of the plant (pendulum hanging, cartpole hanging pole at the
/// origin, hopper standing on the ground).
PlantState default_state(const PlantSpec& spec);

/// Index range [first, first+count) of the state dimensions with the given
/// role, or count == 0 when the layout lacks the role.
struct RoleSlice {
  int first = 0;
  int count = 0;
};
RoleSlice role_slice(const PlantSpec& spec, StateRole role);

/// Hybrid mode consistent with a bare state vector (hopper: stance when the
/// foot is at or below the ground). None for plants without contact.
HybridMode infer_mode(const PlantSpec& spec, const Eigen::VectorXd& x);

/// One semi-implicit Euler step. u is clamped to the spec's control bounds
/// before it is applied. Throws NonFiniteState if the update leaves the
/// realm of finite numbers.
PlantState plant_step(const PlantSpec& spec, const PlantState& s, const Eigen::VectorXd& u);

/// Scripted expert: PD law toward the command target on the commanded
/// quantity (pendulum joint angle, cartpole cart position, hopper apex
/// height), clamped to the control bounds. Deterministic in (s, cmd).
Eigen::VectorXd expert_control(const PlantSpec& spec, const PlantState& s, const Command& cmd);

/// Rolls the plant forward `steps` steps under policy(state, t). A
/// NonFiniteState abort is recorded in the returned trajectory instead of
/// propagating.
Trajectory rollout(const PlantSpec& spec, const PlantState& s0,
                   const std::function<Eigen::VectorXd(const PlantState&, int)>& policy,
                   int steps);

/// Total mechanical energy of the pendulum (used by the dissipation tests).
double pendulum_energy(const PlantSpec& spec, const PlantState& s);

}  // namespace ikd
