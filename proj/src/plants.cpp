#include "ikd/plants.hpp"

#include <cmath>
#include <sstream>

#include "ikd/errors.hpp"

namespace ikd {

namespace {

double param(const PlantSpec& spec, const std::string& name) {
  auto it = spec.physical_params.find(name);
  if (it == spec.physical_params.end()) {
    throw ConfigError("plant parameter missing: " + name);
  }
  return it->second;
}

Eigen::VectorXd clamp_control(const PlantSpec& spec, const Eigen::VectorXd& u) {
  if (u.size() != spec.control_dim) {
    std::ostringstream os;
    os << "control has dim " << u.size() << ", plant expects " << spec.control_dim;
    throw ShapeMismatch(os.str());
  }
  return u.cwiseMax(spec.u_min).cwiseMin(spec.u_max);
}

void check_finite(const Eigen::VectorXd& x, const char* what) {
  if (!x.allFinite()) {
    throw NonFiniteState(std::string("non-finite ") + what);
  }
}

// State [theta, thetadot], theta = 0 at the hanging equilibrium. u is a torque.
PlantState step_pendulum(const PlantSpec& spec, const PlantState& s, const Eigen::VectorXd& u) {
  const double g = param(spec, "gravity");
  const double l = param(spec, "length");
  const double m = param(spec, "mass");
  const double b = param(spec, "damping");
  const double th = s.x(0);
  const double thd = s.x(1);
  const double acc = -(g / l) * std::sin(th) - b * thd + u(0) / (m * l * l);
  PlantState out;
  out.x.resize(2);
  out.x(1) = thd + spec.dt * acc;
  out.x(0) = th + spec.dt * out.x(1);
  return out;
}

// State [theta, thetadot, xc, xcdot], theta = 0 with the pole hanging.
// u is a horizontal force on the cart.
PlantState step_cartpole(const PlantSpec& spec, const PlantState& s, const Eigen::VectorXd& u) {
  const double mc = param(spec, "cart_mass");
  const double mp = param(spec, "pole_mass");
  const double lp = param(spec, "pole_length");
  const double g = param(spec, "gravity");
  const double bc = param(spec, "cart_damping");
  const double bp = param(spec, "pole_damping");
  const double th = s.x(0);
  const double thd = s.x(1);
  const double xcd = s.x(3);
  const double sin_th = std::sin(th);
  const double cos_th = std::cos(th);
  const double mtot = mc + mp;
  const double temp = (u(0) - bc * xcd + mp * lp * thd * thd * sin_th) / mtot;
  const double th_acc =
      -(g * sin_th + cos_th * temp) / (lp * (4.0 / 3.0 - mp * cos_th * cos_th / mtot)) - bp * thd;
  const double xc_acc = temp - mp * lp * th_acc * cos_th / mtot;
  PlantState out;
  out.x.resize(4);
  out.x(1) = thd + spec.dt * th_acc;
  out.x(0) = th + spec.dt * out.x(1);
  out.x(3) = xcd + spec.dt * xc_acc;
  out.x(2) = s.x(2) + spec.dt * out.x(3);
  return out;
}

// State [l, ldot, z, zdot]: l is the actuated leg extension (the joint),
// z the body height. The foot sits at z - l; Stance holds whenever the foot
// is at or below ground level 0. In flight u drives the leg, in stance u is
// thrust along the leg acting on the body. Touchdown with foot speed beyond
// touchdown_speed scales both velocities by the restitution factor, which is
// the impact discontinuity of this plant.
PlantState step_hopper(const PlantSpec& spec, const PlantState& s, const Eigen::VectorXd& u) {
  const double mb = param(spec, "body_mass");
  const double ml = param(spec, "leg_mass");
  const double g = param(spec, "gravity");
  const double l0 = param(spec, "leg_rest_length");
  const double kl = param(spec, "leg_stiffness");
  const double bl = param(spec, "leg_damping");
  const double kg = param(spec, "ground_stiffness");
  const double cg = param(spec, "ground_damping");
  const double rest = param(spec, "restitution");
  const double td_speed = param(spec, "touchdown_speed");

  const double l = s.x(0);
  const double ld = s.x(1);
  const double z = s.x(2);
  const double zd = s.x(3);
  const bool stance = s.mode == HybridMode::Stance;

  double l_acc = (kl * (l0 - l) - bl * ld) / ml;
  double z_acc = -g;
  if (stance) {
    const double penetration = l - z;
    const double ground_force = std::max(0.0, kg * penetration - cg * (zd - ld));
    z_acc += (ground_force + u(0)) / mb;
  } else {
    l_acc += u(0) / ml;
  }

  PlantState out;
  out.x.resize(4);
  out.x(1) = ld + spec.dt * l_acc;
  out.x(3) = zd + spec.dt * z_acc;
  out.x(0) = l + spec.dt * out.x(1);
  out.x(2) = z + spec.dt * out.x(3);

  const double foot = out.x(2) - out.x(0);
  out.mode = foot <= 0.0 ? HybridMode::Stance : HybridMode::Flight;
  if (s.mode == HybridMode::Flight && out.mode == HybridMode::Stance) {
    const double foot_speed = out.x(3) - out.x(1);
    if (foot_speed < -td_speed) {
      out.x(1) *= rest;
      out.x(3) *= rest;
    }
  }
  return out;
}

}  // namespace

PlantSpec make_plant_spec(PlantId id) {
  PlantSpec spec;
  spec.id = id;
  spec.dt = 0.02;
  switch (id) {
    case PlantId::Pendulum:
      spec.state_dim = 2;
      spec.control_dim = 1;
      spec.state_layout = {StateRole::JointPosition, StateRole::JointVelocity};
      spec.physical_params = {
          {"gravity", 9.81}, {"length", 1.0}, {"mass", 1.0}, {"damping", 0.1}};
      spec.u_min = Eigen::VectorXd::Constant(1, -12.0);
      spec.u_max = Eigen::VectorXd::Constant(1, 12.0);
      spec.kp = Eigen::VectorXd::Constant(1, 10.0);
      spec.kd = Eigen::VectorXd::Constant(1, 2.0);
      break;
    case PlantId::Cartpole:
      spec.state_dim = 4;
      spec.control_dim = 1;
      spec.state_layout = {StateRole::JointPosition, StateRole::JointVelocity,
                           StateRole::RootHeight, StateRole::RootLinearVelocity};
      spec.physical_params = {{"cart_mass", 1.0},    {"pole_mass", 0.1},
                              {"pole_length", 0.5},  {"gravity", 9.81},
                              {"cart_damping", 0.5}, {"pole_damping", 0.02}};
      spec.u_min = Eigen::VectorXd::Constant(1, -10.0);
      spec.u_max = Eigen::VectorXd::Constant(1, 10.0);
      spec.kp = Eigen::VectorXd::Constant(1, 8.0);
      spec.kd = Eigen::VectorXd::Constant(1, 4.0);
      break;
    case PlantId::Hopper1D:
      spec.state_dim = 4;
      spec.control_dim = 1;
      spec.state_layout = {StateRole::JointPosition, StateRole::JointVelocity,
                           StateRole::RootHeight, StateRole::RootLinearVelocity};
      spec.physical_params = {{"body_mass", 1.0},        {"leg_mass", 0.2},
                              {"gravity", 9.81},         {"leg_rest_length", 0.5},
                              {"leg_stiffness", 60.0},   {"leg_damping", 3.0},
                              {"ground_stiffness", 400.0}, {"ground_damping", 15.0},
                              {"restitution", 0.6},      {"touchdown_speed", 0.05}};
      spec.u_min = Eigen::VectorXd::Constant(1, -25.0);
      spec.u_max = Eigen::VectorXd::Constant(1, 25.0);
      spec.kp = Eigen::VectorXd::Constant(1, 40.0);
      spec.kd = Eigen::VectorXd::Constant(1, 6.0);
      break;
  }
  return spec;
}

PlantState default_state(const PlantSpec& spec) {
  PlantState s;
  s.x = Eigen::VectorXd::Zero(spec.state_dim);
  if (spec.id == PlantId::Hopper1D) {
    const double l0 = param(spec, "leg_rest_length");
    const double sag = param(spec, "body_mass") * param(spec, "gravity") /
                       param(spec, "ground_stiffness");
    s.x(0) = l0;
    s.x(2) = l0 - sag;
    s.mode = HybridMode::Stance;
  }
  return s;
}

RoleSlice role_slice(const PlantSpec& spec, StateRole role) {
  RoleSlice slice;
  bool found = false;
  for (int i = 0; i < static_cast<int>(spec.state_layout.size()); ++i) {
    if (spec.state_layout[i] == role) {
      if (!found) {
        slice.first = i;
        found = true;
      }
      ++slice.count;
    }
  }
  return slice;
}

HybridMode infer_mode(const PlantSpec& spec, const Eigen::VectorXd& x) {
  if (spec.id != PlantId::Hopper1D) return HybridMode::None;
  if (x.size() != spec.state_dim) throw ShapeMismatch("state has wrong dimension");
  return x(2) - x(0) <= 0.0 ? HybridMode::Stance : HybridMode::Flight;
}

PlantState plant_step(const PlantSpec& spec, const PlantState& s, const Eigen::VectorXd& u) {
  if (s.x.size() != spec.state_dim) {
    throw ShapeMismatch("plant state has wrong dimension");
  }
  check_finite(s.x, "input state");
  const Eigen::VectorXd uc = clamp_control(spec, u);
  PlantState out;
  switch (spec.id) {
    case PlantId::Pendulum:
      out = step_pendulum(spec, s, uc);
      break;
    case PlantId::Cartpole:
      out = step_cartpole(spec, s, uc);
      break;
    case PlantId::Hopper1D:
      out = step_hopper(spec, s, uc);
      break;
  }
  check_finite(out.x, "state after step");
  return out;
}

Eigen::VectorXd expert_control(const PlantSpec& spec, const PlantState& s, const Command& cmd) {
  if (cmd.target.size() != spec.control_dim) {
    throw ShapeMismatch("command target has wrong dimension");
  }
  Eigen::VectorXd u(spec.control_dim);
  switch (spec.id) {
    case PlantId::Pendulum:
      u(0) = spec.kp(0) * (cmd.target(0) - s.x(0)) - spec.kd(0) * s.x(1);
      break;
    case PlantId::Cartpole:
      u(0) = spec.kp(0) * (cmd.target(0) - s.x(2)) - spec.kd(0) * s.x(3);
      break;
    case PlantId::Hopper1D: {
      if (s.mode == HybridMode::Stance) {
        // Thrust proportional to the shortfall of the ballistic apex the
        // current state would reach.
        const double g = param(spec, "gravity");
        const double up = std::max(0.0, s.x(3));
        const double apex = s.x(2) + up * up / (2.0 * g);
        u(0) = spec.kp(0) * (cmd.target(0) - apex);
      } else {
        u(0) = -spec.kd(0) * s.x(1);
      }
      break;
    }
  }
  return u.cwiseMax(spec.u_min).cwiseMin(spec.u_max);
}

Trajectory rollout(const PlantSpec& spec, const PlantState& s0,
                   const std::function<Eigen::VectorXd(const PlantState&, int)>& policy,
                   int steps) {
  if (steps < 0) throw BadDims("rollout steps must be >= 0");
  Trajectory traj;
  traj.states.resize(steps + 1, spec.state_dim);
  traj.controls.resize(steps, spec.control_dim);
  traj.modes.reserve(steps + 1);
  PlantState s = s0;
  traj.states.row(0) = s.x.transpose();
  traj.modes.push_back(s.mode);
  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd u = policy(s, t);
    try {
      PlantState next = plant_step(spec, s, u);
      traj.controls.row(t) = u.cwiseMax(spec.u_min).cwiseMin(spec.u_max).transpose();
      traj.states.row(t + 1) = next.x.transpose();
      traj.modes.push_back(next.mode);
      s = next;
      traj.steps = t + 1;
    } catch (const NonFiniteState&) {
      traj.failed = true;
      break;
    }
  }
  traj.states.conservativeResize(traj.steps + 1, Eigen::NoChange);
  traj.controls.conservativeResize(traj.steps, Eigen::NoChange);
  return traj;
}

double pendulum_energy(const PlantSpec& spec, const PlantState& s) {
  const double g = param(spec, "gravity");
  const double l = param(spec, "length");
  const double m = param(spec, "mass");
  return 0.5 * m * l * l * s.x(1) * s.x(1) + m * g * l * (1.0 - std::cos(s.x(0)));
}

}  // namespace ikd
