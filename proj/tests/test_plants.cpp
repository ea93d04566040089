#include "ikd/plants.hpp"

#include <cmath>

#include "doctest.h"
#include "ikd/errors.hpp"

using namespace ikd;

TEST_CASE("pendulum step matches hand-computed semi-implicit update") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  PlantState s;
  s.x = Eigen::Vector2d(M_PI / 2.0, 0.0);
  PlantState next = plant_step(spec, s, Eigen::VectorXd::Zero(1));
  // acc = -9.81, so thetadot' = -0.19620 and theta' = pi/2 + 0.02 * thetadot'.
  CHECK(next.x(1) == doctest::Approx(-0.19620).epsilon(1e-12));
  CHECK(next.x(0) == doctest::Approx(1.5668723).epsilon(1e-7));
}

TEST_CASE("upright pendulum is an unforced equilibrium") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  PlantState s;
  s.x = Eigen::Vector2d(M_PI, 0.0);
  PlantState next = plant_step(spec, s, Eigen::VectorXd::Zero(1));
  CHECK(std::abs(next.x(0) - M_PI) < 1e-12);
  CHECK(std::abs(next.x(1)) < 1e-12);
}

TEST_CASE("unforced damped pendulum never gains energy") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  for (double theta0 : {0.2, 1.0, 2.5, -1.7}) {
    for (double omega0 : {0.0, 1.5, -3.0}) {
      PlantState s;
      s.x = Eigen::Vector2d(theta0, omega0);
      double energy = pendulum_energy(spec, s);
      for (int t = 0; t < 500; ++t) {
        s = plant_step(spec, s, u0);
        const double next_energy = pendulum_energy(spec, s);
        CHECK(next_energy <= energy + 1e-9);
        energy = next_energy;
      }
    }
  }
}

TEST_CASE("control saturation: huge commands act like the bound") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  PlantState s;
  s.x = Eigen::Vector2d(0.4, -0.2);
  PlantState a = plant_step(spec, s, Eigen::VectorXd::Constant(1, 1e6));
  PlantState b = plant_step(spec, s, spec.u_max);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expert control is the PD law on the commanded quantity") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  spec.kp(0) = 5.0;
  spec.kd(0) = 2.0;
  Command cmd;
  cmd.target = Eigen::VectorXd::Constant(1, 1.0);
  cmd.duration = 10;
  PlantState s;
  s.x = Eigen::Vector2d::Zero();
  CHECK(expert_control(spec, s, cmd)(0) == doctest::Approx(5.0).epsilon(1e-15));

  s.x = Eigen::Vector2d(1.0, 0.0);  // exactly at the target, at rest
  CHECK(expert_control(spec, s, cmd)(0) == 0.0);
}

TEST_CASE("hopper dropped from a height goes through flight then stance") {
  PlantSpec spec = make_plant_spec(PlantId::Hopper1D);
  PlantState s;
  s.x = Eigen::Vector4d(0.5, 0.0, 1.0, 0.0);
  s.mode = HybridMode::Flight;
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  bool saw_flight = false;
  bool saw_stance_after_flight = false;
  for (int t = 0; t < 200; ++t) {
    s = plant_step(spec, s, u0);
    // The mode flag must agree with the sign test on the foot height.
    const double foot = s.x(2) - s.x(0);
    CHECK((s.mode == HybridMode::Stance) == (foot <= 0.0));
    if (s.mode == HybridMode::Flight) saw_flight = true;
    if (saw_flight && s.mode == HybridMode::Stance) saw_stance_after_flight = true;
  }
  CHECK(saw_flight);
  CHECK(saw_stance_after_flight);
}

TEST_CASE("hopper rest state is a fixed point of the unforced dynamics") {
  PlantSpec spec = make_plant_spec(PlantId::Hopper1D);
  PlantState s = default_state(spec);
  PlantState next = plant_step(spec, s, Eigen::VectorXd::Zero(1));
  CHECK((next.x - s.x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(next.mode == HybridMode::Stance);
}

TEST_CASE("cartpole swings and damps out around the hanging pole") {
  PlantSpec spec = make_plant_spec(PlantId::Cartpole);
  PlantState s = default_state(spec);
  s.x(0) = 0.3;
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  double early_env = 0.0, late_env = 0.0;
  for (int t = 1; t <= 3000; ++t) {
    s = plant_step(spec, s, u0);
    const double angle = std::abs(s.x(0));
    if (t <= 250) early_env = std::max(early_env, angle);
    if (t > 2750) late_env = std::max(late_env, angle);
  }
  CHECK(early_env < 0.4);
  CHECK(late_env < early_env / 3.0);  // oscillation envelope decays
}

TEST_CASE("rollout of a fixed control sequence composes") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  PlantState s0;
  s0.x = Eigen::Vector2d(0.5, -0.5);
  Eigen::MatrixXd controls(17, 1);
  for (int t = 0; t < 17; ++t) controls(t, 0) = std::sin(0.3 * t);
  auto policy = [&](const PlantState&, int t) { return controls.row(t).transpose().eval(); };

  Trajectory full = rollout(spec, s0, policy, 17);
  Trajectory first = rollout(spec, s0, policy, 10);
  PlantState mid;
  mid.x = first.states.row(10).transpose();
  auto tail_policy = [&](const PlantState&, int t) {
    return controls.row(10 + t).transpose().eval();
  };
  Trajectory second = rollout(spec, mid, tail_policy, 7);

  CHECK(full.steps == 17);
  CHECK((full.states.topRows(11) - first.states).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((full.states.bottomRows(8) - second.states).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rollout records a non-finite abort instead of throwing") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  PlantState bad;
  bad.x = Eigen::Vector2d(std::nan(""), 0.0);
  Trajectory traj = rollout(
      spec, bad, [&](const PlantState&, int) { return Eigen::VectorXd::Zero(1); }, 5);
  CHECK(traj.failed);
  CHECK(traj.steps == 0);
  CHECK(traj.states.rows() == 1);
}

TEST_CASE("role slices index contiguous layout blocks") {
  PlantSpec pend = make_plant_spec(PlantId::Pendulum);
  CHECK(role_slice(pend, StateRole::JointPosition).first == 0);
  CHECK(role_slice(pend, StateRole::JointPosition).count == 1);
  CHECK(role_slice(pend, StateRole::RootHeight).count == 0);

  PlantSpec hop = make_plant_spec(PlantId::Hopper1D);
  RoleSlice rh = role_slice(hop, StateRole::RootHeight);
  CHECK(rh.first == 2);
  CHECK(rh.count == 1);
}
