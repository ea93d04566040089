#include "ikd/dataset.hpp"

#include <random>

#include "doctest.h"
#include "ikd/errors.hpp"

using namespace ikd;

TEST_CASE("normalizer uses population statistics") {
  Eigen::MatrixXd states(2, 1);
  states << 0.0, 2.0;
  Normalizer n = fit_normalizer(states);
  CHECK(n.mean(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n.std(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("constant columns hit the std floor and are reported") {
  Eigen::MatrixXd states(5, 2);
  for (int r = 0; r < 5; ++r) {
    states(r, 0) = 3.0;
    states(r, 1) = r;
  }
  std::vector<int> degenerate;
  Normalizer n = fit_normalizer(states, &degenerate);
  CHECK(n.std(0) == 1e-8);
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 0);
  CHECK(n.std(1) > 1.0);
}

TEST_CASE("normalizer invert undoes apply to 1e-12") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(0.4, 2.5);
  Eigen::MatrixXd states(50, 3);
  for (int r = 0; r < 50; ++r) {
    for (int c = 0; c < 3; ++c) states(r, c) = dist(rng);
  }
  Normalizer n = fit_normalizer(states);
  for (int r = 0; r < 50; ++r) {
    Eigen::VectorXd x = states.row(r).transpose();
    CHECK((n.invert(n.apply(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::MatrixXd round = n.invert_rows(n.apply_rows(states));
  CHECK((round - states).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("initial dataset collection is deterministic and well shaped") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  CollectOptions opts = default_collect_options(spec);
  Dataset a = collect_initial_dataset(spec, opts, 8, 100, 16, 42);
  Dataset b = collect_initial_dataset(spec, opts, 8, 100, 16, 42);
  Dataset c = collect_initial_dataset(spec, opts, 8, 100, 16, 43);

  CHECK(a.segments.size() == 8);
  CHECK(a.seg_len == 16);
  for (const Segment& seg : a.segments) {
    CHECK(seg.states.rows() == 17);
    CHECK(seg.states.cols() == 2);
    CHECK(seg.controls.rows() == 16);
    CHECK(seg.controls.cols() == 1);
    CHECK(seg.provenance == Provenance::Initial);
    CHECK(seg.states.allFinite());
  }
  bool identical = true;
  bool differs = false;
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    if ((a.segments[i].states - b.segments[i].states).cwiseAbs().maxCoeff() != 0.0) {
      identical = false;
    }
    if ((a.segments[i].states - c.segments[i].states).cwiseAbs().maxCoeff() != 0.0) {
      differs = true;
    }
  }
  CHECK(identical);
  CHECK(differs);
  validate_dataset(a);
}

TEST_CASE("collected controls stay inside the plant bounds") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  CollectOptions opts = default_collect_options(spec);
  Dataset ds = collect_initial_dataset(spec, opts, 6, 60, 16, 5);
  for (const Segment& seg : ds.segments) {
    CHECK(seg.controls.minCoeff() >= spec.u_min(0));
    CHECK(seg.controls.maxCoeff() <= spec.u_max(0));
  }
}

TEST_CASE("merge concatenates, preserves provenance, and refits the normalizer") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  CollectOptions opts = default_collect_options(spec);
  Dataset a = collect_initial_dataset(spec, opts, 5, 60, 16, 1);
  Dataset b = collect_initial_dataset(spec, opts, 3, 60, 16, 2);
  for (Segment& seg : b.segments) {
    seg.provenance = Provenance::Incremental;
    seg.iteration = 4;
  }
  Dataset merged = merge_datasets(a, b);
  CHECK(merged.segments.size() == 8);
  CHECK(merged.segments[0].provenance == Provenance::Initial);
  CHECK(merged.segments[5].provenance == Provenance::Incremental);
  CHECK(merged.segments[5].iteration == 4);

  Eigen::MatrixXd all(8 * 17, 2);
  for (int i = 0; i < 8; ++i) all.middleRows(i * 17, 17) = merged.segments[i].states;
  Normalizer expect = fit_normalizer(all);
  CHECK((merged.normalizer.mean - expect.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((merged.normalizer.std - expect.std).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("merge rejects mismatched dims and segment lengths") {
  PlantSpec pend = make_plant_spec(PlantId::Pendulum);
  PlantSpec cart = make_plant_spec(PlantId::Cartpole);
  Dataset a = collect_initial_dataset(pend, default_collect_options(pend), 2, 40, 16, 1);
  Dataset b = collect_initial_dataset(cart, default_collect_options(cart), 2, 40, 16, 1);
  CHECK_THROWS_AS(merge_datasets(a, b), ShapeMismatch);
  Dataset c = collect_initial_dataset(pend, default_collect_options(pend), 2, 40, 8, 1);
  CHECK_THROWS_AS(merge_datasets(a, c), ShapeMismatch);
}

TEST_CASE("reference repo without noise equals the normalized clean rollouts") {
  PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  CollectOptions opts = default_collect_options(spec);
  ReferenceRepository clean = make_reference_repo(spec, opts, 4, 80, 0.0, 11);
  ReferenceRepository noisy = make_reference_repo(spec, opts, 4, 80, 0.05, 11);

  REQUIRE(clean.references.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(clean.references[i].rows() == 80);
    const double max_dev =
        (noisy.references[i] - clean.references[i]).cwiseAbs().maxCoeff();
    CHECK(max_dev <= 0.05);
    CHECK(max_dev > 0.0);
  }

  ReferenceRepository again = make_reference_repo(spec, opts, 4, 80, 0.05, 11);
  for (int i = 0; i < 4; ++i) {
    CHECK((again.references[i] - noisy.references[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  // Round-tripping a normalized reference through the repo normalizer
  // reproduces plant-unit states.
  Eigen::MatrixXd plant_units = clean.normalizer.invert_rows(clean.references[0]);
  CHECK(plant_units.allFinite());
}

TEST_CASE("failure segment takes the window that ends at the failure step") {
  Trajectory traj;
  traj.steps = 20;
  traj.states.resize(21, 1);
  traj.controls.resize(20, 1);
  for (int t = 0; t <= 20; ++t) traj.states(t, 0) = t;
  for (int t = 0; t < 20; ++t) traj.controls(t, 0) = 100 + t;

  Segment seg = failure_segment(traj, 18, 16, 3);
  CHECK(seg.states(0, 0) == 2.0);
  CHECK(seg.states(16, 0) == 18.0);
  CHECK(seg.controls(0, 0) == 102.0);
  CHECK(seg.controls(15, 0) == 117.0);
  CHECK(seg.provenance == Provenance::Incremental);
  CHECK(seg.iteration == 3);

  CHECK_THROWS_AS(failure_segment(traj, 3, 16, 0), BadDims);
}
