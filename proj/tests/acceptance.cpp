// End-to-end release checks. Each check prints one [PASS]/[FAIL] line with
// the measured quantities; the process exits with the number of failures.
// Budgets are wall-clock seconds measured around the check body.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ikd/cli.hpp"
#include "ikd/config.hpp"
#include "ikd/dataset.hpp"
#include "ikd/embedding.hpp"
#include "ikd/errors.hpp"
#include "ikd/incremental.hpp"
#include "ikd/io.hpp"
#include "ikd/koopman.hpp"
#include "ikd/metrics.hpp"
#include "ikd/mpc.hpp"
#include "ikd/plants.hpp"
#include "ikd/theory.hpp"

using namespace ikd;

namespace {

int failures = 0;

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void report(int index, const char* name, bool ok, const std::string& detail, double secs,
            double budget) {
  const bool in_budget = budget <= 0.0 || secs < budget;
  const bool pass = ok && in_budget;
  if (!pass) ++failures;
  std::printf("[%s] %2d %-34s %s", pass ? "PASS" : "FAIL", index, name, detail.c_str());
  if (budget > 0.0) {
    std::printf(" (%.1fs / %.0fs)", secs, budget);
    if (!in_budget) std::printf(" OVER BUDGET");
  } else {
    std::printf(" (%.1fs)", secs);
  }
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

void check_edmd_recovery() {
  const double t0 = now();
  const int n = 16, m = 10 * n;
  std::mt19937_64 rng(71);
  std::normal_distribution<double> dist(0.0, 1.0);
  const Eigen::MatrixXd truth =
      Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return dist(rng); });
  const Eigen::MatrixXd z = Eigen::MatrixXd::NullaryExpr(m, n, [&]() { return dist(rng); });
  const Eigen::MatrixXd zp = z * truth.transpose();

  const EdmdResult res = edmd_fit(z, zp, 0.0);
  const double k_err = (res.K - truth).norm();
  const Eigen::MatrixXd normal_resid = (zp - z * res.K.transpose()).transpose() * z / m;
  const double r_err = normal_resid.norm();
  report(1, "edmd recovers the exact operator",
         k_err < 1e-8 && r_err < 1e-8,
         fmt("|K-M|_F=%.2e normal_resid=%.2e", k_err, r_err), now() - t0, 1.0);
}

void check_qp_solver() {
  const double t0 = now();
  std::mt19937_64 rng(72);
  std::normal_distribution<double> dist(0.0, 1.0);
  double worst_gap = 0.0, worst_kkt = 0.0;
  bool ok = true;
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + i % 4;
    BoxQp qp;
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::NullaryExpr(d, d, [&]() { return dist(rng); });
    qp.P = a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(d, d);
    qp.q = Eigen::VectorXd::NullaryExpr(d, [&]() { return 2.0 * dist(rng); });
    qp.lo.resize(d);
    qp.hi.resize(d);
    for (int j = 0; j < d; ++j) {
      const double u = dist(rng), v = dist(rng);
      qp.lo(j) = std::min(u, v) - 0.05;
      qp.hi(j) = std::max(u, v) + 0.05;
    }
    const QpResult res = solve_box_qp(qp, AdmmConfig{});
    const Eigen::VectorXd ref = qp_solve_reference(qp);
    const double gap = (res.u - ref).cwiseAbs().maxCoeff();
    const double kkt = kkt_violation(qp, res.u);
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, kkt);
    ok = ok && gap < 1e-6 && kkt < 1e-6;
  }
  report(2, "admm matches the active-set oracle", ok,
         fmt("200 instances, worst |du|=%.2e worst kkt=%.2e", worst_gap, worst_kkt),
         now() - t0, 10.0);
}

KoopmanModel random_tiny_model(int state_dim, int lift_dim, int blocks, std::uint64_t seed,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 0.3);
  KoopmanModel model;
  model.net = init_net(state_dim, lift_dim, 4, blocks, seed);
  Eigen::VectorXd flat = net_to_flat(model.net);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) += 0.1 * dist(rng);
  net_from_flat(model.net, flat);
  model.A = Eigen::MatrixXd::NullaryExpr(lift_dim, lift_dim, [&]() { return dist(rng); });
  model.B = Eigen::MatrixXd::NullaryExpr(lift_dim, 1, [&]() { return dist(rng); });
  model.normalizer.mean =
      Eigen::VectorXd::NullaryExpr(state_dim, [&]() { return dist(rng); });
  model.normalizer.std =
      Eigen::VectorXd::Constant(state_dim, 1.0) +
      Eigen::VectorXd::NullaryExpr(state_dim, [&]() { return std::abs(dist(rng)); });
  return model;
}

void check_loss_gradients() {
  const double t0 = now();
  std::mt19937_64 rng(1606);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double eps = 1e-6;
  int trials = 0;
  double worst = 0.0;
  bool ok = true;
  for (int np = 1; np <= 3; ++np) {
    for (int extra : {0, 1, 3}) {
      for (int blocks : {0, 1, 2}) {
        const int lift = np + extra;
        const int H = 1 + trials % 4;
        KoopmanModel model = random_tiny_model(np, lift, blocks, 4900 + trials, rng);
        Segment seg;
        seg.states = Eigen::MatrixXd::NullaryExpr(H + 1, np, [&]() { return dist(rng); });
        seg.controls = Eigen::MatrixXd::NullaryExpr(H, 1, [&]() { return dist(rng); });

        KoopmanGrads grads = KoopmanGrads::zeros_like(model);
        koopman_loss_grad(model, seg, LossConfig{}, grads);
        const Eigen::VectorXd g = koopman_grads_to_flat(grads);
        const Eigen::VectorXd params = model_params_to_flat(model);
        const Eigen::VectorXd w =
            Eigen::VectorXd::NullaryExpr(params.size(), [&]() { return dist(rng); });

        KoopmanModel bumped = model;
        model_params_from_flat(bumped, params + eps * w);
        const double plus = koopman_loss(bumped, seg, LossConfig{}).total;
        model_params_from_flat(bumped, params - eps * w);
        const double minus = koopman_loss(bumped, seg, LossConfig{}).total;
        const double fd = (plus - minus) / (2.0 * eps);
        const double analytic = g.dot(w);
        const double rel =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
        worst = std::max(worst, rel);
        ok = ok && rel < 1e-4;
        ++trials;
      }
    }
  }
  report(3, "gradients match finite differences", ok && trials >= 20,
         fmt("%d instances, worst rel err=%.2e", trials, worst), now() - t0, 0.0);
}

void check_loss_hand_value() {
  const double t0 = now();
  KoopmanModel model;
  model.net = init_net(1, 1, 4, 0, 0);
  model.A = Eigen::MatrixXd::Identity(1, 1);
  model.B = Eigen::MatrixXd::Identity(1, 1);
  model.normalizer = Normalizer::identity(1);
  Segment seg;
  seg.states.resize(2, 1);
  seg.states << 0.0, 2.0;
  seg.controls = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const LossBreakdown loss = koopman_loss(model, seg, LossConfig{});
  report(4, "one-step loss equals the hand value", std::abs(loss.total - 1.089) < 1e-12,
         fmt("total=%.15f expected 1.089", loss.total), now() - t0, 0.0);
}

void check_sampling_rate() {
  const double t0 = now();
  const SamplingResult res = sampling_experiment(SamplingConfig{});
  const bool ok = res.fit.slope > -0.65 && res.fit.slope < -0.35;
  report(5, "sampling error rate near 1/sqrt(m)", ok,
         fmt("slope=%.4f in [-0.65,-0.35], r2=%.4f, bound holds %.0f%%", res.fit.slope,
             res.fit.r2, 100.0 * res.bound_hold_fraction),
         now() - t0, 120.0);
}

void check_projection_rate() {
  const double t0 = now();
  const ProjectionResult res = projection_experiment(ProjectionConfig{});
  bool monotone = true;
  for (size_t i = 1; i < res.errors.size(); ++i) {
    monotone = monotone && res.errors[i] <= res.errors[i - 1];
  }
  const bool ok = monotone && res.fit.slope > -0.8 && res.fit.slope < -0.3;
  report(6, "truncation error rate near 1/sqrt(n)", ok,
         fmt("slope=%.4f in [-0.8,-0.3], monotone=%s", res.fit.slope,
             monotone ? "yes" : "no"),
         now() - t0, 60.0);
}

/// The pendulum study behind checks 7 and 8: a model bootstrapped from
/// small-angle data must learn to track aggressive swing references, and the
/// two growth mechanisms are ablated one at a time.
void check_tracking_and_ablations() {
  const double t0 = now();
  const PlantSpec spec = make_plant_spec(PlantId::Pendulum);

  CollectOptions narrow = default_collect_options(spec);
  narrow.target_lo.setConstant(-0.2);
  narrow.target_hi.setConstant(0.2);
  narrow.init_lo *= 0.3;
  narrow.init_hi *= 0.3;
  CollectOptions wide = default_collect_options(spec);
  wide.target_lo.setConstant(-2.8);
  wide.target_hi.setConstant(2.8);
  wide.duration_lo = 40;
  wide.duration_hi = 80;

  const Dataset ds0 = collect_initial_dataset(spec, narrow, 100, 60, 15, 101);
  const ReferenceRepository train_repo = make_reference_repo(spec, wide, 40, 200, 0.02, 201);
  const ReferenceRepository eval_repo = make_reference_repo(spec, wide, 100, 200, 0.02, 301);
  const ReferenceRepository pred_repo = make_reference_repo(spec, wide, 100, 200, 0.02, 501);

  IncrementalConfig ic;
  ic.iterations = 4;
  ic.n0 = 4;
  ic.delta_n = 6;
  ic.harvest = true;
  ic.train.epochs = 300;
  ic.train.seed = 11;
  ic.mpc = make_mpc_config(spec, 15);
  ic.track.t_max = 200;
  ic.track.eps_fail = 0.3;

  TrainConfig probe_tc = ic.train;
  const TrainReport probe = train_koopman(ds0, ic.n0, probe_tc);
  const RepoTrackResult probe_res =
      track_repo(spec, probe.model, ic.mpc, ic.track, pred_repo, ExecMode::Serial);
  const std::vector<Segment> eval_segs =
      collect_failures(probe_res.outcomes, ds0.seg_len, 0);

  const IncrementalResult full =
      incremental_run(spec, ds0, train_repo, eval_repo, ic, ExecMode::Serial);
  const RepoTrackResult full_eval =
      track_repo(spec, full.best_model, ic.mpc, ic.track, eval_repo, ExecMode::Serial);
  int good = 0;
  for (size_t i = 0; i < full_eval.outcomes.size(); ++i) {
    const bool survived =
        !full_eval.outcomes[i].failed && full_eval.outcomes[i].t_sur == ic.track.t_max;
    const bool tight = full_eval.metrics[i].joint_position_error &&
                       *full_eval.metrics[i].joint_position_error < ic.track.eps_fail;
    if (survived && tight) ++good;
  }
  const double t7 = now();
  report(7, "converged model tracks held-out refs",
         full.converged && good >= 80,
         fmt("%d/100 runs reach t=200 under the error gate, converged=%s", good,
             full.converged ? "yes" : "no"),
         t7 - t0, 600.0);

  IncrementalConfig no_data = ic;
  no_data.harvest = false;
  const IncrementalResult nd =
      incremental_run(spec, ds0, train_repo, eval_repo, no_data, ExecMode::Serial);
  const RepoTrackResult nd_eval =
      track_repo(spec, nd.best_model, ic.mpc, ic.track, eval_repo, ExecMode::Serial);

  IncrementalConfig no_dim = ic;
  no_dim.delta_n = 0;
  const IncrementalResult nm =
      incremental_run(spec, ds0, train_repo, eval_repo, no_dim, ExecMode::Serial);
  const RepoTrackResult nm_eval =
      track_repo(spec, nm.best_model, ic.mpc, ic.track, eval_repo, ExecMode::Serial);

  const double ep_full = k_step_prediction_error(full.best_model, eval_segs, 15);
  const double ep_nd = k_step_prediction_error(nd.best_model, eval_segs, 15);
  const bool survival_ok = full_eval.mean_t_sur >= nd_eval.mean_t_sur &&
                           full_eval.mean_t_sur >= nm_eval.mean_t_sur;
  const bool pred_ok = ep_full <= 0.8 * ep_nd;
  report(8, "both growth mechanisms pay off",
         full.records.size() >= 2 && survival_ok && pred_ok,
         fmt("t_sur %.1f vs no-data %.1f / no-dim %.1f; 15-step err %.3f vs %.3f",
             full_eval.mean_t_sur, nd_eval.mean_t_sur, nm_eval.mean_t_sur, ep_full, ep_nd),
         now() - t0, 1200.0);
}

RunConfig determinism_config(const std::string& dir) {
  return parse_config(R"({
    "data": {"n_traj": 20, "l_init": 60, "l_seg": 15, "repo_size": 6, "ref_length": 40,
             "noise_halfwidth": 0.01, "seed": 1, "repo_seed": 2},
    "train": {"lift": 8, "epochs": 20, "hidden": 24, "blocks": 1},
    "mpc": {"horizon": 15, "t_max": 40, "eps_fail": 0.7},
    "incremental": {"iterations": 2, "n0": 8, "delta_n": 4},
    "theory": {"sampling_features": 48, "sampling_observed": 12,
               "sample_counts": [400, 1600, 6400], "trials": 3, "sampling_nodes": 256,
               "projection_features": 128, "projection_dims": [4, 8, 16, 32],
               "projection_nodes": 512}
  })",
                      {"out_dir=" + dir});
}

std::map<std::string, std::string> snapshot_outputs(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel =
        std::filesystem::relative(entry.path(), dir).generic_string();
    if (rel == "timing.json") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[rel] = ss.str();
  }
  return files;
}

void check_cli_determinism() {
  const double t0 = now();
  const std::string dir = "/tmp/ikd_acceptance_cli";
  std::filesystem::remove_all(dir);
  const RunConfig cfg = determinism_config(dir);
  const std::vector<std::string> commands = {"generate-data", "train",
                                             "predict-eval",  "track",
                                             "incremental-run", "theory-validate"};
  std::ostringstream sink;
  bool rc_ok = true;
  for (const std::string& cmd : commands) {
    rc_ok = rc_ok && run_command(cmd, cfg, ExecMode::Serial, sink, sink) == 0;
  }
  const std::map<std::string, std::string> first = snapshot_outputs(dir);
  for (const std::string& cmd : commands) {
    rc_ok = rc_ok && run_command(cmd, cfg, ExecMode::Serial, sink, sink) == 0;
  }
  const std::map<std::string, std::string> second = snapshot_outputs(dir);
  int differing = 0;
  for (const auto& [rel, bytes] : first) {
    const auto it = second.find(rel);
    if (it == second.end() || it->second != bytes) ++differing;
  }
  const bool same_set = first.size() == second.size();
  report(9, "cli reruns are byte-identical", rc_ok && same_set && differing == 0,
         fmt("%zu artifacts compared, %d differ, commands ok=%s", first.size(), differing,
             rc_ok ? "yes" : "no"),
         now() - t0, 0.0);
  std::filesystem::remove_all(dir);
}

void check_persistence() {
  const double t0 = now();
  const std::string dir = "/tmp/ikd_acceptance_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const PlantSpec spec = make_plant_spec(PlantId::Pendulum);

  Dataset ds = collect_initial_dataset(spec, default_collect_options(spec), 10, 30, 10, 7);
  ds.segments[1].provenance = Provenance::Incremental;
  ds.segments[1].iteration = 3;
  const std::string ds_path = dir + "/roundtrip.ikds";
  save_dataset(ds, ds_path);
  const Dataset ds2 = load_dataset(ds_path);
  bool ds_ok = ds2.state_dim == ds.state_dim && ds2.control_dim == ds.control_dim &&
               ds2.seg_len == ds.seg_len && ds2.segments.size() == ds.segments.size() &&
               ds2.normalizer.mean == ds.normalizer.mean &&
               ds2.normalizer.std == ds.normalizer.std;
  for (size_t i = 0; ds_ok && i < ds.segments.size(); ++i) {
    ds_ok = ds2.segments[i].states == ds.segments[i].states &&
            ds2.segments[i].controls == ds.segments[i].controls &&
            ds2.segments[i].provenance == ds.segments[i].provenance &&
            ds2.segments[i].iteration == ds.segments[i].iteration;
  }

  std::mt19937_64 rng(303);
  const KoopmanModel model = random_tiny_model(2, 6, 2, 5, rng);
  const std::string model_path = dir + "/roundtrip.ikpm";
  save_model(model, model_path);
  const KoopmanModel model2 = load_model(model_path);
  const bool model_ok = net_to_flat(model2.net) == net_to_flat(model.net) &&
                        model2.A == model.A && model2.B == model.B &&
                        model2.normalizer.mean == model.normalizer.mean &&
                        model2.normalizer.std == model.normalizer.std;

  int detected = 0;
  for (const std::string& path : {ds_path, model_path}) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    bytes[bytes.size() / 2] ^= 0x40;
    const std::string bad = path + ".bad";
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    try {
      if (path == ds_path) {
        load_dataset(bad);
      } else {
        load_model(bad);
      }
    } catch (const FormatError&) {
      ++detected;
    }
  }
  report(10, "files roundtrip and reject corruption", ds_ok && model_ok && detected == 2,
         fmt("dataset=%s model=%s corrupt files detected %d/2", ds_ok ? "exact" : "DIFFERS",
             model_ok ? "exact" : "DIFFERS", detected),
         now() - t0, 0.0);
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  check_edmd_recovery();
  check_qp_solver();
  check_loss_gradients();
  check_loss_hand_value();
  check_sampling_rate();
  check_projection_rate();
  check_tracking_and_ablations();
  check_cli_determinism();
  check_persistence();
  std::printf("%s: %d failure%s\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures,
              failures == 1 ? "" : "s");
  return failures;
}
