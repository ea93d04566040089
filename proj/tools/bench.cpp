#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ikd/dataset.hpp"
#include "ikd/incremental.hpp"
#include "ikd/koopman.hpp"
#include "ikd/parallel.hpp"
#include "ikd/plants.hpp"
#include "ikd/theory.hpp"

using namespace ikd;

namespace {

double time_call(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double> d = std::chrono::steady_clock::now() - t0;
  return d.count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-24s %9.3f s %9.3f s %7.2fx   %s\n", name, serial_s, parallel_s,
              parallel_s > 0 ? serial_s / parallel_s : 0.0, identical ? "yes" : "NO");
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

int main() {
  const PlantSpec spec = make_plant_spec(PlantId::Pendulum);
  const CollectOptions opts = default_collect_options(spec);
  std::printf("%-24s %11s %11s %9s   %s\n", "kernel", "serial", "parallel", "speedup",
              "identical");

  Dataset ds_serial, ds_parallel;
  const double col_s = time_call(
      [&] { ds_serial = collect_initial_dataset(spec, opts, 96, 60, 15, 7, ExecMode::Serial); });
  const double col_p = time_call([&] {
    ds_parallel = collect_initial_dataset(spec, opts, 96, 60, 15, 7, ExecMode::Parallel);
  });
  bool col_eq = ds_serial.segments.size() == ds_parallel.segments.size();
  for (std::size_t i = 0; col_eq && i < ds_serial.segments.size(); ++i) {
    col_eq = same(ds_serial.segments[i].states, ds_parallel.segments[i].states) &&
             same(ds_serial.segments[i].controls, ds_parallel.segments[i].controls);
  }
  report("dataset collection", col_s, col_p, col_eq);

  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 3;
  const KoopmanModel model = train_koopman(ds_serial, 12, tc).model;
  std::vector<const Segment*> batch;
  for (const Segment& s : ds_serial.segments) batch.push_back(&s);
  const LossConfig lc;
  KoopmanGrads gs, gp;
  double grad_s = 0.0, grad_p = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    grad_s += time_call([&] { batch_loss_grad(model, batch, lc, gs, ExecMode::Serial); });
    grad_p += time_call([&] { batch_loss_grad(model, batch, lc, gp, ExecMode::Parallel); });
  }
  report("batch loss gradient", grad_s, grad_p,
         koopman_grads_to_flat(gs) == koopman_grads_to_flat(gp));

  const ReferenceRepository repo = make_reference_repo(spec, opts, 16, 80, 0.01, 11);
  MpcConfig mc;
  mc.horizon = ds_serial.seg_len;
  mc.u_min = spec.u_min;
  mc.u_max = spec.u_max;
  TrackOptions topt;
  topt.t_max = 80;
  RepoTrackResult tr_s, tr_p;
  const double trk_s = time_call(
      [&] { tr_s = track_repo(spec, model, mc, topt, repo, ExecMode::Serial); });
  const double trk_p = time_call(
      [&] { tr_p = track_repo(spec, model, mc, topt, repo, ExecMode::Parallel); });
  bool trk_eq = tr_s.outcomes.size() == tr_p.outcomes.size();
  for (std::size_t i = 0; trk_eq && i < tr_s.outcomes.size(); ++i) {
    trk_eq = tr_s.outcomes[i].t_sur == tr_p.outcomes[i].t_sur &&
             same(tr_s.outcomes[i].traj.states, tr_p.outcomes[i].traj.states);
  }
  report("repo tracking", trk_s, trk_p, trk_eq);

  SamplingConfig sc;
  sc.features = 128;
  sc.observed = 16;
  sc.sample_counts = {2000, 8000};
  sc.trials = 4;
  sc.nodes = 1024;
  SamplingResult th_s, th_p;
  sc.mode = ExecMode::Serial;
  const double smp_s = time_call([&] { th_s = sampling_experiment(sc); });
  sc.mode = ExecMode::Parallel;
  const double smp_p = time_call([&] { th_p = sampling_experiment(sc); });
  report("sampling experiment", smp_s, smp_p,
         th_s.mean_errors == th_p.mean_errors && th_s.trial_errors == th_p.trial_errors);

  std::printf("threads: %d\n", effective_threads());
  return 0;
}
