#include "ikd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "ikd/errors.hpp"
#include "ikd/incremental.hpp"
#include "ikd/io.hpp"
#include "ikd/metrics.hpp"
#include "ikd/theory.hpp"
#include "json.hpp"

namespace ikd {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kSamplingSlopeLo = -0.65;
constexpr double kSamplingSlopeHi = -0.35;
constexpr double kBoundHoldMin = 0.95;
constexpr double kProjectionSlopeLo = -0.8;
constexpr double kProjectionSlopeHi = -0.3;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  if (!f.good()) throw IoError("write failed for " + path);
}

void write_json(const std::string& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return dir + "/" + name;
}

Json metric_mean(const std::vector<TrackingMetrics>& ms,
                 std::optional<double> TrackingMetrics::* field) {
  double sum = 0.0;
  int count = 0;
  for (const TrackingMetrics& m : ms) {
    const std::optional<double>& v = m.*field;
    if (v) {
      sum += *v;
      ++count;
    }
  }
  return count > 0 ? Json(sum / count) : Json(nullptr);
}

int cmd_generate_data(const RunConfig& cfg, ExecMode mode, std::ostream& out) {
  const PlantSpec spec = resolve_plant(cfg);
  const CollectOptions opts = default_collect_options(spec);

  const Dataset ds = collect_initial_dataset(spec, opts, cfg.data.n_traj, cfg.data.l_init,
                                             cfg.data.l_seg, cfg.data.seed, mode);
  save_dataset(ds, join_path(cfg.out_dir, "dataset.ikds"));
  out << "dataset: " << ds.segments.size() << " segments of length " << ds.seg_len << "\n";

  const ReferenceRepository train_repo =
      make_reference_repo(spec, opts, cfg.data.repo_size, cfg.data.ref_length,
                          cfg.data.noise_halfwidth, cfg.data.repo_seed);
  save_repo(train_repo, join_path(cfg.out_dir, "repo_train.ikrr"));
  const ReferenceRepository eval_repo =
      make_reference_repo(spec, opts, cfg.data.repo_size, cfg.data.ref_length,
                          cfg.data.noise_halfwidth, cfg.data.repo_seed + 1);
  save_repo(eval_repo, join_path(cfg.out_dir, "repo_eval.ikrr"));
  out << "repos: " << train_repo.references.size() << " train + "
      << eval_repo.references.size() << " eval references of length "
      << cfg.data.ref_length << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, ExecMode mode, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(join_path(cfg.out_dir, "dataset.ikds"));
  const TrainConfig tc = to_train_config(cfg, mode);
  const TrainReport rep = train_koopman(ds, cfg.train.lift, tc);

  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < rep.epoch_losses.size(); ++e) {
    csv << e << "," << fmt(rep.epoch_losses[e]) << "\n";
  }
  write_text(join_path(cfg.out_dir, "train_loss.csv"), csv.str());

  if (rep.failed) {
    err << "training failed: " << rep.fail_reason << "\n";
    return 1;
  }
  save_model(rep.model, join_path(cfg.out_dir, "model.ikpm"));
  out << "trained lift " << cfg.train.lift << " for " << rep.epoch_losses.size()
      << " epochs, final loss " << fmt(rep.epoch_losses.back()) << "\n";
  return 0;
}

int cmd_predict_eval(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = load_dataset(join_path(cfg.out_dir, "dataset.ikds"));
  const KoopmanModel model = load_model(join_path(cfg.out_dir, "model.ikpm"));
  const PredictionCurve curve = prediction_curve(model, ds.segments);

  std::ostringstream csv;
  csv << "k,error\n";
  for (std::size_t i = 0; i < curve.ks.size(); ++i) {
    csv << curve.ks[i] << "," << fmt(curve.errors[i]) << "\n";
  }
  write_text(join_path(cfg.out_dir, "prediction_curve.csv"), csv.str());
  out << "prediction error over " << ds.segments.size() << " segments, k up to "
      << curve.ks.back() << "\n";
  return 0;
}

int cmd_track(const RunConfig& cfg, ExecMode mode, std::ostream& out) {
  const PlantSpec spec = resolve_plant(cfg);
  const KoopmanModel model = load_model(join_path(cfg.out_dir, "model.ikpm"));
  const ReferenceRepository repo = load_repo(join_path(cfg.out_dir, "repo_eval.ikrr"));
  const RepoTrackResult res =
      track_repo(spec, model, to_mpc_config(cfg, spec), to_track_options(cfg), repo, mode);

  std::ostringstream csv;
  csv << "reference,t_sur,failed,fail_step,joint_position_error,joint_velocity_error,"
         "joint_acceleration_error,root_height_error,root_orientation_error,"
         "root_linear_velocity_error,root_angular_velocity_error\n";
  for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
    const TrackOutcome& o = res.outcomes[i];
    const TrackingMetrics& m = res.metrics[i];
    csv << i << "," << o.t_sur << "," << (o.failed ? 1 : 0) << ","
        << (o.failed ? std::to_string(o.fail_step) : std::string()) << ","
        << opt_cell(m.joint_position_error) << "," << opt_cell(m.joint_velocity_error) << ","
        << opt_cell(m.joint_acceleration_error) << "," << opt_cell(m.root_height_error) << ","
        << opt_cell(m.root_orientation_error) << ","
        << opt_cell(m.root_linear_velocity_error) << ","
        << opt_cell(m.root_angular_velocity_error) << "\n";
  }
  write_text(join_path(cfg.out_dir, "tracking.csv"), csv.str());

  Json summary;
  summary["references"] = res.outcomes.size();
  summary["mean_t_sur"] = res.mean_t_sur;
  summary["full_runs"] = res.full_runs;
  summary["joint_position_error"] = metric_mean(res.metrics, &TrackingMetrics::joint_position_error);
  summary["joint_velocity_error"] = metric_mean(res.metrics, &TrackingMetrics::joint_velocity_error);
  summary["joint_acceleration_error"] =
      metric_mean(res.metrics, &TrackingMetrics::joint_acceleration_error);
  summary["root_height_error"] = metric_mean(res.metrics, &TrackingMetrics::root_height_error);
  summary["root_orientation_error"] =
      metric_mean(res.metrics, &TrackingMetrics::root_orientation_error);
  summary["root_linear_velocity_error"] =
      metric_mean(res.metrics, &TrackingMetrics::root_linear_velocity_error);
  summary["root_angular_velocity_error"] =
      metric_mean(res.metrics, &TrackingMetrics::root_angular_velocity_error);
  write_json(join_path(cfg.out_dir, "tracking_summary.json"), summary);

  out << "tracked " << res.outcomes.size() << " references, mean survival "
      << fmt(res.mean_t_sur) << ", " << res.full_runs << " full runs\n";
  return 0;
}

int cmd_incremental_run(const RunConfig& cfg, ExecMode mode, std::ostream& out) {
  const PlantSpec spec = resolve_plant(cfg);
  const Dataset ds = load_dataset(join_path(cfg.out_dir, "dataset.ikds"));
  const ReferenceRepository train_repo = load_repo(join_path(cfg.out_dir, "repo_train.ikrr"));
  const ReferenceRepository eval_repo = load_repo(join_path(cfg.out_dir, "repo_eval.ikrr"));

  IncrementalConfig ic = to_incremental_config(cfg, spec, mode);
  ic.on_iteration = [&](const IterationRecord& rec, const KoopmanModel& model) {
    save_model(model,
               join_path(cfg.out_dir, "model_iter_" + std::to_string(rec.iteration) + ".ikpm"));
    out << "iteration " << rec.iteration << ": lift " << rec.lift_dim << ", "
        << rec.dataset_segments << " segments, eval survival " << fmt(rec.eval_mean_t_sur)
        << ", harvested " << rec.harvested_segments << "\n";
  };
  const IncrementalResult res = incremental_run(spec, ds, train_repo, eval_repo, ic, mode);

  save_model(res.best_model, join_path(cfg.out_dir, "model_best.ikpm"));
  save_dataset(res.dataset, join_path(cfg.out_dir, "dataset_final.ikds"));

  Json log;
  log["records"] = Json::array();
  for (const IterationRecord& r : res.records) {
    Json rec;
    rec["iteration"] = r.iteration;
    rec["lift_dim"] = r.lift_dim;
    rec["dataset_segments"] = r.dataset_segments;
    rec["epochs_used"] = r.epochs_used;
    rec["final_loss"] = r.final_loss;
    rec["train_mean_t_sur"] = r.train_mean_t_sur;
    rec["eval_mean_t_sur"] = r.eval_mean_t_sur;
    rec["eval_mean_joint_position_error"] = r.eval_mean_joint_position_error;
    rec["harvested_segments"] = r.harvested_segments;
    log["records"].push_back(rec);
  }
  log["best_iteration"] = res.best_iteration;
  log["converged"] = res.converged;
  log["eval_history"] = res.eval_history;
  log["final_segments"] = res.dataset.segments.size();
  write_json(join_path(cfg.out_dir, "incremental_log.json"), log);

  out << "best model from iteration " << res.best_iteration << ", "
      << (res.converged ? "converged" : "ran all iterations") << "\n";
  return 0;
}

int cmd_theory_validate(const RunConfig& cfg, ExecMode mode, std::ostream& out) {
  const SamplingResult sres = sampling_experiment(to_sampling_config(cfg, mode));
  const ProjectionResult pres = projection_experiment(to_projection_config(cfg));

  std::ostringstream scsv;
  scsv << "samples,trial,error,bound\n";
  for (std::size_t ci = 0; ci < sres.sample_counts.size(); ++ci) {
    for (std::size_t t = 0; t < sres.trial_errors[ci].size(); ++t) {
      scsv << sres.sample_counts[ci] << "," << t << "," << fmt(sres.trial_errors[ci][t])
           << "," << fmt(sres.trial_bounds[ci][t]) << "\n";
    }
  }
  write_text(join_path(cfg.out_dir, "theory_sampling.csv"), scsv.str());

  std::ostringstream pcsv;
  pcsv << "dim,error,tail_bound\n";
  for (std::size_t i = 0; i < pres.dims.size(); ++i) {
    pcsv << pres.dims[i] << "," << fmt(pres.errors[i]) << "," << fmt(pres.tail_bounds[i])
         << "\n";
  }
  write_text(join_path(cfg.out_dir, "theory_projection.csv"), pcsv.str());

  bool non_increasing = true;
  for (std::size_t i = 0; i + 1 < pres.errors.size(); ++i) {
    if (pres.errors[i + 1] > pres.errors[i]) non_increasing = false;
  }
  const bool sampling_slope_ok =
      sres.fit.slope >= kSamplingSlopeLo && sres.fit.slope <= kSamplingSlopeHi;
  const bool bounds_ok = sres.bound_hold_fraction >= kBoundHoldMin;
  const bool projection_slope_ok =
      pres.fit.slope >= kProjectionSlopeLo && pres.fit.slope <= kProjectionSlopeHi;

  Json summary;
  summary["sampling"]["slope"] = sres.fit.slope;
  summary["sampling"]["intercept"] = sres.fit.intercept;
  summary["sampling"]["r2"] = sres.fit.r2;
  summary["sampling"]["mean_errors"] = sres.mean_errors;
  summary["sampling"]["bound_hold_fraction"] = sres.bound_hold_fraction;
  summary["sampling"]["slope_band"] = {kSamplingSlopeLo, kSamplingSlopeHi};
  summary["sampling"]["slope_in_band"] = sampling_slope_ok;
  summary["sampling"]["bounds_hold"] = bounds_ok;
  summary["sampling"]["pass"] = sampling_slope_ok && bounds_ok;
  summary["projection"]["slope"] = pres.fit.slope;
  summary["projection"]["intercept"] = pres.fit.intercept;
  summary["projection"]["r2"] = pres.fit.r2;
  summary["projection"]["errors"] = pres.errors;
  summary["projection"]["non_increasing"] = non_increasing;
  summary["projection"]["slope_band"] = {kProjectionSlopeLo, kProjectionSlopeHi};
  summary["projection"]["slope_in_band"] = projection_slope_ok;
  summary["projection"]["pass"] = projection_slope_ok && non_increasing;
  const bool pass = sampling_slope_ok && bounds_ok && projection_slope_ok && non_increasing;
  summary["pass"] = pass;
  write_json(join_path(cfg.out_dir, "theory_summary.json"), summary);

  out << "sampling slope " << fmt(sres.fit.slope) << ", projection slope "
      << fmt(pres.fit.slope) << ", " << (pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 2;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg, ExecMode mode,
                std::ostream& out, std::ostream& err) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    if (command == "generate-data") {
      rc = cmd_generate_data(cfg, mode, out);
    } else if (command == "train") {
      rc = cmd_train(cfg, mode, out, err);
    } else if (command == "predict-eval") {
      rc = cmd_predict_eval(cfg, out);
    } else if (command == "track") {
      rc = cmd_track(cfg, mode, out);
    } else if (command == "incremental-run") {
      rc = cmd_incremental_run(cfg, mode, out);
    } else if (command == "theory-validate") {
      rc = cmd_theory_validate(cfg, mode, out);
    } else {
      throw ConfigError("unknown command: " + command);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
    Json timing;
    timing["command"] = command;
    timing["seconds"] = elapsed.count();
    write_json(join_path(cfg.out_dir, "timing.json"), timing);
    return rc;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ikd
