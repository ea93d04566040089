#include "ikd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "ikd/io.hpp"
#include "json.hpp"

using namespace ikd;

namespace {

struct CmdResult {
  int rc = 0;
  std::string out;
  std::string err;
};

CmdResult run(const std::string& command, const RunConfig& cfg,
              ExecMode mode = ExecMode::Serial) {
  std::ostringstream out, err;
  CmdResult r;
  r.rc = run_command(command, cfg, mode, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

RunConfig tiny_config(const std::string& dir) {
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

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

const std::string kDir = "/tmp/ikd_cli_test";

}  // namespace

TEST_CASE("the six commands chain into a full experiment") {
  std::filesystem::remove_all(kDir);
  const RunConfig cfg = tiny_config(kDir);

  const CmdResult gen = run("generate-data", cfg);
  REQUIRE(gen.rc == 0);
  const Dataset ds = load_dataset(kDir + "/dataset.ikds");
  CHECK(ds.segments.size() == 20);
  CHECK(load_repo(kDir + "/repo_train.ikrr").references.size() == 6);
  CHECK(load_repo(kDir + "/repo_eval.ikrr").references.size() == 6);

  const std::string first_bytes = slurp(kDir + "/dataset.ikds");
  REQUIRE(run("generate-data", cfg).rc == 0);
  CHECK(slurp(kDir + "/dataset.ikds") == first_bytes);

  const CmdResult tr = run("train", cfg);
  REQUIRE(tr.rc == 0);
  const KoopmanModel model = load_model(kDir + "/model.ikpm");
  CHECK(model.lift_dim() == 8);
  const std::string loss_csv = slurp(kDir + "/train_loss.csv");
  CHECK(loss_csv.rfind("epoch,loss\n", 0) == 0);
  CHECK(line_count(loss_csv) == 21);

  const CmdResult pe = run("predict-eval", cfg);
  REQUIRE(pe.rc == 0);
  const std::string curve = slurp(kDir + "/prediction_curve.csv");
  CHECK(curve.rfind("k,error\n", 0) == 0);
  CHECK(line_count(curve) == 7);

  const CmdResult tk = run("track", cfg);
  REQUIRE(tk.rc == 0);
  CHECK(line_count(slurp(kDir + "/tracking.csv")) == 7);
  const auto summary = nlohmann::json::parse(slurp(kDir + "/tracking_summary.json"));
  CHECK(summary.at("references") == 6);
  CHECK(summary.at("mean_t_sur").get<double>() > 0.0);
  CHECK(summary.at("joint_position_error").is_number());
  CHECK(summary.at("root_height_error").is_null());

  const CmdResult inc = run("incremental-run", cfg);
  REQUIRE(inc.rc == 0);
  CHECK(std::filesystem::exists(kDir + "/model_iter_0.ikpm"));
  CHECK(std::filesystem::exists(kDir + "/model_best.ikpm"));
  CHECK(std::filesystem::exists(kDir + "/dataset_final.ikds"));
  const auto log = nlohmann::json::parse(slurp(kDir + "/incremental_log.json"));
  REQUIRE(log.at("records").size() >= 1);
  CHECK(log.at("records")[0].at("lift_dim") == 8);
  CHECK(log.at("best_iteration").get<int>() >= 0);

  const CmdResult th = run("theory-validate", cfg);
  REQUIRE(th.rc == 0);
  const auto verdict = nlohmann::json::parse(slurp(kDir + "/theory_summary.json"));
  CHECK(verdict.at("pass") == true);
  CHECK(verdict.at("sampling").at("slope_in_band") == true);
  CHECK(verdict.at("projection").at("non_increasing") == true);
}

TEST_CASE("a single-iteration run still writes its first checkpoint") {
  const std::string dir = kDir + "_single";
  std::filesystem::remove_all(dir);
  RunConfig cfg = tiny_config(dir);
  cfg.incremental.iterations = 1;
  REQUIRE(run("generate-data", cfg).rc == 0);
  REQUIRE(run("incremental-run", cfg).rc == 0);
  CHECK(std::filesystem::exists(dir + "/model_iter_0.ikpm"));
  CHECK(!std::filesystem::exists(dir + "/model_iter_1.ikpm"));
  const auto log = nlohmann::json::parse(slurp(dir + "/incremental_log.json"));
  CHECK(log.at("records").size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dependent commands report missing inputs by path") {
  const std::string dir = kDir + "_missing";
  std::filesystem::remove_all(dir);
  const RunConfig cfg = tiny_config(dir);
  const CmdResult r = run("train", cfg);
  CHECK(r.rc == 1);
  CHECK(r.err.find(dir + "/dataset.ikds") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("diverged training exits nonzero and keeps the loss log") {
  const std::string dir = kDir + "_diverge";
  std::filesystem::remove_all(dir);
  RunConfig cfg = tiny_config(dir);
  REQUIRE(run("generate-data", cfg).rc == 0);
  cfg.train.lr = 1e5;
  const CmdResult r = run("train", cfg);
  CHECK(r.rc == 1);
  CHECK(r.err.find("training failed") != std::string::npos);
  CHECK(std::filesystem::exists(dir + "/train_loss.csv"));
  CHECK(!std::filesystem::exists(dir + "/model.ikpm"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("an out-of-band theory verdict exits with code 2") {
  const std::string dir = kDir + "_band";
  std::filesystem::remove_all(dir);
  RunConfig cfg = tiny_config(dir);
  cfg.theory.decay = 2.0;
  const CmdResult r = run("theory-validate", cfg);
  CHECK(r.rc == 2);
  const auto verdict = nlohmann::json::parse(slurp(dir + "/theory_summary.json"));
  CHECK(verdict.at("pass") == false);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unknown commands are rejected") {
  const RunConfig cfg = tiny_config(kDir + "_cmd");
  const CmdResult r = run("frobnicate", cfg);
  CHECK(r.rc == 1);
  CHECK(r.err.find("unknown command") != std::string::npos);
  std::filesystem::remove_all(kDir + "_cmd");
}
