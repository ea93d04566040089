#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ikd/cli.hpp"
#include "ikd/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lifted linear dynamics: learning, tracking control, and rate validation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = 0;
  bool serial = false;
  app.add_option("-c,--config", config_path, "JSON config file (defaults apply when omitted)");
  app.add_option("--set", overrides, "Override one config key, e.g. --set train.lr=0.01");
  app.add_option("-o,--out", out_dir, "Output directory, shorthand for --set out_dir=...");
  app.add_option("--threads", threads, "Cap the worker thread count");
  app.add_flag("--serial", serial, "Use the serial reference kernels");

  app.add_subcommand("generate-data", "Collect the expert dataset and both reference repos")
      ->fallthrough();
  app.add_subcommand("train", "Train one model on the saved dataset")->fallthrough();
  app.add_subcommand("predict-eval", "Open-loop prediction error curve of the saved model")
      ->fallthrough();
  app.add_subcommand("track", "Closed-loop tracking of the evaluation repo")->fallthrough();
  app.add_subcommand("incremental-run", "Alternate dimension growth and failure harvesting")
      ->fallthrough();
  app.add_subcommand("theory-validate", "Convergence-rate experiments with verdicts")
      ->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ikd::RunConfig cfg = config_path.empty() ? ikd::parse_config("", overrides)
                                             : ikd::load_config(config_path, overrides);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (threads > 0) ikd::set_thread_cap(threads);
    const ikd::ExecMode mode = serial ? ikd::ExecMode::Serial : ikd::ExecMode::Parallel;
    return ikd::run_command(command, cfg, mode, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
