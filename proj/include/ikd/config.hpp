#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ikd/incremental.hpp"
#include "ikd/mpc.hpp"
#include "ikd/plants.hpp"
#include "ikd/theory.hpp"

namespace ikd {

/// Run configuration mirrored one-to-one by the JSON schema. Unknown keys are
/// rejected at parse time so typos cannot silently fall back to defaults.
struct RunConfig {
  std::string out_dir = "out";

  struct Plant {
    std::string id = "pendulum";  ///< pendulum | cartpole | hopper
    double dt = 0.0;              ///< 0 keeps the plant default
    std::map<std::string, double> params;  ///< overrides of physical parameters
  } plant;

  struct Data {
    int n_traj = 100;
    int l_init = 60;
    int l_seg = 15;  ///< must equal mpc.horizon
    int repo_size = 100;
    int ref_length = 200;
    double noise_halfwidth = 0.01;
    std::uint64_t seed = 1;
    std::uint64_t repo_seed = 2;
  } data;

  struct Train {
    int lift = 16;
    int epochs = 100;
    double lr = 1e-3;
    int batch_size = 32;
    int hidden = 64;
    int blocks = 2;
    double gamma = 0.99;
    double alpha = 0.1;
    double tail_diag_init = 0.99;
    std::uint64_t seed = 0;
  } train;

  struct Mpc {
    int horizon = 15;
    double state_weight = 1.0;
    double terminal_weight = 1.0;
    double control_weight = 0.01;
    double rho = 1.0;
    double eps_abs = 1e-8;
    double eps_rel = 1e-8;
    int max_iters = 10000;
    double eps_fail = 0.7;
    int t_max = 200;
  } mpc;

  struct Incremental {
    int iterations = 4;
    int n0 = 8;
    int delta_n = 8;
    bool harvest = true;
    double eps_conv = 0.02;
  } incremental;

  struct Theory {
    int sampling_features = 256;
    int sampling_observed = 32;
    std::vector<int> sample_counts = {1000, 3000, 10000, 30000, 100000};
    int trials = 10;
    int sampling_nodes = 16384;
    double delta = 0.05;
    double scale = 0.9;
    double decay = 1.0;
    std::uint64_t seed = 0;
    int projection_features = 2048;
    std::vector<int> projection_dims = {4, 8, 16, 32, 64, 128};
    int projection_nodes = 16384;
  } theory;
};

/// Parses a JSON document, after applying `overrides` of the form
/// "section.key=value" (values in JSON syntax; bare words become strings).
/// Throws ConfigError on malformed JSON, unknown keys, wrong types, or
/// values that fail the basic sanity checks.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides = {});

/// Reads and parses a config file. "-" is not special; missing file throws
/// IoError.
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides = {});

/// Serializes with a fixed key order, 2-space indentation, and every field
/// present, so parse(serialize(cfg)) reproduces cfg exactly.
std::string serialize_config(const RunConfig& cfg);

/// Plant spec for the config: base parameters for plant.id, then dt and
/// physical-parameter overrides. Unknown parameter names throw ConfigError.
PlantSpec resolve_plant(const RunConfig& cfg);

/// Projections of the config onto the module configs.
TrainConfig to_train_config(const RunConfig& cfg, ExecMode mode);
MpcConfig to_mpc_config(const RunConfig& cfg, const PlantSpec& spec);
TrackOptions to_track_options(const RunConfig& cfg);
IncrementalConfig to_incremental_config(const RunConfig& cfg, const PlantSpec& spec,
                                        ExecMode mode);
SamplingConfig to_sampling_config(const RunConfig& cfg, ExecMode mode);
ProjectionConfig to_projection_config(const RunConfig& cfg);

}  // namespace ikd
