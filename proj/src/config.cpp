#include "ikd/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ikd/errors.hpp"
#include "json.hpp"

namespace ikd {

namespace {

using Json = nlohmann::ordered_json;

/// Reads the fields of one config section, tracking which keys were consumed
/// so anything left over can be rejected by name.
class Fields {
 public:
  Fields(const Json& section, std::string prefix)
      : section_(section), prefix_(std::move(prefix)) {
    if (!section_.is_object()) throw ConfigError(prefix_ + ": expected an object");
  }

  void num(const char* key, double& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void integer(const char* key, int& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
      const auto x = v->get<long long>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(path(key) + ": integer out of range");
      }
      out = static_cast<int>(x);
    }
  }

  void u64(const char* key, std::uint64_t& out) {
    if (const Json* v = claim(key)) {
      const bool ok = v->is_number_unsigned() ||
                      (v->is_number_integer() && v->get<long long>() >= 0);
      if (!ok) throw ConfigError(path(key) + ": expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const char* key, bool& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key) + ": expected a boolean");
      out = v->get<bool>();
    }
  }

  void str(const char* key, std::string& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void int_list(const char* key, std::vector<int>& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_array()) throw ConfigError(path(key) + ": expected an array of integers");
      std::vector<int> vals;
      for (const Json& e : *v) {
        if (!e.is_number_integer()) {
          throw ConfigError(path(key) + ": expected an array of integers");
        }
        vals.push_back(e.get<int>());
      }
      out = std::move(vals);
    }
  }

  void num_map(const char* key, std::map<std::string, double>& out) {
    if (const Json* v = claim(key)) {
      if (!v->is_object()) throw ConfigError(path(key) + ": expected an object of numbers");
      std::map<std::string, double> vals;
      for (const auto& [k, e] : v->items()) {
        if (!e.is_number()) throw ConfigError(path(key) + "." + k + ": expected a number");
        vals[k] = e.get<double>();
      }
      out = std::move(vals);
    }
  }

  /// Rejects every key no reader claimed.
  void finish() const {
    for (const auto& [k, v] : section_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key: " + path(k.c_str()));
    }
  }

 private:
  const Json* claim(const char* key) {
    seen_.insert(key);
    if (!section_.contains(key)) return nullptr;
    return &section_.at(key);
  }
  std::string path(const char* key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const Json& section_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void sanity_check(const RunConfig& c) {
  require(c.plant.id == "pendulum" || c.plant.id == "cartpole" || c.plant.id == "hopper",
          "plant.id must be pendulum, cartpole, or hopper");
  require(c.plant.dt >= 0.0, "plant.dt must be nonnegative (0 keeps the default)");
  require(c.data.n_traj >= 1, "data.n_traj must be positive");
  require(c.data.l_seg >= 1, "data.l_seg must be positive");
  require(c.data.l_init >= c.data.l_seg, "data.l_init must be at least data.l_seg");
  require(c.data.repo_size >= 1, "data.repo_size must be positive");
  require(c.data.ref_length >= 2, "data.ref_length must be at least 2");
  require(c.data.noise_halfwidth >= 0.0, "data.noise_halfwidth must be nonnegative");
  require(c.train.lift >= 1, "train.lift must be positive");
  require(c.train.epochs >= 1, "train.epochs must be positive");
  require(c.train.lr > 0.0, "train.lr must be positive");
  require(c.train.batch_size >= 1, "train.batch_size must be positive");
  require(c.train.hidden >= 1, "train.hidden must be positive");
  require(c.train.blocks >= 0, "train.blocks must be nonnegative");
  require(c.train.gamma > 0.0 && c.train.gamma <= 1.0, "train.gamma must lie in (0, 1]");
  require(c.train.alpha >= 0.0, "train.alpha must be nonnegative");
  require(c.mpc.horizon >= 1, "mpc.horizon must be positive");
  require(c.data.l_seg == c.mpc.horizon, "data.l_seg must equal mpc.horizon");
  require(c.mpc.state_weight >= 0.0, "mpc.state_weight must be nonnegative");
  require(c.mpc.terminal_weight >= 0.0, "mpc.terminal_weight must be nonnegative");
  require(c.mpc.control_weight >= 0.0, "mpc.control_weight must be nonnegative");
  require(c.mpc.rho > 0.0, "mpc.rho must be positive");
  require(c.mpc.eps_abs > 0.0, "mpc.eps_abs must be positive");
  require(c.mpc.eps_rel >= 0.0, "mpc.eps_rel must be nonnegative");
  require(c.mpc.max_iters >= 1, "mpc.max_iters must be positive");
  require(c.mpc.eps_fail > 0.0, "mpc.eps_fail must be positive");
  require(c.mpc.t_max >= 1, "mpc.t_max must be positive");
  require(c.incremental.iterations >= 1, "incremental.iterations must be positive");
  require(c.incremental.n0 >= 1, "incremental.n0 must be positive");
  require(c.incremental.delta_n >= 0, "incremental.delta_n must be nonnegative");
  require(c.incremental.eps_conv >= 0.0, "incremental.eps_conv must be nonnegative");
  require(c.theory.sampling_features >= 1, "theory.sampling_features must be positive");
  require(c.theory.sampling_observed >= 1, "theory.sampling_observed must be positive");
  require(!c.theory.sample_counts.empty(), "theory.sample_counts must be nonempty");
  require(c.theory.trials >= 1, "theory.trials must be positive");
  require(c.theory.delta > 0.0 && c.theory.delta < 1.0, "theory.delta must lie in (0, 1)");
  require(c.theory.projection_features >= 2, "theory.projection_features must be at least 2");
  require(c.theory.projection_dims.size() >= 2,
          "theory.projection_dims needs at least two entries");
}

RunConfig from_json(const Json& root) {
  RunConfig cfg;
  Fields top(root, "");
  top.str("out_dir", cfg.out_dir);

  if (root.contains("plant")) {
    Fields f(root.at("plant"), "plant");
    f.str("id", cfg.plant.id);
    f.num("dt", cfg.plant.dt);
    f.num_map("params", cfg.plant.params);
    f.finish();
  }
  if (root.contains("data")) {
    Fields f(root.at("data"), "data");
    f.integer("n_traj", cfg.data.n_traj);
    f.integer("l_init", cfg.data.l_init);
    f.integer("l_seg", cfg.data.l_seg);
    f.integer("repo_size", cfg.data.repo_size);
    f.integer("ref_length", cfg.data.ref_length);
    f.num("noise_halfwidth", cfg.data.noise_halfwidth);
    f.u64("seed", cfg.data.seed);
    f.u64("repo_seed", cfg.data.repo_seed);
    f.finish();
  }
  if (root.contains("train")) {
    Fields f(root.at("train"), "train");
    f.integer("lift", cfg.train.lift);
    f.integer("epochs", cfg.train.epochs);
    f.num("lr", cfg.train.lr);
    f.integer("batch_size", cfg.train.batch_size);
    f.integer("hidden", cfg.train.hidden);
    f.integer("blocks", cfg.train.blocks);
    f.num("gamma", cfg.train.gamma);
    f.num("alpha", cfg.train.alpha);
    f.num("tail_diag_init", cfg.train.tail_diag_init);
    f.u64("seed", cfg.train.seed);
    f.finish();
  }
  if (root.contains("mpc")) {
    Fields f(root.at("mpc"), "mpc");
    f.integer("horizon", cfg.mpc.horizon);
    f.num("state_weight", cfg.mpc.state_weight);
    f.num("terminal_weight", cfg.mpc.terminal_weight);
    f.num("control_weight", cfg.mpc.control_weight);
    f.num("rho", cfg.mpc.rho);
    f.num("eps_abs", cfg.mpc.eps_abs);
    f.num("eps_rel", cfg.mpc.eps_rel);
    f.integer("max_iters", cfg.mpc.max_iters);
    f.num("eps_fail", cfg.mpc.eps_fail);
    f.integer("t_max", cfg.mpc.t_max);
    f.finish();
  }
  if (root.contains("incremental")) {
    Fields f(root.at("incremental"), "incremental");
    f.integer("iterations", cfg.incremental.iterations);
    f.integer("n0", cfg.incremental.n0);
    f.integer("delta_n", cfg.incremental.delta_n);
    f.boolean("harvest", cfg.incremental.harvest);
    f.num("eps_conv", cfg.incremental.eps_conv);
    f.finish();
  }
  if (root.contains("theory")) {
    Fields f(root.at("theory"), "theory");
    f.integer("sampling_features", cfg.theory.sampling_features);
    f.integer("sampling_observed", cfg.theory.sampling_observed);
    f.int_list("sample_counts", cfg.theory.sample_counts);
    f.integer("trials", cfg.theory.trials);
    f.integer("sampling_nodes", cfg.theory.sampling_nodes);
    f.num("delta", cfg.theory.delta);
    f.num("scale", cfg.theory.scale);
    f.num("decay", cfg.theory.decay);
    f.u64("seed", cfg.theory.seed);
    f.integer("projection_features", cfg.theory.projection_features);
    f.int_list("projection_dims", cfg.theory.projection_dims);
    f.integer("projection_nodes", cfg.theory.projection_nodes);
    f.finish();
  }

  static const std::set<std::string> sections = {"out_dir",     "plant", "data",
                                                 "train",       "mpc",   "incremental",
                                                 "theory"};
  for (const auto& [k, v] : root.items()) {
    if (!sections.count(k)) throw ConfigError("unknown config key: " + k);
  }

  sanity_check(cfg);
  return cfg;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["out_dir"] = c.out_dir;
  Json& p = j["plant"];
  p["id"] = c.plant.id;
  p["dt"] = c.plant.dt;
  p["params"] = Json::object();
  for (const auto& [k, v] : c.plant.params) p["params"][k] = v;
  Json& d = j["data"];
  d["n_traj"] = c.data.n_traj;
  d["l_init"] = c.data.l_init;
  d["l_seg"] = c.data.l_seg;
  d["repo_size"] = c.data.repo_size;
  d["ref_length"] = c.data.ref_length;
  d["noise_halfwidth"] = c.data.noise_halfwidth;
  d["seed"] = c.data.seed;
  d["repo_seed"] = c.data.repo_seed;
  Json& t = j["train"];
  t["lift"] = c.train.lift;
  t["epochs"] = c.train.epochs;
  t["lr"] = c.train.lr;
  t["batch_size"] = c.train.batch_size;
  t["hidden"] = c.train.hidden;
  t["blocks"] = c.train.blocks;
  t["gamma"] = c.train.gamma;
  t["alpha"] = c.train.alpha;
  t["tail_diag_init"] = c.train.tail_diag_init;
  t["seed"] = c.train.seed;
  Json& m = j["mpc"];
  m["horizon"] = c.mpc.horizon;
  m["state_weight"] = c.mpc.state_weight;
  m["terminal_weight"] = c.mpc.terminal_weight;
  m["control_weight"] = c.mpc.control_weight;
  m["rho"] = c.mpc.rho;
  m["eps_abs"] = c.mpc.eps_abs;
  m["eps_rel"] = c.mpc.eps_rel;
  m["max_iters"] = c.mpc.max_iters;
  m["eps_fail"] = c.mpc.eps_fail;
  m["t_max"] = c.mpc.t_max;
  Json& i = j["incremental"];
  i["iterations"] = c.incremental.iterations;
  i["n0"] = c.incremental.n0;
  i["delta_n"] = c.incremental.delta_n;
  i["harvest"] = c.incremental.harvest;
  i["eps_conv"] = c.incremental.eps_conv;
  Json& th = j["theory"];
  th["sampling_features"] = c.theory.sampling_features;
  th["sampling_observed"] = c.theory.sampling_observed;
  th["sample_counts"] = c.theory.sample_counts;
  th["trials"] = c.theory.trials;
  th["sampling_nodes"] = c.theory.sampling_nodes;
  th["delta"] = c.theory.delta;
  th["scale"] = c.theory.scale;
  th["decay"] = c.theory.decay;
  th["seed"] = c.theory.seed;
  th["projection_features"] = c.theory.projection_features;
  th["projection_dims"] = c.theory.projection_dims;
  th["projection_nodes"] = c.theory.projection_nodes;
  return j;
}

void apply_override(Json& root, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> keys;
  std::stringstream ss(path);
  std::string tok;
  while (std::getline(ss, tok, '.')) {
    if (tok.empty()) throw ConfigError("empty key in override path: " + path);
    keys.push_back(tok);
  }

  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::parse_error&) {
    parsed = value;  // bare words are strings
  }

  Json* node = &root;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i])) (*node)[keys[i]] = Json::object();
    node = &(*node)[keys[i]];
    if (!node->is_object()) throw ConfigError(path + ": " + keys[i] + " is not a section");
  }
  (*node)[keys.back()] = parsed;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  Json root;
  if (text.empty()) {
    root = Json::object();
  } else {
    try {
      root = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  for (const std::string& o : overrides) apply_override(root, o);
  return from_json(root);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string serialize_config(const RunConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

PlantSpec resolve_plant(const RunConfig& cfg) {
  PlantId id = PlantId::Pendulum;
  if (cfg.plant.id == "cartpole") {
    id = PlantId::Cartpole;
  } else if (cfg.plant.id == "hopper") {
    id = PlantId::Hopper1D;
  }
  PlantSpec spec = make_plant_spec(id);
  if (cfg.plant.dt > 0.0) spec.dt = cfg.plant.dt;
  for (const auto& [k, v] : cfg.plant.params) {
    auto it = spec.physical_params.find(k);
    if (it == spec.physical_params.end()) {
      throw ConfigError("unknown plant parameter '" + k + "' for " + cfg.plant.id);
    }
    it->second = v;
  }
  return spec;
}

TrainConfig to_train_config(const RunConfig& cfg, ExecMode mode) {
  TrainConfig tc;
  tc.epochs = cfg.train.epochs;
  tc.lr = cfg.train.lr;
  tc.batch_size = cfg.train.batch_size;
  tc.hidden = cfg.train.hidden;
  tc.blocks = cfg.train.blocks;
  tc.gamma = cfg.train.gamma;
  tc.alpha = cfg.train.alpha;
  tc.tail_diag_init = cfg.train.tail_diag_init;
  tc.seed = cfg.train.seed;
  tc.mode = mode;
  return tc;
}

MpcConfig to_mpc_config(const RunConfig& cfg, const PlantSpec& spec) {
  MpcConfig mc;
  mc.horizon = cfg.mpc.horizon;
  mc.state_weight = cfg.mpc.state_weight;
  mc.terminal_weight = cfg.mpc.terminal_weight;
  mc.control_weight = cfg.mpc.control_weight;
  mc.u_min = spec.u_min;
  mc.u_max = spec.u_max;
  mc.admm.rho = cfg.mpc.rho;
  mc.admm.eps_abs = cfg.mpc.eps_abs;
  mc.admm.eps_rel = cfg.mpc.eps_rel;
  mc.admm.max_iters = cfg.mpc.max_iters;
  return mc;
}

TrackOptions to_track_options(const RunConfig& cfg) {
  TrackOptions opts;
  opts.t_max = cfg.mpc.t_max;
  opts.eps_fail = cfg.mpc.eps_fail;
  return opts;
}

IncrementalConfig to_incremental_config(const RunConfig& cfg, const PlantSpec& spec,
                                        ExecMode mode) {
  IncrementalConfig ic;
  ic.iterations = cfg.incremental.iterations;
  ic.n0 = cfg.incremental.n0;
  ic.delta_n = cfg.incremental.delta_n;
  ic.harvest = cfg.incremental.harvest;
  ic.eps_conv = cfg.incremental.eps_conv;
  ic.train = to_train_config(cfg, mode);
  ic.mpc = to_mpc_config(cfg, spec);
  ic.track = to_track_options(cfg);
  return ic;
}

SamplingConfig to_sampling_config(const RunConfig& cfg, ExecMode mode) {
  SamplingConfig sc;
  sc.features = cfg.theory.sampling_features;
  sc.observed = cfg.theory.sampling_observed;
  sc.scale = cfg.theory.scale;
  sc.decay = cfg.theory.decay;
  sc.sample_counts = cfg.theory.sample_counts;
  sc.trials = cfg.theory.trials;
  sc.nodes = cfg.theory.sampling_nodes;
  sc.delta = cfg.theory.delta;
  sc.seed = cfg.theory.seed;
  sc.mode = mode;
  return sc;
}

ProjectionConfig to_projection_config(const RunConfig& cfg) {
  ProjectionConfig pc;
  pc.features = cfg.theory.projection_features;
  pc.scale = cfg.theory.scale;
  pc.decay = cfg.theory.decay;
  pc.dims = cfg.theory.projection_dims;
  pc.nodes = cfg.theory.projection_nodes;
  return pc;
}

}  // namespace ikd
