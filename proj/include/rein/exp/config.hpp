#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rein/model/rein.hpp"
#include "rein/model/trainer.hpp"
#include "rein/sim/generate.hpp"

namespace rein::expkit {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// [section] key = value lines; '#' and ';' start comments
inline std::map<std::string, std::map<std::string, std::string>> parse_ini(std::istream& in) {
  std::map<std::string, std::map<std::string, std::string>> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      check<ConfigError>(line.back() == ']', "config line ", lineno, ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      check<ConfigError>(!section.empty(), "config line ", lineno, ": empty section name");
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    check<ConfigError>(eq != std::string::npos, "config line ", lineno, ": expected key = value");
    check<ConfigError>(!section.empty(), "config line ", lineno, ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    check<ConfigError>(!key.empty(), "config line ", lineno, ": empty key");
    check<ConfigError>(!out[section].count(key), "config: duplicate key [", section, "] ", key);
    out[section][key] = val;
  }
  return out;
}

class SchemaReader {
 public:
  explicit SchemaReader(std::map<std::string, std::map<std::string, std::string>> kv)
      : kv_(std::move(kv)) {}

  template <class F>
  void field(const std::string& section, const std::string& key, F&& apply) {
    known_[section].insert(key);
    auto s = kv_.find(section);
    if (s == kv_.end()) return;
    auto k = s->second.find(key);
    if (k == s->second.end()) return;
    try {
      apply(k->second);
    } catch (const std::exception& e) {
      fail<ConfigError>("config [", section, "] ", key, ": ", e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : kv_) {
      auto s = known_.find(section);
      check<ConfigError>(s != known_.end(), "config: unknown section [", section, "]");
      for (const auto& [key, val] : keys)
        check<ConfigError>(s->second.count(key), "config: unknown key [", section, "] ", key);
    }
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> kv_;
  std::map<std::string, std::set<std::string>> known_;
};

inline int64_t to_int(const std::string& s) {
  size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  check<ConfigError>(pos == s.size(), "trailing characters after integer '", s, "'");
  return v;
}

inline double to_real(const std::string& s) {
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  check<ConfigError>(pos == s.size(), "trailing characters after number '", s, "'");
  return v;
}

inline bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail<ConfigError>("expected a boolean, got '", s, "'");
}

inline std::vector<int64_t> to_int_list(const std::string& s) {
  std::vector<int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    check<ConfigError>(!item.empty(), "empty entry in list '", s, "'");
    out.push_back(to_int(item));
  }
  check<ConfigError>(!out.empty(), "empty list");
  return out;
}

}  // namespace detail

struct EvalConfig {
  std::vector<int64_t> horizons{1, 10, 20, 50};
  int64_t context = 10;
  int64_t n_seeds = 3;
  bool sample_mode = false;
};

// Complete experiment description; every run is a pure function of this plus
// the dataset files it names.
struct ExperimentConfig {
  sim::SystemKind kind = sim::SystemKind::springs;
  int32_t n_objects = 5;

  sim::SimParams sim_params;
  int64_t raw_steps = 4900;
  int64_t test_raw_steps = 6000;  // longer held-out episodes for far horizons
  int64_t train_episodes = 1000;
  int64_t test_episodes = 200;
  uint64_t data_seed = 1;

  model::ReinConfig model;
  model::TrainConfig<double> train;
  EvalConfig eval;

  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig c;
    detail::SchemaReader r(detail::parse_ini(in));

    r.field("system", "kind", [&](const std::string& v) { c.kind = sim::parse_system_kind(v); });
    r.field("system", "n_objects",
            [&](const std::string& v) { c.n_objects = static_cast<int32_t>(detail::to_int(v)); });

    r.field("sim", "dt", [&](const std::string& v) { c.sim_params.dt = detail::to_real(v); });
    r.field("sim", "subsample",
            [&](const std::string& v) { c.sim_params.subsample = detail::to_int(v); });
    r.field("sim", "raw_steps", [&](const std::string& v) { c.raw_steps = detail::to_int(v); });
    r.field("sim", "test_raw_steps",
            [&](const std::string& v) { c.test_raw_steps = detail::to_int(v); });
    r.field("sim", "train_episodes",
            [&](const std::string& v) { c.train_episodes = detail::to_int(v); });
    r.field("sim", "test_episodes",
            [&](const std::string& v) { c.test_episodes = detail::to_int(v); });
    r.field("sim", "seed",
            [&](const std::string& v) { c.data_seed = static_cast<uint64_t>(detail::to_int(v)); });

    r.field("model", "n_levels",
            [&](const std::string& v) { c.model.n_levels = static_cast<int32_t>(detail::to_int(v)); });
    r.field("model", "mid_groups", [&](const std::string& v) {
      c.model.mid_groups = static_cast<int32_t>(detail::to_int(v));
    });
    r.field("model", "neuron_dim", [&](const std::string& v) {
      c.model.neuron_dim = static_cast<int32_t>(detail::to_int(v));
    });
    r.field("model", "edge_types", [&](const std::string& v) {
      c.model.edge_types = static_cast<int32_t>(detail::to_int(v));
    });
    r.field("model", "heads",
            [&](const std::string& v) { c.model.heads = static_cast<int32_t>(detail::to_int(v)); });
    r.field("model", "per_step_edges",
            [&](const std::string& v) { c.model.per_step_edges = detail::to_bool(v); });
    r.field("model", "hard_edges",
            [&](const std::string& v) { c.model.hard_edges = detail::to_bool(v); });
    r.field("model", "ablation", [&](const std::string& v) {
      model::parse_ablation(v);  // validate eagerly
      c.model.ablation = v;
    });
    r.field("model", "init_seed", [&](const std::string& v) {
      c.model.init_seed = static_cast<uint64_t>(detail::to_int(v));
    });
    r.field("model", "tau_start",
            [&](const std::string& v) { c.train.tau_start = detail::to_real(v); });
    r.field("model", "tau_end", [&](const std::string& v) { c.train.tau_end = detail::to_real(v); });
    r.field("model", "kl_warmup_epochs",
            [&](const std::string& v) { c.train.kl_warmup_epochs = detail::to_int(v); });

    r.field("train", "lr", [&](const std::string& v) { c.train.lr = detail::to_real(v); });
    r.field("train", "batch", [&](const std::string& v) { c.train.batch = detail::to_int(v); });
    r.field("train", "epochs", [&](const std::string& v) { c.train.epochs = detail::to_int(v); });
    r.field("train", "clip", [&](const std::string& v) { c.train.clip = detail::to_real(v); });
    r.field("train", "seed",
            [&](const std::string& v) { c.train.seed = static_cast<uint64_t>(detail::to_int(v)); });

    r.field("eval", "horizons",
            [&](const std::string& v) { c.eval.horizons = detail::to_int_list(v); });
    r.field("eval", "context", [&](const std::string& v) { c.eval.context = detail::to_int(v); });
    r.field("eval", "n_seeds", [&](const std::string& v) { c.eval.n_seeds = detail::to_int(v); });
    r.field("eval", "sample_mode",
            [&](const std::string& v) { c.eval.sample_mode = detail::to_bool(v); });

    r.reject_unknown();
    c.validate();
    return c;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    check<IoError>(in.good(), "cannot open config file ", path);
    return parse(in);
  }

  void validate() {
    check<ConfigError>(n_objects >= 1, "config [system] n_objects: must be >= 1, got ", n_objects);
    check<ConfigError>(sim_params.dt > 0, "config [sim] dt: must be positive");
    check<ConfigError>(sim_params.subsample >= 1, "config [sim] subsample: must be >= 1");
    check<ConfigError>(raw_steps >= sim_params.subsample,
                       "config [sim] raw_steps: must cover at least one frame");
    check<ConfigError>(test_raw_steps >= sim_params.subsample,
                       "config [sim] test_raw_steps: must cover at least one frame");
    check<ConfigError>(train_episodes >= 1, "config [sim] train_episodes: must be >= 1");
    check<ConfigError>(test_episodes >= 1, "config [sim] test_episodes: must be >= 1");
    check<ConfigError>(model.neuron_dim >= 1, "config [model] neuron_dim: must be >= 1");
    check<ConfigError>(model.edge_types >= 2, "config [model] edge_types: must be >= 2");
    check<ConfigError>(model.heads >= 1 && model.neuron_dim % model.heads == 0,
                       "config [model] heads: must divide neuron_dim");
    check<ConfigError>(model.n_levels == 2 || model.n_levels == 3,
                       "config [model] n_levels: must be 2 or 3");
    check<ConfigError>(train.lr >= 0, "config [train] lr: must be >= 0");
    check<ConfigError>(train.batch >= 1, "config [train] batch: must be >= 1");
    check<ConfigError>(train.epochs >= 1, "config [train] epochs: must be >= 1");
    check<ConfigError>(train.clip > 0, "config [train] clip: must be positive");
    check<ConfigError>(train.tau_start > 0 && train.tau_end > 0,
                       "config [model] tau schedule: temperatures must stay positive");
    check<ConfigError>(train.kl_warmup_epochs >= 0,
                       "config [model] kl_warmup_epochs: must be >= 0");
    check<ConfigError>(eval.context >= 2, "config [eval] context: need at least 2 frames");
    for (int64_t h : eval.horizons)
      check<ConfigError>(h >= 1, "config [eval] horizons: must be >= 1, got ", h);
    check<ConfigError>(eval.n_seeds >= 1, "config [eval] n_seeds: must be >= 1");
    model.n_objects = n_objects;
  }

  std::string to_ini() const {
    std::ostringstream os;
    os.precision(17);
    os << "[system]\n";
    os << "kind = " << sim::to_string(kind) << "\n";
    os << "n_objects = " << n_objects << "\n\n";
    os << "[sim]\n";
    os << "dt = " << sim_params.dt << "\n";
    os << "subsample = " << sim_params.subsample << "\n";
    os << "raw_steps = " << raw_steps << "\n";
    os << "test_raw_steps = " << test_raw_steps << "\n";
    os << "train_episodes = " << train_episodes << "\n";
    os << "test_episodes = " << test_episodes << "\n";
    os << "seed = " << data_seed << "\n\n";
    os << "[model]\n";
    os << "n_levels = " << model.n_levels << "\n";
    os << "mid_groups = " << model.mid_groups << "\n";
    os << "neuron_dim = " << model.neuron_dim << "\n";
    os << "edge_types = " << model.edge_types << "\n";
    os << "heads = " << model.heads << "\n";
    os << "per_step_edges = " << (model.per_step_edges ? "true" : "false") << "\n";
    os << "hard_edges = " << (model.hard_edges ? "true" : "false") << "\n";
    os << "ablation = " << model.ablation << "\n";
    os << "init_seed = " << model.init_seed << "\n";
    os << "tau_start = " << train.tau_start << "\n";
    os << "tau_end = " << train.tau_end << "\n";
    os << "kl_warmup_epochs = " << train.kl_warmup_epochs << "\n\n";
    os << "[train]\n";
    os << "lr = " << train.lr << "\n";
    os << "batch = " << train.batch << "\n";
    os << "epochs = " << train.epochs << "\n";
    os << "clip = " << train.clip << "\n";
    os << "seed = " << train.seed << "\n\n";
    os << "[eval]\n";
    os << "horizons = ";
    for (size_t i = 0; i < eval.horizons.size(); ++i)
      os << (i ? "," : "") << eval.horizons[i];
    os << "\n";
    os << "context = " << eval.context << "\n";
    os << "n_seeds = " << eval.n_seeds << "\n";
    os << "sample_mode = " << (eval.sample_mode ? "true" : "false") << "\n";
    return os.str();
  }

  sim::GenerateSpec train_split() const {
    sim::GenerateSpec g;
    g.kind = kind;
    g.n_objects = n_objects;
    g.n_episodes = train_episodes;
    g.raw_steps = raw_steps;
    g.seed = data_seed;
    g.params = sim_params;
    return g;
  }

  sim::GenerateSpec test_split() const {
    sim::GenerateSpec g = train_split();
    g.n_episodes = test_episodes;
    g.raw_steps = test_raw_steps;
    g.seed = rein::detail::splitmix64(data_seed ^ 0x7e57ULL);
    return g;
  }
};

}  // namespace rein::expkit
