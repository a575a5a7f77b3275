#pragma once

#include <nlohmann/json.hpp>

#include "rein/eval/metrics.hpp"
#include "rein/exp/fsutil.hpp"

namespace rein::expkit {

// Record of one run: the exact config text, input file checksums, training
// curve, and final metrics. Written atomically so a crash mid-run never
// leaves a torn manifest behind.
class Manifest {
 public:
  Manifest() {
    j_["format_version"] = 1;
    j_["inputs"] = nlohmann::json::object();
    j_["epochs"] = nlohmann::json::array();
    j_["metrics"] = nlohmann::json::array();
  }

  void set_config_text(const std::string& ini) { j_["config"] = ini; }
  void set_command(const std::string& cmd) { j_["command"] = cmd; }

  void add_input(const std::string& label, const std::string& path) {
    j_["inputs"][label] = {{"path", path}, {"fnv1a", file_checksum(path)}};
  }

  void add_epoch(int64_t epoch, double mean_loss, int64_t steps) {
    j_["epochs"].push_back({{"epoch", epoch}, {"mean_loss", mean_loss}, {"steps", steps}});
  }

  void add_metric(const eval::MetricReport& m) {
    j_["metrics"].push_back({{"name", m.name},
                             {"tag", m.tag},
                             {"value", m.value},
                             {"dispersion", m.dispersion},
                             {"n", m.n}});
  }

  void set_wall_seconds(double s) { j_["wall_seconds"] = s; }
  void set(const std::string& key, const nlohmann::json& v) { j_[key] = v; }

  const nlohmann::json& json() const { return j_; }

  void write(const std::string& path) const { atomic_write_file(path, j_.dump(2) + "\n"); }

  static nlohmann::json read(const std::string& path) {
    try {
      return nlohmann::json::parse(read_binary_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail<IoError>("manifest ", path, ": invalid JSON (", e.what(), ")");
    }
  }

 private:
  nlohmann::json j_;
};

}  // namespace rein::expkit
