#pragma once

#include <cstring>

#include <nlohmann/json.hpp>

#include "rein/exp/fsutil.hpp"
#include "rein/model/trainer.hpp"

namespace rein::expkit {

// A checkpoint is a JSON metadata file plus a sibling <path>.bin blob holding
// parameter values and Adam moments as little-endian float64 in registry
// order. The metadata pins every shape and a blob checksum, so a mismatched
// or truncated blob fails loudly with the offending parameter's name.
struct CheckpointMeta {
  int64_t format_version = 1;
  nlohmann::json arch;  // model kind + construction config, owned by the caller
  int64_t epoch = 0, step_in_epoch = 0, global_step = 0;
  double pending_loss = 0.0;
  int64_t pending_steps = 0;
  AdamConfig adam_cfg;
  int64_t adam_t = 0;
  std::vector<model::EpochStats<double>> history;
};

namespace detail {

inline void append_f64(std::string& blob, double x) {
  static_assert(sizeof(double) == 8);
  char bytes[8];
  std::memcpy(bytes, &x, 8);
  blob.append(bytes, 8);
}

inline double read_f64(const std::string& blob, size_t index) {
  double x;
  std::memcpy(&x, blob.data() + index * 8, 8);
  return x;
}

template <class T>
void append_tensor(std::string& blob, const Tensor<T>& t) {
  for (const T& x : t.v) append_f64(blob, static_cast<double>(x));
}

template <class T>
void read_tensor(const std::string& blob, size_t& cursor, Tensor<T>& t) {
  for (T& x : t.v) x = static_cast<T>(read_f64(blob, cursor++));
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const model::ParamRegistry<T>& params, const Adam<T>& opt) {
  check<InvalidArgument>(opt.m.size() == params.entries().size(),
                         "save_checkpoint: optimizer tracks ", opt.m.size(),
                         " tensors but registry has ", params.entries().size());
  std::string blob;
  blob.reserve(static_cast<size_t>(params.total_size()) * 3 * 8);
  for (const auto& [g, p] : params.entries()) detail::append_tensor(blob, p->value);
  for (const auto& t : opt.m) detail::append_tensor(blob, t);
  for (const auto& t : opt.v) detail::append_tensor(blob, t);

  nlohmann::json j;
  j["format_version"] = meta.format_version;
  j["arch"] = meta.arch;
  j["progress"] = {{"epoch", meta.epoch},
                   {"step_in_epoch", meta.step_in_epoch},
                   {"global_step", meta.global_step},
                   {"pending_loss", meta.pending_loss},
                   {"pending_steps", meta.pending_steps}};
  j["adam"] = {{"t", meta.adam_t},
               {"lr", meta.adam_cfg.lr},
               {"beta1", meta.adam_cfg.beta1},
               {"beta2", meta.adam_cfg.beta2},
               {"eps", meta.adam_cfg.eps}};
  j["history"] = nlohmann::json::array();
  for (const auto& h : meta.history)
    j["history"].push_back({{"mean_loss", h.mean_loss}, {"steps", h.steps}});
  j["params"] = nlohmann::json::array();
  for (const auto& [g, p] : params.entries())
    j["params"].push_back({{"name", p->name},
                           {"group", model::to_string(g)},
                           {"rows", p->value.rows},
                           {"cols", p->value.cols}});
  j["blob_bytes"] = blob.size();
  j["blob_fnv1a"] = fnv1a64_hex(blob.data(), blob.size());

  atomic_write_file(path + ".bin", blob);
  atomic_write_file(path, j.dump(2) + "\n");
}

inline CheckpointMeta read_checkpoint_meta(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_binary_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("checkpoint ", path, ": invalid JSON (", e.what(), ")");
  }
  CheckpointMeta m;
  try {
    m.format_version = j.at("format_version").get<int64_t>();
    check<IoError>(m.format_version == 1, "checkpoint ", path, ": unsupported format_version ",
                   m.format_version);
    m.arch = j.at("arch");
    const auto& p = j.at("progress");
    m.epoch = p.at("epoch").get<int64_t>();
    m.step_in_epoch = p.at("step_in_epoch").get<int64_t>();
    m.global_step = p.at("global_step").get<int64_t>();
    m.pending_loss = p.at("pending_loss").get<double>();
    m.pending_steps = p.at("pending_steps").get<int64_t>();
    const auto& a = j.at("adam");
    m.adam_t = a.at("t").get<int64_t>();
    m.adam_cfg.lr = a.at("lr").get<double>();
    m.adam_cfg.beta1 = a.at("beta1").get<double>();
    m.adam_cfg.beta2 = a.at("beta2").get<double>();
    m.adam_cfg.eps = a.at("eps").get<double>();
    for (const auto& h : j.at("history"))
      m.history.push_back({h.at("mean_loss").get<double>(), h.at("steps").get<int64_t>()});
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("checkpoint ", path, ": missing or mistyped field (", e.what(), ")");
  }
  return m;
}

// Fills params and optimizer state from a saved checkpoint. The registry must
// already hold the architecture described by the metadata; any disagreement
// in parameter count, name, or shape is an error naming the first mismatch.
template <class T>
void load_checkpoint_state(const std::string& path, model::ParamRegistry<T>& params,
                           Adam<T>& opt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_binary_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("checkpoint ", path, ": invalid JSON (", e.what(), ")");
  }
  const auto& saved = j.at("params");
  const auto& entries = params.entries();
  check<IoError>(saved.size() == entries.size(), "checkpoint ", path, ": holds ", saved.size(),
                 " parameters but the model has ", entries.size());
  for (size_t k = 0; k < entries.size(); ++k) {
    const auto& [g, p] = entries[k];
    const std::string name = saved[k].at("name").get<std::string>();
    check<IoError>(name == p->name, "checkpoint ", path, ": parameter ", k, " is '", name,
                   "' but the model expects '", p->name, "'");
    const int64_t r = saved[k].at("rows").get<int64_t>();
    const int64_t c = saved[k].at("cols").get<int64_t>();
    check<IoError>(r == p->value.rows && c == p->value.cols, "checkpoint ", path, ": parameter '",
                   name, "' saved as ", r, "x", c, " but the model expects ", p->value.rows, "x",
                   p->value.cols);
  }

  const std::string blob = read_binary_file(path + ".bin");
  const size_t expect_bytes = j.at("blob_bytes").get<size_t>();
  check<IoError>(blob.size() == expect_bytes, "checkpoint ", path, ".bin: ", blob.size(),
                 " bytes but metadata records ", expect_bytes);
  const std::string sum = fnv1a64_hex(blob.data(), blob.size());
  check<IoError>(sum == j.at("blob_fnv1a").get<std::string>(), "checkpoint ", path,
                 ".bin: checksum mismatch, file is corrupt");
  const size_t need = static_cast<size_t>(params.total_size()) * 3 * 8;
  check<IoError>(blob.size() == need, "checkpoint ", path, ".bin: ", blob.size(),
                 " bytes but these shapes need ", need);

  opt.init(params.all());
  size_t cursor = 0;
  for (const auto& [g, p] : entries) detail::read_tensor(blob, cursor, p->value);
  for (auto& t : opt.m) detail::read_tensor(blob, cursor, t);
  for (auto& t : opt.v) detail::read_tensor(blob, cursor, t);
  opt.t = j.at("adam").at("t").get<int64_t>();
  opt.cfg.lr = j.at("adam").at("lr").get<double>();
  opt.cfg.beta1 = j.at("adam").at("beta1").get<double>();
  opt.cfg.beta2 = j.at("adam").at("beta2").get<double>();
  opt.cfg.eps = j.at("adam").at("eps").get<double>();
}

}  // namespace rein::expkit
