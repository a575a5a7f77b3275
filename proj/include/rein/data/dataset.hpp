#pragma once

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rein/sim/system.hpp"

namespace rein::data {

static_assert(std::endian::native == std::endian::little,
              "dataset payloads are little-endian; big-endian hosts unsupported");

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  sim::SystemKind kind = sim::SystemKind::springs;
  int32_t n_objects = 0;
  int64_t frames = 0;  // per episode
  double dt_effective = 0.1;
  uint64_t seed = 0;
  std::vector<sim::Episode> episodes;

  int64_t n_episodes() const { return static_cast<int64_t>(episodes.size()); }
};

namespace detail {

// "data/train", "data/train.json" and "data/train.bin" all name the same
// dataset pair.
inline std::filesystem::path stem_path(const std::filesystem::path& p) {
  if (p.extension() == ".json" || p.extension() == ".bin") {
    auto q = p;
    q.replace_extension();
    return q;
  }
  return p;
}

inline int64_t traj_floats(int32_t n, int64_t frames) { return frames * n * 4; }
inline int64_t graph_cells(int32_t n) { return static_cast<int64_t>(n) * n; }

inline int64_t payload_bytes(int32_t n, int64_t frames, int64_t episodes) {
  const int64_t per_ep =
      traj_floats(n, frames) * 4 + graph_cells(n) * 1 + graph_cells(n) * 4;
  return per_ep * episodes;
}

}  // namespace detail

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  check<InvalidArgument>(!ds.episodes.empty(), "write_dataset: empty dataset");
  for (const auto& ep : ds.episodes) {
    check<InvalidArgument>(ep.graph.n == ds.n_objects && ep.traj.rows == ds.frames &&
                               ep.traj.cols == 4 * ds.n_objects,
                           "write_dataset: episode shape does not match header");
  }
  const auto stem = detail::stem_path(path);
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  nlohmann::json meta{{"format_version", kDatasetFormatVersion},
                      {"kind", sim::to_string(ds.kind)},
                      {"n_objects", ds.n_objects},
                      {"n_episodes", ds.n_episodes()},
                      {"frames", ds.frames},
                      {"dt_effective", ds.dt_effective},
                      {"seed", ds.seed}};
  {
    std::ofstream js(stem.string() + ".json");
    check<IoError>(js.good(), "write_dataset: cannot open ", stem.string(), ".json");
    js << meta.dump(2) << "\n";
    check<IoError>(js.good(), "write_dataset: failed writing ", stem.string(), ".json");
  }

  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  check<IoError>(bin.good(), "write_dataset: cannot open ", stem.string(), ".bin");
  for (const auto& ep : ds.episodes) {
    bin.write(reinterpret_cast<const char*>(ep.traj.v.data()),
              static_cast<std::streamsize>(ep.traj.v.size() * sizeof(float)));
    bin.write(reinterpret_cast<const char*>(ep.graph.type.data()),
              static_cast<std::streamsize>(ep.graph.type.size()));
    bin.write(reinterpret_cast<const char*>(ep.graph.param.data()),
              static_cast<std::streamsize>(ep.graph.param.size() * sizeof(float)));
  }
  check<IoError>(bin.good(), "write_dataset: failed writing ", stem.string(), ".bin");
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  const auto stem = detail::stem_path(path);
  const std::string jpath = stem.string() + ".json";
  const std::string bpath = stem.string() + ".bin";

  std::ifstream js(jpath);
  check<IoError>(js.good(), "read_dataset: cannot open ", jpath);
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("read_dataset: bad sidecar ", jpath, ": ", e.what());
  }

  Dataset ds;
  try {
    const int ver = meta.at("format_version").get<int>();
    check<IoError>(ver == kDatasetFormatVersion, "read_dataset: unsupported format version ", ver);
    ds.kind = sim::parse_system_kind(meta.at("kind").get<std::string>());
    ds.n_objects = meta.at("n_objects").get<int32_t>();
    ds.frames = meta.at("frames").get<int64_t>();
    ds.dt_effective = meta.at("dt_effective").get<double>();
    ds.seed = meta.at("seed").get<uint64_t>();
    const int64_t n_eps = meta.at("n_episodes").get<int64_t>();
    check<IoError>(ds.n_objects >= 1 && ds.frames >= 1 && n_eps >= 1,
                   "read_dataset: degenerate header in ", jpath);
    ds.episodes.resize(static_cast<size_t>(n_eps));
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("read_dataset: sidecar ", jpath, " missing field: ", e.what());
  }

  std::ifstream bin(bpath, std::ios::binary);
  check<IoError>(bin.good(), "read_dataset: cannot open ", bpath);
  bin.seekg(0, std::ios::end);
  const int64_t actual = static_cast<int64_t>(bin.tellg());
  const int64_t expect = detail::payload_bytes(ds.n_objects, ds.frames, ds.n_episodes());
  check<IoError>(actual == expect, "read_dataset: ", bpath, " is ", actual,
                 " bytes, header implies ", expect);
  bin.seekg(0, std::ios::beg);

  for (auto& ep : ds.episodes) {
    ep.traj = Tensor<float>(ds.frames, 4 * ds.n_objects);
    ep.graph = sim::RelationGraph(ds.n_objects);
    bin.read(reinterpret_cast<char*>(ep.traj.v.data()),
             static_cast<std::streamsize>(ep.traj.v.size() * sizeof(float)));
    bin.read(reinterpret_cast<char*>(ep.graph.type.data()),
             static_cast<std::streamsize>(ep.graph.type.size()));
    bin.read(reinterpret_cast<char*>(ep.graph.param.data()),
             static_cast<std::streamsize>(ep.graph.param.size() * sizeof(float)));
  }
  check<IoError>(bin.good(), "read_dataset: truncated read from ", bpath);
  return ds;
}

}  // namespace rein::data
