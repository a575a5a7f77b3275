#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rein/core/error.hpp"
#include "rein/core/random.hpp"
#include "rein/core/tensor.hpp"

namespace rein::sim {

enum class SystemKind { springs, charged, multiball };

inline int num_edge_types(SystemKind k) {
  return k == SystemKind::multiball ? 3 : 2;
}

// multiball category ids
inline constexpr uint8_t kEdgeNone = 0;
inline constexpr uint8_t kEdgeRod = 1;
inline constexpr uint8_t kEdgeSpring = 2;

inline std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::springs: return "springs";
    case SystemKind::charged: return "charged";
    case SystemKind::multiball: return "multiball";
  }
  fail<InvalidArgument>("unknown system kind");
}

inline SystemKind parse_system_kind(const std::string& s) {
  if (s == "springs") return SystemKind::springs;
  if (s == "charged") return SystemKind::charged;
  if (s == "multiball") return SystemKind::multiball;
  fail<InvalidArgument>("unknown system kind '", s, "', expected springs|charged|multiball");
}

// Pairwise relation structure of one episode. Types are symmetric with a
// zero diagonal; 0 always means "no relation". The param matrix carries the
// continuous coefficients the forces need. For springs it is the (symmetric)
// stiffness, for charged the (symmetric) charge product q_i*q_j. Multiball
// samples both a rest length and a stiffness per edge, and the single n x n
// float block in the file format only has two slots per unordered pair, so
// the upper triangle [min][max] holds the length and the lower [max][min]
// the stiffness.
struct RelationGraph {
  int32_t n = 0;
  std::vector<uint8_t> type;
  std::vector<float> param;

  RelationGraph() = default;
  explicit RelationGraph(int32_t n_objects)
      : n(n_objects),
        type(static_cast<size_t>(n_objects) * n_objects, 0),
        param(static_cast<size_t>(n_objects) * n_objects, 0.f) {
    check<InvalidArgument>(n_objects >= 1, "relation graph needs at least one object");
  }

  uint8_t& type_at(int32_t i, int32_t j) { return type[static_cast<size_t>(i) * n + j]; }
  uint8_t type_at(int32_t i, int32_t j) const { return type[static_cast<size_t>(i) * n + j]; }
  float& param_at(int32_t i, int32_t j) { return param[static_cast<size_t>(i) * n + j]; }
  float param_at(int32_t i, int32_t j) const { return param[static_cast<size_t>(i) * n + j]; }

  bool symmetric_types() const {
    for (int32_t i = 0; i < n; ++i) {
      if (type_at(i, i) != 0) return false;
      for (int32_t j = i + 1; j < n; ++j)
        if (type_at(i, j) != type_at(j, i)) return false;
    }
    return true;
  }
};

inline RelationGraph sample_relation_graph(SystemKind kind, int32_t n, RandomStream& rng) {
  RelationGraph g(n);
  switch (kind) {
    case SystemKind::springs: {
      for (int32_t i = 0; i < n; ++i)
        for (int32_t j = i + 1; j < n; ++j)
          if (rng.bernoulli(0.5)) {
            g.type_at(i, j) = g.type_at(j, i) = 1;
            g.param_at(i, j) = g.param_at(j, i) = 0.1f;
          }
      break;
    }
    case SystemKind::charged: {
      std::vector<float> q(static_cast<size_t>(n));
      for (auto& c : q) c = rng.bernoulli(0.5) ? 1.f : -1.f;
      for (int32_t i = 0; i < n; ++i)
        for (int32_t j = i + 1; j < n; ++j) {
          g.type_at(i, j) = g.type_at(j, i) = 1;
          g.param_at(i, j) = g.param_at(j, i) =
              q[static_cast<size_t>(i)] * q[static_cast<size_t>(j)];
        }
      break;
    }
    case SystemKind::multiball: {
      for (int32_t i = 0; i < n; ++i)
        for (int32_t j = i + 1; j < n; ++j) {
          const uint8_t t = static_cast<uint8_t>(rng.uniform_int(3));
          g.type_at(i, j) = g.type_at(j, i) = t;
          if (t != kEdgeNone) {
            g.param_at(i, j) = static_cast<float>(rng.uniform(0.5, 2.0));  // length
            g.param_at(j, i) = static_cast<float>(rng.uniform(0.5, 2.0));  // stiffness
          }
        }
      break;
    }
  }
  return g;
}

// Flat planar state: x, y, vx, vy per object.
struct BodyState {
  std::vector<double> pos;  // 2n, interleaved x,y
  std::vector<double> vel;  // 2n

  explicit BodyState(int32_t n = 0) : pos(static_cast<size_t>(2 * n)), vel(2 * n) {}
  int32_t n_objects() const { return static_cast<int32_t>(pos.size() / 2); }

  bool finite() const {
    for (double v : pos)
      if (!std::isfinite(v)) return false;
    for (double v : vel)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Positions clustered near the box center (sigma 0.5), per-object speed
// exactly 0.5 in a random direction: interactions, not wall bounces, drive
// the dynamics.
inline BodyState sample_initial_state(int32_t n, RandomStream& rng, double /*box_half*/ = 5.0) {
  BodyState s(n);
  for (int32_t i = 0; i < 2 * n; ++i) s.pos[static_cast<size_t>(i)] = 0.5 * rng.normal();
  for (int32_t i = 0; i < n; ++i) {
    const double vx = rng.normal(), vy = rng.normal();
    const double norm = std::sqrt(vx * vx + vy * vy);
    const double scale = norm > 1e-12 ? 0.5 / norm : 0.0;
    s.vel[static_cast<size_t>(2 * i)] = vx * scale;
    s.vel[static_cast<size_t>(2 * i + 1)] = vy * scale;
  }
  return s;
}

// One simulated episode at the stored (subsampled) rate. Each trajectory row
// is a frame with columns [object][x, y, vx, vy].
struct Episode {
  Tensor<float> traj;
  RelationGraph graph;

  int64_t frames() const { return traj.rows; }
  int32_t n_objects() const { return graph.n; }
};

}  // namespace rein::sim
