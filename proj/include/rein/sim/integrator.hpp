#pragma once

#include <cmath>

#include "rein/sim/system.hpp"

namespace rein::sim {

struct SimParams {
  double dt = 0.001;
  int32_t subsample = 100;
  double box_half = 5.0;
  double softening = 0.1;    // charged force softening epsilon
  double coulomb = 1.0;      // charged force scale
  double rod_scale = 100.0;  // rod stiffness multiplier over its sampled base
};

namespace detail {

// Pairwise forces accumulated antisymmetrically so Newton's third law holds
// exactly in floating point.
inline void accumulate_forces(SystemKind kind, const RelationGraph& g,
                              const std::vector<double>& pos, const SimParams& p,
                              std::vector<double>& force) {
  std::fill(force.begin(), force.end(), 0.0);
  const int32_t n = g.n;
  for (int32_t i = 0; i < n; ++i) {
    for (int32_t j = i + 1; j < n; ++j) {
      if (g.type_at(i, j) == 0 && kind != SystemKind::charged) continue;
      const double dx = pos[2 * static_cast<size_t>(i)] - pos[2 * static_cast<size_t>(j)];
      const double dy = pos[2 * static_cast<size_t>(i) + 1] - pos[2 * static_cast<size_t>(j) + 1];
      double fx = 0.0, fy = 0.0;
      switch (kind) {
        case SystemKind::springs: {
          const double k = g.param_at(i, j);
          fx = -k * dx;
          fy = -k * dy;
          break;
        }
        case SystemKind::charged: {
          const double qq = g.param_at(i, j);
          const double r2 = dx * dx + dy * dy + p.softening * p.softening;
          const double inv = p.coulomb * qq / (r2 * std::sqrt(r2));
          fx = inv * dx;
          fy = inv * dy;
          break;
        }
        case SystemKind::multiball: {
          const double len = g.param_at(i, j);
          double k = g.param_at(j, i);
          if (g.type_at(i, j) == kEdgeRod) k *= p.rod_scale;
          const double r = std::sqrt(dx * dx + dy * dy) + 1e-12;
          const double mag = -k * (r - len) / r;
          fx = mag * dx;
          fy = mag * dy;
          break;
        }
      }
      force[2 * static_cast<size_t>(i)] += fx;
      force[2 * static_cast<size_t>(i) + 1] += fy;
      force[2 * static_cast<size_t>(j)] -= fx;
      force[2 * static_cast<size_t>(j) + 1] -= fy;
    }
  }
}

inline void reflect_walls(BodyState& s, double box_half) {
  for (size_t i = 0; i < s.pos.size(); ++i) {
    if (s.pos[i] > box_half) {
      s.pos[i] = 2 * box_half - s.pos[i];
      s.vel[i] = -s.vel[i];
    } else if (s.pos[i] < -box_half) {
      s.pos[i] = -2 * box_half - s.pos[i];
      s.vel[i] = -s.vel[i];
    }
  }
}

}  // namespace detail

// Scratch buffers reused across steps of one episode.
struct Integrator {
  SystemKind kind;
  RelationGraph graph;
  SimParams params;
  std::vector<double> force;

  Integrator(SystemKind k, RelationGraph g, SimParams p = {})
      : kind(k), graph(std::move(g)), params(p), force(static_cast<size_t>(2 * graph.n)) {}

  // Velocity Verlet with elastic wall reflection after the position update.
  void step(BodyState& s, double dt) {
    check<InvalidArgument>(dt > 0, "step: dt must be positive, got ", dt);
    const size_t d = s.pos.size();
    detail::accumulate_forces(kind, graph, s.pos, params, force);
    for (size_t i = 0; i < d; ++i) s.vel[i] += 0.5 * dt * force[i];
    for (size_t i = 0; i < d; ++i) s.pos[i] += dt * s.vel[i];
    detail::reflect_walls(s, params.box_half);
    detail::accumulate_forces(kind, graph, s.pos, params, force);
    for (size_t i = 0; i < d; ++i) s.vel[i] += 0.5 * dt * force[i];
    for (size_t i = 0; i < d; ++i) {
      if (!std::isfinite(s.pos[i]) || !std::isfinite(s.vel[i]))
        fail<NumericError>("integration diverged at object ", i / 2);
    }
  }
};

inline double total_energy(SystemKind kind, const RelationGraph& g, const BodyState& s,
                           const SimParams& p = {}) {
  double e = 0.0;
  for (double v : s.vel) e += 0.5 * v * v;
  const int32_t n = g.n;
  for (int32_t i = 0; i < n; ++i) {
    for (int32_t j = i + 1; j < n; ++j) {
      if (g.type_at(i, j) == 0 && kind != SystemKind::charged) continue;
      const double dx = s.pos[2 * static_cast<size_t>(i)] - s.pos[2 * static_cast<size_t>(j)];
      const double dy =
          s.pos[2 * static_cast<size_t>(i) + 1] - s.pos[2 * static_cast<size_t>(j) + 1];
      const double r2 = dx * dx + dy * dy;
      switch (kind) {
        case SystemKind::springs:
          e += 0.5 * g.param_at(i, j) * r2;
          break;
        case SystemKind::charged:
          e += p.coulomb * g.param_at(i, j) / std::sqrt(r2 + p.softening * p.softening);
          break;
        case SystemKind::multiball: {
          double k = g.param_at(j, i);
          if (g.type_at(i, j) == kEdgeRod) k *= p.rod_scale;
          const double stretch = std::sqrt(r2) - g.param_at(i, j);
          e += 0.5 * k * stretch * stretch;
          break;
        }
      }
    }
  }
  return e;
}

// Integrates raw_steps and stores every subsample-th frame, so the stored
// trajectory has raw_steps / subsample rows at dt_effective = dt * subsample.
inline Episode simulate(SystemKind kind, RelationGraph graph, BodyState init, int64_t raw_steps,
                        const SimParams& p = {}) {
  check<InvalidArgument>(raw_steps >= p.subsample && p.subsample >= 1,
                         "simulate: need raw_steps >= subsample >= 1, got ", raw_steps, " and ",
                         p.subsample);
  const int32_t n = graph.n;
  const int64_t frames = raw_steps / p.subsample;
  Episode ep;
  ep.graph = std::move(graph);
  ep.traj = Tensor<float>(frames, 4 * n);
  Integrator integ(kind, ep.graph, p);
  BodyState s = std::move(init);
  for (int64_t f = 0; f < frames; ++f) {
    for (int32_t k = 0; k < p.subsample; ++k) integ.step(s, p.dt);
    for (int32_t o = 0; o < n; ++o) {
      ep.traj.at(f, 4 * o + 0) = static_cast<float>(s.pos[2 * static_cast<size_t>(o)]);
      ep.traj.at(f, 4 * o + 1) = static_cast<float>(s.pos[2 * static_cast<size_t>(o) + 1]);
      ep.traj.at(f, 4 * o + 2) = static_cast<float>(s.vel[2 * static_cast<size_t>(o)]);
      ep.traj.at(f, 4 * o + 3) = static_cast<float>(s.vel[2 * static_cast<size_t>(o) + 1]);
    }
  }
  return ep;
}

}  // namespace rein::sim
