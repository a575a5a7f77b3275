#pragma once

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "rein/data/dataset.hpp"
#include "rein/sim/integrator.hpp"

namespace rein::sim {

struct GenerateSpec {
  SystemKind kind = SystemKind::springs;
  int32_t n_objects = 5;
  int64_t n_episodes = 1000;
  int64_t raw_steps = 4900;  // 49 stored frames at subsample 100
  uint64_t seed = 0;
  SimParams params;
};

inline int num_workers_from_env() {
  const char* env = std::getenv("REIN_NUM_WORKERS");
  if (env != nullptr) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    check<ConfigError>(end != env && *end == '\0' && v >= 1,
                       "REIN_NUM_WORKERS must be a positive integer, got '", env, "'");
    return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Each episode derives its own stream from (seed, index, attempt), so the
// result is identical for any worker count and an unstable draw only costs a
// resample of that one episode.
inline Episode generate_episode(const GenerateSpec& spec, int64_t index, int64_t* resamples) {
  for (int64_t attempt = 0;; ++attempt) {
    check<NumericError>(attempt < 100, "episode ", index, ": still unstable after 100 resamples");
    RandomStream rng = RandomStream::derive(spec.seed, {static_cast<uint64_t>(index),
                                                        static_cast<uint64_t>(attempt)});
    RelationGraph graph = sample_relation_graph(spec.kind, spec.n_objects, rng);
    BodyState init = sample_initial_state(spec.n_objects, rng, spec.params.box_half);
    try {
      return simulate(spec.kind, std::move(graph), std::move(init), spec.raw_steps, spec.params);
    } catch (const NumericError&) {
      if (resamples != nullptr) ++*resamples;
    }
  }
}

struct GenerateResult {
  data::Dataset dataset;
  int64_t resamples = 0;
};

inline GenerateResult generate_dataset(const GenerateSpec& spec) {
  check<InvalidArgument>(spec.n_episodes >= 1, "generate_dataset: need at least one episode");
  check<InvalidArgument>(spec.raw_steps >= spec.params.subsample,
                         "generate_dataset: raw_steps ", spec.raw_steps, " < subsample ",
                         spec.params.subsample);
  GenerateResult out;
  out.dataset.kind = spec.kind;
  out.dataset.n_objects = spec.n_objects;
  out.dataset.frames = spec.raw_steps / spec.params.subsample;
  out.dataset.dt_effective = spec.params.dt * spec.params.subsample;
  out.dataset.seed = spec.seed;
  out.dataset.episodes.resize(static_cast<size_t>(spec.n_episodes));

  const int workers = std::min<int64_t>(num_workers_from_env(), spec.n_episodes);
  if (workers <= 1) {
    for (int64_t i = 0; i < spec.n_episodes; ++i)
      out.dataset.episodes[static_cast<size_t>(i)] = generate_episode(spec, i, &out.resamples);
    return out;
  }

  std::atomic<int64_t> next{0};
  std::vector<int64_t> resamples(static_cast<size_t>(workers), 0);
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::string error_msg;
  std::mutex error_mu;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const int64_t i = next.fetch_add(1);
        if (i >= spec.n_episodes || failed.load()) return;
        try {
          out.dataset.episodes[static_cast<size_t>(i)] =
              generate_episode(spec, i, &resamples[static_cast<size_t>(w)]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(error_mu);
          failed.store(true);
          if (error_msg.empty()) error_msg = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  check<NumericError>(!failed.load(), "generate_dataset: ", error_msg);
  for (int64_t r : resamples) out.resamples += r;
  return out;
}

}  // namespace rein::sim
