#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "rein/data/dataset.hpp"
#include "rein/sim/generate.hpp"
#include "rein/sim/integrator.hpp"

using namespace rein;
using namespace rein::sim;

namespace {

RelationGraph empty_graph(int32_t n) { return RelationGraph(n); }

RelationGraph pair_spring(double k) {
  RelationGraph g(2);
  g.type_at(0, 1) = g.type_at(1, 0) = 1;
  g.param_at(0, 1) = g.param_at(1, 0) = static_cast<float>(k);
  return g;
}

// deliberately different code path from total_energy for the oracle
double energy_reference(SystemKind kind, const RelationGraph& g, const BodyState& s,
                        const SimParams& p) {
  double kin = 0.5 * std::inner_product(s.vel.begin(), s.vel.end(), s.vel.begin(), 0.0);
  double pot = 0.0;
  for (int32_t j = 0; j < g.n; ++j)
    for (int32_t i = 0; i < j; ++i) {
      const double dx = s.pos[2 * static_cast<size_t>(j)] - s.pos[2 * static_cast<size_t>(i)];
      const double dy =
          s.pos[2 * static_cast<size_t>(j) + 1] - s.pos[2 * static_cast<size_t>(i) + 1];
      const double r = std::hypot(dx, dy);
      if (kind == SystemKind::charged) {
        pot += p.coulomb * g.param_at(i, j) / std::sqrt(r * r + p.softening * p.softening);
      } else if (g.type_at(i, j) != 0) {
        if (kind == SystemKind::springs) {
          pot += 0.5 * g.param_at(i, j) * r * r;
        } else {
          const double k =
              g.param_at(j, i) * (g.type_at(i, j) == kEdgeRod ? p.rod_scale : 1.0);
          pot += 0.5 * k * std::pow(r - g.param_at(i, j), 2);
        }
      }
    }
  return kin + pot;
}

}  // namespace

TEST_CASE("free motion advances by velocity times dt") {
  BodyState s(3);
  RandomStream rng(1);
  for (auto& x : s.pos) x = rng.uniform(-2, 2);
  for (auto& v : s.vel) v = rng.uniform(-1, 1);
  BodyState before = s;

  Integrator integ(SystemKind::springs, empty_graph(3));
  integ.step(s, 0.001);
  for (size_t i = 0; i < s.pos.size(); ++i) {
    REQUIRE(s.pos[i] == before.pos[i] + 0.001 * before.vel[i]);
    REQUIRE(s.vel[i] == before.vel[i]);
  }
}

TEST_CASE("two-body spring oscillates at the closed-form period") {
  const double k = 0.1;
  BodyState s(2);
  s.pos = {-1.0, 0.0, 1.0, 0.0};
  s.vel = {0.0, 0.0, 0.0, 0.0};

  Integrator integ(SystemKind::springs, pair_spring(k));
  const double dt = 0.001;
  std::vector<double> down;  // times of downward zero crossings, one per period
  double prev = s.pos[2] - s.pos[0];
  for (int step = 1; step <= 60000; ++step) {
    integ.step(s, dt);
    const double d = s.pos[2] - s.pos[0];
    if (prev > 0 && d <= 0) down.push_back(dt * ((step - 1) + prev / (prev - d)));
    prev = d;
  }
  REQUIRE(down.size() >= 3);
  const double period = (down.back() - down.front()) / static_cast<double>(down.size() - 1);
  const double want = 2 * M_PI / std::sqrt(2 * k);
  REQUIRE_THAT(period, Catch::Matchers::WithinRel(want, 0.01));
}

TEST_CASE("spring energy drift stays within 1e-4 over 1e4 steps") {
  RandomStream rng(7);
  RelationGraph g = sample_relation_graph(SystemKind::springs, 5, rng);
  BodyState s = sample_initial_state(5, rng);
  SimParams p;
  p.box_half = 100.0;  // keep walls out of play

  Integrator integ(SystemKind::springs, g, p);
  const double e0 = total_energy(SystemKind::springs, g, s, p);
  for (int i = 0; i < 10000; ++i) integ.step(s, p.dt);
  const double e1 = total_energy(SystemKind::springs, g, s, p);
  REQUIRE(std::abs(e1 - e0) / std::abs(e0) < 1e-4);
}

TEST_CASE("isolated pair conserves momentum") {
  RandomStream rng(8);
  BodyState s(2);
  for (auto& x : s.pos) x = rng.uniform(-1, 1);
  for (auto& v : s.vel) v = rng.uniform(-1, 1);
  SimParams p;
  p.box_half = 1000.0;

  Integrator integ(SystemKind::springs, pair_spring(0.5), p);
  const double px0 = s.vel[0] + s.vel[2], py0 = s.vel[1] + s.vel[3];
  const double scale = std::max({1.0, std::abs(px0), std::abs(py0)});
  for (int i = 0; i < 1000; ++i) integ.step(s, p.dt);
  REQUIRE(std::abs(s.vel[0] + s.vel[2] - px0) / scale < 1e-8);
  REQUIRE(std::abs(s.vel[1] + s.vel[3] - py0) / scale < 1e-8);
}

TEST_CASE("total energy matches an independent re-derivation") {
  RandomStream rng(9);
  SimParams p;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = static_cast<SystemKind>(trial % 3);
    RelationGraph g = sample_relation_graph(kind, 4, rng);
    BodyState s = sample_initial_state(4, rng);
    const double a = total_energy(kind, g, s, p);
    const double b = energy_reference(kind, g, s, p);
    REQUIRE_THAT(a, Catch::Matchers::WithinAbs(b, 1e-12));
  }

  BodyState rest(3);
  REQUIRE(total_energy(SystemKind::springs, empty_graph(3), rest) == 0.0);
  BodyState one(1);
  one.vel = {2.0, 0.0};
  REQUIRE(total_energy(SystemKind::springs, empty_graph(1), one) == 2.0);
}

TEST_CASE("wall reflection keeps positions inside and speed unchanged") {
  BodyState s(1);
  s.pos = {4.9, 0.0};
  s.vel = {0.5, 0.0};
  Integrator integ(SystemKind::springs, empty_graph(1));
  for (int i = 0; i < 2000; ++i) {
    integ.step(s, 0.001);
    REQUIRE(std::abs(s.pos[0]) <= 5.0);
    REQUIRE(std::abs(s.vel[0]) == 0.5);
  }
  REQUIRE(s.vel[0] < 0);  // bounced back
}

TEST_CASE("relation graph sampling statistics") {
  SECTION("springs edges are symmetric bernoulli(0.5)") {
    int64_t edges = 0, pairs = 0;
    for (int rep = 0; rep < 10000; ++rep) {
      RandomStream rng = RandomStream::derive(100, {static_cast<uint64_t>(rep)});
      RelationGraph g = sample_relation_graph(SystemKind::springs, 5, rng);
      REQUIRE(g.symmetric_types());
      for (int32_t i = 0; i < 5; ++i)
        for (int32_t j = i + 1; j < 5; ++j) {
          ++pairs;
          if (g.type_at(i, j) == 1) {
            ++edges;
            REQUIRE(g.param_at(i, j) == 0.1f);
          }
        }
    }
    // chi-square with 1 dof at alpha=0.01: critical value 6.635
    const double e = static_cast<double>(pairs) / 2;
    const double chi2 = std::pow(edges - e, 2) / e + std::pow((pairs - edges) - e, 2) / e;
    REQUIRE(chi2 < 6.635);
  }

  SECTION("multiball types are uniform over three categories") {
    int64_t counts[3] = {0, 0, 0};
    int64_t pairs = 0;
    for (int rep = 0; rep < 10000; ++rep) {
      RandomStream rng = RandomStream::derive(200, {static_cast<uint64_t>(rep)});
      RelationGraph g = sample_relation_graph(SystemKind::multiball, 5, rng);
      REQUIRE(g.symmetric_types());
      for (int32_t i = 0; i < 5; ++i)
        for (int32_t j = i + 1; j < 5; ++j) {
          ++counts[g.type_at(i, j)];
          ++pairs;
          if (g.type_at(i, j) != kEdgeNone) {
            REQUIRE(g.param_at(i, j) >= 0.5f);
            REQUIRE(g.param_at(i, j) <= 2.0f);
            REQUIRE(g.param_at(j, i) >= 0.5f);
            REQUIRE(g.param_at(j, i) <= 2.0f);
          }
        }
    }
    for (int t = 0; t < 3; ++t)
      REQUIRE_THAT(static_cast<double>(counts[t]) / static_cast<double>(pairs),
                   Catch::Matchers::WithinAbs(1.0 / 3.0, 0.03));
  }

  SECTION("charged params are consistent pairwise charge products") {
    for (int rep = 0; rep < 100; ++rep) {
      RandomStream rng = RandomStream::derive(300, {static_cast<uint64_t>(rep)});
      RelationGraph g = sample_relation_graph(SystemKind::charged, 5, rng);
      for (int32_t i = 0; i < 5; ++i)
        for (int32_t j = i + 1; j < 5; ++j) {
          REQUIRE(g.type_at(i, j) == 1);
          REQUIRE(std::abs(g.param_at(i, j)) == 1.0f);
          // any triangle of charge products multiplies to +1
          for (int32_t k = j + 1; k < 5; ++k)
            REQUIRE(g.param_at(i, j) * g.param_at(j, k) * g.param_at(i, k) == 1.0f);
        }
    }
  }

  SECTION("same seed yields identical graphs") {
    RandomStream a = RandomStream::derive(7, {0});
    RandomStream b = RandomStream::derive(7, {0});
    RelationGraph ga = sample_relation_graph(SystemKind::multiball, 6, a);
    RelationGraph gb = sample_relation_graph(SystemKind::multiball, 6, b);
    REQUIRE(ga.type == gb.type);
    REQUIRE(ga.param == gb.param);
  }
}

TEST_CASE("simulate stores every subsample-th frame") {
  RandomStream rng(11);
  RelationGraph g = sample_relation_graph(SystemKind::springs, 5, rng);
  BodyState init = sample_initial_state(5, rng);
  SimParams p;
  Episode ep = simulate(SystemKind::springs, g, init, 5000, p);
  REQUIRE(ep.frames() == 50);
  REQUIRE(ep.traj.cols == 20);
  REQUIRE(ep.traj.all_finite());

  Episode ep2 = simulate(SystemKind::springs, g, init, 5000, p);
  REQUIRE(ep.traj.v == ep2.traj.v);

  REQUIRE_THROWS_AS(simulate(SystemKind::springs, g, init, 50, SimParams{.subsample = 100}),
                    InvalidArgument);
}

TEST_CASE("charged trajectories stay finite across 1000 seeds") {
  GenerateSpec spec;
  spec.kind = SystemKind::charged;
  spec.n_objects = 5;
  spec.n_episodes = 1000;
  spec.raw_steps = 4900;
  spec.seed = 12345;
  GenerateResult res = generate_dataset(spec);
  for (const auto& ep : res.dataset.episodes) REQUIRE(ep.traj.all_finite());
  REQUIRE(res.resamples == 0);
}

TEST_CASE("integration blow-up raises and generation resamples around it") {
  // a rod this stiff is far past the stable step size
  SimParams hot;
  hot.rod_scale = 1e10;

  RelationGraph g(2);
  g.type_at(0, 1) = g.type_at(1, 0) = kEdgeRod;
  g.param_at(0, 1) = 1.0f;  // length
  g.param_at(1, 0) = 1.0f;  // stiffness
  BodyState s(2);
  s.pos = {-1.0, 0.0, 1.1, 0.0};
  REQUIRE_THROWS_AS(simulate(SystemKind::multiball, g, s, 200, hot), NumericError);

  // pick a seed whose first attempt contains a rod, then confirm the
  // generator retries with later sub-seeds until a stable draw appears
  GenerateSpec spec;
  spec.kind = SystemKind::multiball;
  spec.n_objects = 3;
  spec.raw_steps = 200;
  spec.params = hot;
  bool exercised = false;
  for (uint64_t seed = 0; seed < 50 && !exercised; ++seed) {
    RandomStream rng = RandomStream::derive(seed, {0, 0});
    RelationGraph first = sample_relation_graph(SystemKind::multiball, 3, rng);
    bool has_rod = false;
    for (uint8_t t : first.type) has_rod = has_rod || t == kEdgeRod;
    if (!has_rod) continue;
    spec.seed = seed;
    int64_t resamples = 0;
    Episode ep = generate_episode(spec, 0, &resamples);
    REQUIRE(resamples >= 1);
    REQUIRE(ep.traj.all_finite());
    exercised = true;
  }
  REQUIRE(exercised);
}

TEST_CASE("dataset round trip is bitwise and validates length") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rein_test_ds";
  fs::remove_all(dir);

  GenerateSpec spec;
  spec.kind = SystemKind::multiball;
  spec.n_objects = 4;
  spec.n_episodes = 6;
  spec.raw_steps = 900;
  spec.seed = 99;
  data::Dataset ds = generate_dataset(spec).dataset;
  REQUIRE(ds.frames == 9);

  data::write_dataset(dir / "d", ds);
  data::Dataset back = data::read_dataset(dir / "d.json");
  REQUIRE(back.kind == ds.kind);
  REQUIRE(back.n_objects == ds.n_objects);
  REQUIRE(back.n_episodes() == ds.n_episodes());
  for (size_t i = 0; i < ds.episodes.size(); ++i) {
    REQUIRE(back.episodes[i].traj.v == ds.episodes[i].traj.v);
    REQUIRE(back.episodes[i].graph.type == ds.episodes[i].graph.type);
    REQUIRE(back.episodes[i].graph.param == ds.episodes[i].graph.param);
  }

  // writing the same dataset twice produces identical bytes
  data::write_dataset(dir / "d2", ds);
  std::ifstream f1(dir / "d.bin", std::ios::binary), f2(dir / "d2.bin", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  REQUIRE(b1 == b2);

  // truncated payload must be rejected
  fs::resize_file(dir / "d.bin", fs::file_size(dir / "d.bin") - 8);
  REQUIRE_THROWS_AS(data::read_dataset(dir / "d"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("generation is identical for any worker count") {
  GenerateSpec spec;
  spec.kind = SystemKind::springs;
  spec.n_objects = 5;
  spec.n_episodes = 12;
  spec.raw_steps = 500;
  spec.seed = 321;

  setenv("REIN_NUM_WORKERS", "1", 1);
  data::Dataset a = generate_dataset(spec).dataset;
  setenv("REIN_NUM_WORKERS", "4", 1);
  data::Dataset b = generate_dataset(spec).dataset;
  unsetenv("REIN_NUM_WORKERS");

  for (size_t i = 0; i < a.episodes.size(); ++i) {
    REQUIRE(a.episodes[i].traj.v == b.episodes[i].traj.v);
    REQUIRE(a.episodes[i].graph.type == b.episodes[i].graph.type);
  }
}

TEST_CASE("worker override rejects garbage") {
  setenv("REIN_NUM_WORKERS", "zero", 1);
  REQUIRE_THROWS_AS(num_workers_from_env(), ConfigError);
  setenv("REIN_NUM_WORKERS", "0", 1);
  REQUIRE_THROWS_AS(num_workers_from_env(), ConfigError);
  unsetenv("REIN_NUM_WORKERS");
}
