#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rein/exp/checkpoint.hpp"
#include "rein/exp/config.hpp"
#include "rein/exp/manifest.hpp"
#include "rein/exp/plots.hpp"
#include "rein/exp/runner.hpp"

using namespace rein;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("rein_expkit_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) { return expkit::read_binary_file(p.string()); }

// minimal XML well-formedness scan: every opened tag is closed in order
bool svg_well_formed(const std::string& s) {
  std::vector<std::string> stack;
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      ++i;
      continue;
    }
    const size_t close = s.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = s.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;  // self-closing
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const size_t sp = tag.find_first_of(" \t\n");
    stack.push_back(sp == std::string::npos ? tag : tag.substr(0, sp));
  }
  return stack.empty();
}

expkit::ExperimentConfig parse_config(const std::string& text) {
  std::istringstream is(text);
  return expkit::ExperimentConfig::parse(is);
}

const char* kTinyConfig = R"(
# smoke experiment
[system]
kind = springs
n_objects = 3

[sim]
dt = 0.002          ; coarse integrator
subsample = 50
raw_steps = 500
test_raw_steps = 800
train_episodes = 4
test_episodes = 3
seed = 5

[model]
n_levels = 3
mid_groups = 2
neuron_dim = 8
edge_types = 3
heads = 2
per_step_edges = false
hard_edges = true
ablation = p_learned
init_seed = 9
tau_start = 4
tau_end = 0.7
kl_warmup_epochs = 2

[train]
lr = 0.002
batch = 2
epochs = 3
clip = 7
seed = 21

[eval]
horizons = 1, 3, 5
context = 4
n_seeds = 2
sample_mode = true
)";

data::Dataset tiny_dataset(int32_t n_objects, int64_t episodes, int64_t frames, uint64_t seed) {
  sim::GenerateSpec g;
  g.kind = sim::SystemKind::springs;
  g.n_objects = n_objects;
  g.n_episodes = episodes;
  g.raw_steps = frames * g.params.subsample;
  g.seed = seed;
  return sim::generate_dataset(g).dataset;
}

}  // namespace

TEST_CASE("ini parser handles comments, whitespace, and malformed lines") {
  SECTION("values parse with inline comments and padding") {
    auto cfg = parse_config(kTinyConfig);
    CHECK(cfg.n_objects == 3);
    CHECK(cfg.sim_params.dt == 0.002);
    CHECK(cfg.sim_params.subsample == 50);
    CHECK(cfg.model.n_levels == 3);
    CHECK(cfg.model.edge_types == 3);
    CHECK(cfg.model.ablation == "p_learned");
    CHECK(cfg.train.batch == 2);
    CHECK(cfg.eval.horizons == std::vector<int64_t>{1, 3, 5});
    CHECK(cfg.eval.sample_mode);
  }
  SECTION("key outside a section") {
    CHECK_THROWS_MATCHES(parse_config("kind = springs\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("outside any [section]")));
  }
  SECTION("unterminated section header") {
    CHECK_THROWS_AS(parse_config("[system\nkind = springs\n"), ConfigError);
  }
  SECTION("missing equals sign") {
    CHECK_THROWS_MATCHES(parse_config("[system]\nkind springs\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("expected key = value")));
  }
  SECTION("duplicate key names section and key") {
    CHECK_THROWS_MATCHES(parse_config("[system]\nkind = springs\nkind = charged\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[system] kind")));
  }
}

TEST_CASE("config schema rejects unknown keys and bad values by name") {
  SECTION("unknown key") {
    CHECK_THROWS_MATCHES(parse_config("[train]\nlearning_rate = 0.1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("unknown key [train] learning_rate")));
  }
  SECTION("unknown section") {
    CHECK_THROWS_MATCHES(parse_config("[optimizer]\nlr = 0.1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("unknown section [optimizer]")));
  }
  SECTION("unparsable integer names the key") {
    CHECK_THROWS_MATCHES(parse_config("[train]\nbatch = fast\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[train] batch")));
  }
  SECTION("trailing junk after a number") {
    CHECK_THROWS_MATCHES(parse_config("[train]\nlr = 0.1x\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[train] lr")));
  }
  SECTION("bad boolean names the key") {
    CHECK_THROWS_MATCHES(parse_config("[model]\nhard_edges = maybe\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[model] hard_edges")));
  }
  SECTION("bad ablation") {
    CHECK_THROWS_AS(parse_config("[model]\nablation = sideways\n"), ConfigError);
  }
  SECTION("validation failures carry the offending key") {
    CHECK_THROWS_MATCHES(parse_config("[model]\nneuron_dim = 8\nheads = 3\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[model] heads")));
    CHECK_THROWS_MATCHES(parse_config("[eval]\ncontext = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[eval] context")));
    CHECK_THROWS_MATCHES(parse_config("[eval]\nhorizons = 5,0\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[eval] horizons")));
  }
}

TEST_CASE("config snapshot round-trips every field") {
  auto a = parse_config(kTinyConfig);
  auto b = parse_config(a.to_ini());
  CHECK(b.kind == a.kind);
  CHECK(b.n_objects == a.n_objects);
  CHECK(b.sim_params.dt == a.sim_params.dt);
  CHECK(b.sim_params.subsample == a.sim_params.subsample);
  CHECK(b.raw_steps == a.raw_steps);
  CHECK(b.test_raw_steps == a.test_raw_steps);
  CHECK(b.train_episodes == a.train_episodes);
  CHECK(b.test_episodes == a.test_episodes);
  CHECK(b.data_seed == a.data_seed);
  CHECK(b.model.n_levels == a.model.n_levels);
  CHECK(b.model.mid_groups == a.model.mid_groups);
  CHECK(b.model.neuron_dim == a.model.neuron_dim);
  CHECK(b.model.edge_types == a.model.edge_types);
  CHECK(b.model.heads == a.model.heads);
  CHECK(b.model.per_step_edges == a.model.per_step_edges);
  CHECK(b.model.hard_edges == a.model.hard_edges);
  CHECK(b.model.ablation == a.model.ablation);
  CHECK(b.model.init_seed == a.model.init_seed);
  CHECK(b.train.lr == a.train.lr);
  CHECK(b.train.batch == a.train.batch);
  CHECK(b.train.epochs == a.train.epochs);
  CHECK(b.train.clip == a.train.clip);
  CHECK(b.train.tau_start == a.train.tau_start);
  CHECK(b.train.tau_end == a.train.tau_end);
  CHECK(b.train.kl_warmup_epochs == a.train.kl_warmup_epochs);
  CHECK(b.train.seed == a.train.seed);
  CHECK(b.eval.horizons == a.eval.horizons);
  CHECK(b.eval.context == a.eval.context);
  CHECK(b.eval.n_seeds == a.eval.n_seeds);
  CHECK(b.eval.sample_mode == a.eval.sample_mode);
  SECTION("splits reflect the config") {
    auto tr = a.train_split();
    auto te = a.test_split();
    CHECK(tr.n_episodes == 4);
    CHECK(tr.raw_steps == 500);
    CHECK(te.n_episodes == 3);
    CHECK(te.raw_steps == 800);
    CHECK(tr.seed != te.seed);
  }
}

TEST_CASE("fnv1a64 matches reference vectors") {
  CHECK(expkit::fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(expkit::fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(expkit::fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
  CHECK(expkit::fnv1a64_hex("foobar", 6) == "85944171f73967e8");
}

TEST_CASE("atomic_write_file creates parents and leaves no temp residue") {
  auto dir = temp_dir("atomic");
  const std::string path = (dir / "a" / "b" / "file.txt").string();
  expkit::atomic_write_file(path, "first");
  CHECK(slurp(path) == "first");
  expkit::atomic_write_file(path, "second");
  CHECK(slurp(path) == "second");
  CHECK(!std::filesystem::exists(path + ".tmp"));
  CHECK(expkit::file_checksum(path) == expkit::fnv1a64_hex("second", 6));
}

TEST_CASE("checkpoint round-trip restores params and moments bitwise") {
  auto dir = temp_dir("ckpt");
  data::Dataset ds = tiny_dataset(3, 4, 6, 31);

  model::ReinConfig mc;
  mc.n_objects = 3;
  mc.neuron_dim = 8;
  mc.heads = 2;
  mc.init_seed = 5;
  model::Rein<double> a(mc);
  model::TrainConfig<double> tc;
  tc.epochs = 1;
  tc.batch = 2;
  tc.kl_warmup_epochs = 0;
  model::Trainer<double> trainer(tc, a.params());
  trainer.run(ds, model::rein_loss(a));
  REQUIRE(trainer.global_step() == 2);

  expkit::CheckpointMeta meta;
  meta.arch = expkit::rein_arch_json(mc);
  meta.epoch = trainer.epoch();
  meta.step_in_epoch = trainer.step_in_epoch();
  meta.global_step = trainer.global_step();
  meta.adam_cfg = trainer.optimizer().cfg;
  meta.adam_t = trainer.optimizer().t;
  meta.history = trainer.history();
  const std::string path = (dir / "m.ckpt.json").string();
  expkit::save_checkpoint(path, meta, a.params(), trainer.optimizer());

  expkit::CheckpointMeta back = expkit::read_checkpoint_meta(path);
  CHECK(back.epoch == 1);
  CHECK(back.global_step == 2);
  CHECK(back.adam_t == trainer.optimizer().t);
  CHECK(back.adam_cfg.lr == trainer.optimizer().cfg.lr);
  REQUIRE(back.history.size() == 1);
  CHECK(back.history[0].mean_loss == trainer.history()[0].mean_loss);
  CHECK(back.arch.at("kind") == "rein");

  expkit::ModelBundle b = expkit::build_model(back.arch);
  REQUIRE(b.rein != nullptr);
  Adam<double> opt;
  expkit::load_checkpoint_state(path, b.params(), opt);

  const auto& ea = a.params().entries();
  const auto& eb = b.params().entries();
  REQUIRE(ea.size() == eb.size());
  for (size_t k = 0; k < ea.size(); ++k) {
    CHECK(ea[k].second->name == eb[k].second->name);
    REQUIRE(ea[k].second->value.v == eb[k].second->value.v);
  }
  REQUIRE(opt.m.size() == trainer.optimizer().m.size());
  for (size_t k = 0; k < opt.m.size(); ++k) {
    REQUIRE(opt.m[k].v == trainer.optimizer().m[k].v);
    REQUIRE(opt.v[k].v == trainer.optimizer().v[k].v);
  }
  CHECK(opt.t == trainer.optimizer().t);
}

TEST_CASE("checkpoint loading fails loudly on mismatch and corruption") {
  auto dir = temp_dir("ckpt_bad");
  baselines::JointLstmConfig small;
  small.n_objects = 2;
  small.hidden = 4;
  baselines::JointLstm<double> m(small);
  Adam<double> opt;
  opt.init(m.params().all());
  expkit::CheckpointMeta meta;
  meta.arch = expkit::lstm_arch_json(small);
  const std::string path = (dir / "l.ckpt.json").string();
  expkit::save_checkpoint(path, meta, m.params(), opt);

  SECTION("shape mismatch names the parameter") {
    baselines::JointLstmConfig wider = small;
    wider.hidden = 5;
    baselines::JointLstm<double> w(wider);
    Adam<double> o2;
    CHECK_THROWS_MATCHES(expkit::load_checkpoint_state(path, w.params(), o2), IoError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("lstm.xi.W")));
  }
  SECTION("parameter count mismatch") {
    model::ReinConfig mc;
    mc.n_objects = 2;
    mc.neuron_dim = 8;
    mc.heads = 2;
    model::Rein<double> r(mc);
    Adam<double> o2;
    CHECK_THROWS_MATCHES(expkit::load_checkpoint_state(path, r.params(), o2), IoError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("parameters")));
  }
  SECTION("renamed parameter in the metadata is caught") {
    auto j = nlohmann::json::parse(slurp(path));
    j["params"][0]["name"] = "imposter";
    expkit::atomic_write_file(path, j.dump());
    Adam<double> o2;
    CHECK_THROWS_MATCHES(expkit::load_checkpoint_state(path, m.params(), o2), IoError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("imposter")));
  }
  SECTION("flipped blob byte fails the checksum") {
    std::string blob = slurp(path + ".bin");
    blob[blob.size() / 2] = static_cast<char>(blob[blob.size() / 2] ^ 0x40);
    expkit::atomic_write_file(path + ".bin", blob);
    Adam<double> o2;
    CHECK_THROWS_MATCHES(expkit::load_checkpoint_state(path, m.params(), o2), IoError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("checksum")));
  }
  SECTION("truncated blob reports sizes") {
    std::string blob = slurp(path + ".bin");
    expkit::atomic_write_file(path + ".bin", blob.substr(0, blob.size() - 8));
    Adam<double> o2;
    CHECK_THROWS_AS(expkit::load_checkpoint_state(path, m.params(), o2), IoError);
  }
  SECTION("garbage metadata is an IoError") {
    expkit::atomic_write_file(path, "not json {");
    CHECK_THROWS_AS(expkit::read_checkpoint_meta(path), IoError);
  }
}

TEST_CASE("mid-epoch checkpoint resume reproduces uninterrupted training bitwise") {
  auto dir = temp_dir("resume");
  data::Dataset ds = tiny_dataset(3, 5, 6, 77);

  model::ReinConfig mc;
  mc.n_objects = 3;
  mc.neuron_dim = 8;
  mc.heads = 2;
  model::TrainConfig<double> tc;
  tc.epochs = 2;
  tc.batch = 2;  // 3 steps per epoch, 6 total; step 1 is mid-epoch
  tc.kl_warmup_epochs = 1;

  model::Rein<double> uninterrupted(mc);
  model::Trainer<double> ta(tc, uninterrupted.params());
  ta.run(ds, model::rein_loss(uninterrupted));

  model::Rein<double> first(mc);
  model::Trainer<double> tb(tc, first.params());
  auto fn = model::rein_loss(first);
  while (tb.global_step() < 1) tb.step_once(ds, fn);
  expkit::CheckpointMeta meta;
  meta.arch = expkit::rein_arch_json(mc);
  meta.epoch = tb.epoch();
  meta.step_in_epoch = tb.step_in_epoch();
  meta.global_step = tb.global_step();
  meta.pending_loss = tb.pending_loss();
  meta.pending_steps = tb.pending_steps();
  meta.adam_cfg = tb.optimizer().cfg;
  meta.adam_t = tb.optimizer().t;
  meta.history = tb.history();
  const std::string path = (dir / "r.ckpt.json").string();
  expkit::save_checkpoint(path, meta, first.params(), tb.optimizer());

  model::Rein<double> resumed(mc);
  model::Trainer<double> tcr(tc, resumed.params());
  auto back = expkit::read_checkpoint_meta(path);
  expkit::load_checkpoint_state(path, resumed.params(), tcr.optimizer());
  tcr.restore_progress(back.epoch, back.step_in_epoch, back.global_step, back.history,
                       back.pending_loss, back.pending_steps);
  tcr.run(ds, model::rein_loss(resumed));

  CHECK(tcr.global_step() == ta.global_step());
  REQUIRE(tcr.history().size() == ta.history().size());
  for (size_t e = 0; e < ta.history().size(); ++e)
    REQUIRE(tcr.history()[e].mean_loss == ta.history()[e].mean_loss);
  const auto& ea = uninterrupted.params().entries();
  const auto& er = resumed.params().entries();
  for (size_t k = 0; k < ea.size(); ++k) REQUIRE(ea[k].second->value.v == er[k].second->value.v);
}

TEST_CASE("manifest records inputs, curve, and metrics; write is atomic") {
  auto dir = temp_dir("manifest");
  const std::string input = (dir / "input.bin").string();
  expkit::atomic_write_file(input, "payload");

  expkit::Manifest m;
  m.set_command("train rein");
  m.set_config_text("[system]\nkind = springs\n");
  m.add_input("train", input);
  m.add_epoch(0, 0.5, 10);
  m.add_epoch(1, 0.25, 10);
  eval::MetricReport r{"mse", 0.125, 0.01, 7, "step=1"};
  m.add_metric(r);
  m.set_wall_seconds(1.5);
  const std::string path = (dir / "run.manifest.json").string();
  m.write(path);

  CHECK(!std::filesystem::exists(path + ".tmp"));
  auto j = expkit::Manifest::read(path);
  CHECK(j.at("command") == "train rein");
  CHECK(j.at("inputs").at("train").at("fnv1a") == expkit::fnv1a64_hex("payload", 7));
  REQUIRE(j.at("epochs").size() == 2);
  CHECK(j.at("epochs")[1].at("mean_loss") == 0.25);
  REQUIRE(j.at("metrics").size() == 1);
  CHECK(j.at("metrics")[0].at("value") == 0.125);
  CHECK(j.at("metrics")[0].at("tag") == "step=1");
  CHECK(j.at("wall_seconds") == 1.5);
  CHECK_THROWS_AS(expkit::Manifest::read((dir / "absent.json").string()), IoError);
}

TEST_CASE("trajectory exports: csv shape and svg well-formedness") {
  const int32_t n = 2;
  const int64_t context = 3, horizon = 4;
  RandomStream rng(12);
  Tensor<double> truth = rng.normal_tensor<double>(context + horizon, 4 * n);
  Tensor<double> pred = rng.normal_tensor<double>(horizon, 4 * n);

  const std::string csv = expkit::trajectory_csv(truth, pred, n, context);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "series,frame,object,x,y,vx,vy");
  int64_t rows = 0, pred_rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.rfind("pred,", 0) == 0) ++pred_rows;
  }
  CHECK(rows == (truth.rows + pred.rows) * n);
  CHECK(pred_rows == pred.rows * n);

  const std::string svg = expkit::trajectory_svg(truth, pred, n, context);
  CHECK(svg.rfind("<svg ", 0) == 0);
  CHECK(svg_well_formed(svg));
  CHECK_THAT(svg, ContainsSubstring("stroke-dasharray"));

  CHECK_THROWS_AS(expkit::trajectory_csv(truth, Tensor<double>(20, 4 * n), n, context),
                  InvalidArgument);
}

TEST_CASE("edge score matrix and heatmap exports") {
  model::EdgeBelief<double> b;
  b.n = 3;
  b.types = 2;
  b.batch = 1;
  b.logits = Tensor<double>(6, 2);
  // pair (0,1): logits (0, log 3) both directions -> P(edge) = 0.75
  b.logits.at(model::pair_slot(3, 0, 1), 1) = std::log(3.0);
  b.logits.at(model::pair_slot(3, 1, 0), 1) = std::log(3.0);
  // pair (0,2): one direction certain-none, other neutral
  b.logits.at(model::pair_slot(3, 0, 2), 0) = 50.0;
  b.sample = b.logits;

  Tensor<double> m = expkit::edge_score_matrix(b, 0);
  for (int32_t i = 0; i < 3; ++i) CHECK(m.at(i, i) == 0.0);
  CHECK_THAT(m.at(0, 1), Catch::Matchers::WithinAbs(0.75, 1e-12));
  CHECK(m.at(0, 1) == m.at(1, 0));
  CHECK_THAT(m.at(0, 2), Catch::Matchers::WithinAbs(0.25, 1e-12));  // (0 + 0.5) / 2
  CHECK_THAT(m.at(1, 2), Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THROWS_AS(expkit::edge_score_matrix(b, 1), InvalidArgument);

  const std::string csv = expkit::heatmap_csv(m);
  std::istringstream is(csv);
  std::string line;
  int64_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
  }
  CHECK(rows == 3);

  const std::string svg = expkit::heatmap_svg(m);
  CHECK(svg_well_formed(svg));
  size_t rects = 0;
  for (size_t pos = 0; (pos = svg.find("<rect", pos)) != std::string::npos; ++pos) ++rects;
  CHECK(rects == 9);
}

TEST_CASE("generate/train/eval commands run end to end at smoke scale") {
  auto dir = temp_dir("runner");
  auto cfg = parse_config(kTinyConfig);
  std::ostringstream log;

  auto gen = expkit::cmd_generate(cfg, dir.string(), log);
  CHECK(std::filesystem::exists(dir / "train.json"));
  CHECK(std::filesystem::exists(dir / "train.bin"));
  CHECK(std::filesystem::exists(dir / "test.json"));
  CHECK(std::filesystem::exists(dir / "test.bin"));
  auto gm = expkit::Manifest::read((dir / "generate.manifest.json").string());
  CHECK(gm.at("inputs").at("train.bin").at("fnv1a") ==
        expkit::file_checksum((dir / "train.bin").string()));
  CHECK(gen.wall_seconds >= 0.0);

  const std::string ckpt = (dir / "model.ckpt.json").string();
  auto tr = expkit::cmd_train(cfg, "rein", dir.string(), ckpt, false, -1, log);
  CHECK(tr.epochs_done == 3);
  CHECK(tr.global_step == 6);
  auto tm = expkit::Manifest::read(ckpt + ".manifest.json");
  CHECK(tm.at("epochs").size() == 3);

  // evaluating an untrained checkpoint must still produce finite numbers
  const std::string init_ckpt = (dir / "init.ckpt.json").string();
  expkit::cmd_train(cfg, "rein", dir.string(), init_ckpt, false, 0, log);
  auto reports = expkit::cmd_eval(cfg, init_ckpt, dir.string(), (dir / "eval_init").string(), log);
  REQUIRE(reports.size() >= 9);  // 3 horizons x 2 models + 3 edge rows
  for (const auto& r : reports) {
    CHECK(std::isfinite(r.value));
    CHECK(std::isfinite(r.dispersion));
  }
  bool saw_model_edges = false, saw_random = false, saw_correlation = false;
  for (const auto& r : reports) {
    if (r.name == "edge_accuracy" && r.tag == "model") saw_model_edges = true;
    if (r.name == "edge_accuracy" && r.tag == "random") saw_random = true;
    if (r.name == "edge_accuracy" && r.tag == "correlation") saw_correlation = true;
  }
  CHECK(saw_model_edges);
  CHECK(saw_random);
  CHECK(saw_correlation);
  const std::string csv = slurp(dir / "eval_init.csv");
  CHECK(csv.rfind("metric,tag,value,dispersion,n\n", 0) == 0);
  CHECK_THAT(csv, ContainsSubstring("rein_mse"));
  CHECK_THAT(csv, ContainsSubstring("static_mse"));

  SECTION("rollout and plot exports") {
    expkit::cmd_rollout(cfg, ckpt, dir.string(), (dir / "traj").string(), 0, 4, log);
    CHECK(svg_well_formed(slurp(dir / "traj.svg")));
    CHECK_THAT(slurp(dir / "traj.csv"), ContainsSubstring("series,frame,object"));
    expkit::cmd_plot(ckpt, dir.string(), (dir / "ep0").string(), 0, log);
    CHECK(svg_well_formed(slurp(dir / "ep0_edges.svg")));
    CHECK(svg_well_formed(slurp(dir / "ep0_edges_gt.svg")));
    // ground-truth heatmap is binary with an empty diagonal
    std::istringstream gt(slurp(dir / "ep0_edges_gt.csv"));
    std::string line;
    int64_t row = 0;
    while (std::getline(gt, line)) {
      std::istringstream ls(line);
      std::string cell;
      int64_t col = 0;
      while (std::getline(ls, cell, ',')) {
        const double v = std::stod(cell);
        if (row == col) CHECK(v == 0.0);
        CHECK((v == 0.0 || v == 1.0));
        ++col;
      }
      CHECK(col == 3);
      ++row;
    }
    CHECK(row == 3);
  }

  SECTION("per-model eval dispatch") {
    const std::string lckpt = (dir / "lstm.ckpt.json").string();
    expkit::cmd_train(cfg, "lstm", dir.string(), lckpt, false, 2, log);
    auto lr = expkit::cmd_eval(cfg, lckpt, dir.string(), (dir / "eval_lstm").string(), log);
    CHECK(lr.size() == 6);  // no edge metrics for the unstructured baseline
    CHECK(lr[0].name == "lstm_mse");

    const std::string gckpt = (dir / "gt.ckpt.json").string();
    expkit::cmd_train(cfg, "gtgraph", dir.string(), gckpt, false, 2, log);
    auto gr = expkit::cmd_eval(cfg, gckpt, dir.string(), (dir / "eval_gt").string(), log);
    CHECK(gr.size() == 6);
    CHECK(gr[0].name == "gtgraph_mse");
  }

  SECTION("arch mismatch on resume is rejected") {
    CHECK_THROWS_MATCHES(expkit::cmd_train(cfg, "lstm", dir.string(), ckpt, true, -1, log),
                         ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("rein")));
  }
}

TEST_CASE("lstm baseline is sized to the full model's parameter budget") {
  auto cfg = parse_config(kTinyConfig);
  auto rein_bundle = expkit::build_model_from_config(cfg, "rein");
  auto lstm_bundle = expkit::build_model_from_config(cfg, "lstm");
  const int64_t budget = rein_bundle.params().total_size();
  const int64_t used = lstm_bundle.params().total_size();
  CHECK(used <= budget);
  // one hidden unit more would overshoot
  const int64_t h = lstm_bundle.lstm->config().hidden;
  CHECK(baselines::joint_lstm_param_count(cfg.n_objects, 4, h + 1) > budget);
}

TEST_CASE("gradcheck command audits the toy objective") {
  std::ostringstream log;
  GradCheckReport rep = expkit::cmd_gradcheck(log, 200);
  CHECK(rep.pass);
  CHECK(rep.coords_checked >= 200);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK_THAT(log.str(), ContainsSubstring("PASS"));
}
