#pragma once

#include <chrono>
#include <memory>

#include "rein/baselines/baselines.hpp"
#include "rein/eval/metrics.hpp"
#include "rein/exp/checkpoint.hpp"
#include "rein/exp/config.hpp"
#include "rein/exp/manifest.hpp"
#include "rein/exp/plots.hpp"
#include "rein/sim/generate.hpp"

namespace rein::expkit {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Tensor<double> concat_rows_host(const std::vector<const Tensor<double>*>& parts) {
  check<InvalidArgument>(!parts.empty(), "concat_rows_host: nothing to stack");
  int64_t rows = 0;
  const int64_t cols = parts[0]->cols;
  for (const auto* p : parts) {
    check<ShapeError>(p->cols == cols, "concat_rows_host: column mismatch");
    rows += p->rows;
  }
  Tensor<double> out(rows, cols);
  int64_t r = 0;
  for (const auto* p : parts) {
    std::copy(p->v.begin(), p->v.end(), out.v.begin() + r * cols);
    r += p->rows;
  }
  return out;
}

}  // namespace detail

// ---- self-describing model construction ----

inline nlohmann::json rein_arch_json(const model::ReinConfig& c) {
  return {{"kind", "rein"},
          {"n_objects", c.n_objects},
          {"obs_dim", c.obs_dim},
          {"n_levels", c.n_levels},
          {"mid_groups", c.mid_groups},
          {"neuron_dim", c.neuron_dim},
          {"edge_types", c.edge_types},
          {"heads", c.heads},
          {"control_dim", c.control_dim},
          {"per_step_edges", c.per_step_edges},
          {"hard_edges", c.hard_edges},
          {"ablation", c.ablation},
          {"init_seed", c.init_seed},
          {"edge_seed", c.edge_seed}};
}

inline nlohmann::json lstm_arch_json(const baselines::JointLstmConfig& c) {
  return {{"kind", "lstm"},
          {"n_objects", c.n_objects},
          {"obs_dim", c.obs_dim},
          {"hidden", c.hidden},
          {"init_seed", c.init_seed}};
}

inline nlohmann::json gtgraph_arch_json(const baselines::GtGraphMlpConfig& c) {
  return {{"kind", "gtgraph"},
          {"n_objects", c.n_objects},
          {"obs_dim", c.obs_dim},
          {"edge_types", c.edge_types},
          {"dim", c.dim},
          {"init_seed", c.init_seed}};
}

// Owns whichever predictor a checkpoint describes. Exactly one member is set.
struct ModelBundle {
  std::string kind;
  nlohmann::json arch;
  std::unique_ptr<model::Rein<double>> rein;
  std::unique_ptr<baselines::JointLstm<double>> lstm;
  std::unique_ptr<baselines::GtGraphMlp<double>> gt;

  model::ParamRegistry<double>& params() {
    if (rein) return rein->params();
    if (lstm) return lstm->params();
    return gt->params();
  }
};

inline ModelBundle build_model(const nlohmann::json& arch) {
  ModelBundle b;
  try {
    b.kind = arch.at("kind").get<std::string>();
    b.arch = arch;
    if (b.kind == "rein") {
      model::ReinConfig c;
      c.n_objects = arch.at("n_objects").get<int32_t>();
      c.obs_dim = arch.at("obs_dim").get<int32_t>();
      c.n_levels = arch.at("n_levels").get<int32_t>();
      c.mid_groups = arch.at("mid_groups").get<int32_t>();
      c.neuron_dim = arch.at("neuron_dim").get<int32_t>();
      c.edge_types = arch.at("edge_types").get<int32_t>();
      c.heads = arch.at("heads").get<int32_t>();
      c.control_dim = arch.at("control_dim").get<int32_t>();
      c.per_step_edges = arch.at("per_step_edges").get<bool>();
      c.hard_edges = arch.at("hard_edges").get<bool>();
      c.ablation = arch.at("ablation").get<std::string>();
      c.init_seed = arch.at("init_seed").get<uint64_t>();
      c.edge_seed = arch.at("edge_seed").get<uint64_t>();
      b.rein = std::make_unique<model::Rein<double>>(c);
    } else if (b.kind == "lstm") {
      baselines::JointLstmConfig c;
      c.n_objects = arch.at("n_objects").get<int32_t>();
      c.obs_dim = arch.at("obs_dim").get<int32_t>();
      c.hidden = arch.at("hidden").get<int64_t>();
      c.init_seed = arch.at("init_seed").get<uint64_t>();
      b.lstm = std::make_unique<baselines::JointLstm<double>>(c);
    } else if (b.kind == "gtgraph") {
      baselines::GtGraphMlpConfig c;
      c.n_objects = arch.at("n_objects").get<int32_t>();
      c.obs_dim = arch.at("obs_dim").get<int32_t>();
      c.edge_types = arch.at("edge_types").get<int32_t>();
      c.dim = arch.at("dim").get<int64_t>();
      c.init_seed = arch.at("init_seed").get<uint64_t>();
      b.gt = std::make_unique<baselines::GtGraphMlp<double>>(c);
    } else {
      fail<ConfigError>("unknown model kind '", b.kind, "', expected rein|lstm|gtgraph");
    }
  } catch (const nlohmann::json::exception& e) {
    fail<IoError>("model architecture record is missing a field (", e.what(), ")");
  }
  return b;
}

// The LSTM baseline is sized to match the full model's parameter count, so
// comparisons are capacity-fair. The hidden size is resolved here once and
// recorded in the checkpoint.
inline ModelBundle build_model_from_config(const ExperimentConfig& cfg, const std::string& kind) {
  if (kind == "rein") return build_model(rein_arch_json(cfg.model));
  if (kind == "lstm") {
    model::Rein<double> reference(cfg.model);
    baselines::JointLstmConfig c;
    c.n_objects = cfg.n_objects;
    c.obs_dim = cfg.model.obs_dim;
    c.hidden = baselines::pick_lstm_hidden(reference.params().total_size(), cfg.n_objects,
                                           cfg.model.obs_dim);
    c.init_seed = cfg.model.init_seed;
    return build_model(lstm_arch_json(c));
  }
  if (kind == "gtgraph") {
    baselines::GtGraphMlpConfig c;
    c.n_objects = cfg.n_objects;
    c.obs_dim = cfg.model.obs_dim;
    c.edge_types = cfg.model.edge_types;
    c.dim = 2 * cfg.model.neuron_dim;
    c.init_seed = cfg.model.init_seed;
    return build_model(gtgraph_arch_json(c));
  }
  fail<ConfigError>("unknown model kind '", kind, "', expected rein|lstm|gtgraph");
}

inline ModelBundle load_model(const std::string& ckpt_path) {
  CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
  ModelBundle b = build_model(meta.arch);
  Adam<double> scratch;
  load_checkpoint_state(ckpt_path, b.params(), scratch);
  return b;
}

// ---- generate ----

struct GenerateOutcome {
  int64_t train_resamples = 0;
  int64_t test_resamples = 0;
  double wall_seconds = 0;
};

inline GenerateOutcome cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir,
                                    std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  GenerateOutcome out;

  sim::GenerateResult train = sim::generate_dataset(cfg.train_split());
  out.train_resamples = train.resamples;
  data::write_dataset(out_dir + "/train", train.dataset);
  log << "train: " << train.dataset.n_episodes() << " episodes x " << train.dataset.frames
      << " frames (" << train.resamples << " resamples)\n";

  sim::GenerateResult test = sim::generate_dataset(cfg.test_split());
  out.test_resamples = test.resamples;
  data::write_dataset(out_dir + "/test", test.dataset);
  log << "test:  " << test.dataset.n_episodes() << " episodes x " << test.dataset.frames
      << " frames (" << test.resamples << " resamples)\n";

  out.wall_seconds = detail::seconds_since(t0);
  Manifest m;
  m.set_command("generate");
  m.set_config_text(cfg.to_ini());
  m.add_input("train.json", out_dir + "/train.json");
  m.add_input("train.bin", out_dir + "/train.bin");
  m.add_input("test.json", out_dir + "/test.json");
  m.add_input("test.bin", out_dir + "/test.bin");
  m.set("resamples", {{"train", out.train_resamples}, {"test", out.test_resamples}});
  m.set_wall_seconds(out.wall_seconds);
  m.write(out_dir + "/generate.manifest.json");
  return out;
}

// ---- train ----

struct TrainOutcome {
  int64_t global_step = 0;
  int64_t epochs_done = 0;
  double last_epoch_loss = 0;
  double wall_seconds = 0;
};

inline model::BatchLossFn<double> loss_for(ModelBundle& b, const data::Dataset& ds) {
  if (b.rein) return model::rein_loss(*b.rein);
  if (b.lstm) return baselines::lstm_loss(*b.lstm);
  return baselines::gt_graph_loss(*b.gt, ds);
}

// Trains `kind` on data_dir/train and checkpoints to ckpt_path. With
// max_steps >= 0 the loop stops once global_step reaches it, leaving a
// resumable checkpoint; --resume picks up from exactly that state.
inline TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::string& kind,
                              const std::string& data_dir, const std::string& ckpt_path,
                              bool resume, int64_t max_steps, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  data::Dataset ds = data::read_dataset(data_dir + "/train");
  check<ConfigError>(ds.n_objects == cfg.n_objects, "config says ", cfg.n_objects,
                     " objects but ", data_dir, "/train has ", ds.n_objects);

  ModelBundle bundle;
  model::TrainConfig<double> tc = cfg.train;
  std::unique_ptr<model::Trainer<double>> trainer;

  if (resume) {
    CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
    bundle = build_model(meta.arch);
    check<ConfigError>(bundle.kind == kind, "checkpoint ", ckpt_path, " holds a ", bundle.kind,
                       " model, asked to resume ", kind);
    trainer = std::make_unique<model::Trainer<double>>(tc, bundle.params());
    load_checkpoint_state(ckpt_path, bundle.params(), trainer->optimizer());
    trainer->restore_progress(meta.epoch, meta.step_in_epoch, meta.global_step, meta.history,
                              meta.pending_loss, meta.pending_steps);
    log << "resumed " << kind << " at epoch " << meta.epoch << " step " << meta.step_in_epoch
        << " (global " << meta.global_step << ")\n";
  } else {
    bundle = build_model_from_config(cfg, kind);
    trainer = std::make_unique<model::Trainer<double>>(tc, bundle.params());
    log << kind << ": " << bundle.params().total_size() << " parameters\n";
  }

  model::BatchLossFn<double> fn = loss_for(bundle, ds);
  while (!trainer->done(ds)) {
    if (max_steps >= 0 && trainer->global_step() >= max_steps) break;
    const int64_t before = trainer->epoch();
    trainer->step_once(ds, fn);
    if (trainer->epoch() != before) {
      const auto& h = trainer->history().back();
      log << "epoch " << before << ": loss " << h.mean_loss << "\n";
    }
  }

  CheckpointMeta meta;
  meta.arch = bundle.arch;
  meta.epoch = trainer->epoch();
  meta.step_in_epoch = trainer->step_in_epoch();
  meta.global_step = trainer->global_step();
  meta.pending_loss = trainer->pending_loss();
  meta.pending_steps = trainer->pending_steps();
  meta.adam_cfg = trainer->optimizer().cfg;
  meta.adam_t = trainer->optimizer().t;
  meta.history = trainer->history();
  save_checkpoint(ckpt_path, meta, bundle.params(), trainer->optimizer());

  TrainOutcome out;
  out.global_step = trainer->global_step();
  out.epochs_done = trainer->epoch();
  out.last_epoch_loss = meta.history.empty() ? 0.0 : meta.history.back().mean_loss;
  out.wall_seconds = detail::seconds_since(t0);

  Manifest m;
  m.set_command("train " + kind);
  m.set_config_text(cfg.to_ini());
  m.add_input("train.json", data_dir + "/train.json");
  m.add_input("train.bin", data_dir + "/train.bin");
  for (size_t e = 0; e < meta.history.size(); ++e)
    m.add_epoch(static_cast<int64_t>(e), meta.history[e].mean_loss, meta.history[e].steps);
  m.set("global_step", out.global_step);
  m.set_wall_seconds(out.wall_seconds);
  m.write(ckpt_path + ".manifest.json");
  log << "saved " << ckpt_path << " after " << out.global_step << " steps ("
      << out.wall_seconds << "s)\n";
  return out;
}

// ---- eval ----

namespace detail {

struct RolloutSet {
  std::vector<Tensor<double>> preds;         // one (B_total*n x obs_dim) per step
  std::vector<Tensor<double>> truth;         // aligned ground truth
  std::vector<Tensor<double>> static_preds;  // last-context-frame baseline
};

// chunked closed-loop prediction over the whole dataset, stitched back into
// per-step tensors covering every episode
inline RolloutSet rollout_all(ModelBundle& b, const data::Dataset& ds, int64_t context,
                              int64_t horizon, bool sample_mode, uint64_t noise_seed,
                              int64_t chunk = 50) {
  check<InvalidArgument>(ds.frames >= context + horizon, "eval needs ", context, "+", horizon,
                         " frames but episodes have ", ds.frames);
  const int64_t N = ds.n_episodes();
  std::vector<std::vector<Tensor<double>>> chunk_preds, chunk_truth, chunk_static;
  for (int64_t lo = 0; lo < N; lo += chunk) {
    const int64_t hi = std::min(N, lo + chunk);
    std::vector<int64_t> ids;
    for (int64_t e = lo; e < hi; ++e) ids.push_back(e);
    auto ctx = model::stack_frames<double>(ds, ids, 0, context);
    chunk_truth.push_back(model::stack_frames<double>(ds, ids, context, context + horizon));
    chunk_static.push_back(baselines::static_rollout(ctx, horizon));
    if (b.rein) {
      RngNoise<double> noise(RandomStream::derive(noise_seed, {0xe7a1ULL, static_cast<uint64_t>(lo)}));
      chunk_preds.push_back(b.rein->rollout(ctx, horizon, sample_mode, noise, ids));
    } else if (b.lstm) {
      chunk_preds.push_back(b.lstm->rollout(ctx, horizon));
    } else {
      std::vector<const sim::RelationGraph*> graphs;
      for (int64_t e : ids) graphs.push_back(&ds.episodes[static_cast<size_t>(e)].graph);
      Tensor<double> edges = baselines::gt_edge_onehot<double>(graphs, b.gt->config().edge_types);
      chunk_preds.push_back(b.gt->rollout(ctx, horizon, edges));
    }
  }

  RolloutSet out;
  for (int64_t s = 0; s < horizon; ++s) {
    std::vector<const Tensor<double>*> p, t, st;
    for (size_t c = 0; c < chunk_preds.size(); ++c) {
      p.push_back(&chunk_preds[c][static_cast<size_t>(s)]);
      t.push_back(&chunk_truth[c][static_cast<size_t>(s)]);
      st.push_back(&chunk_static[c][static_cast<size_t>(s)]);
    }
    out.preds.push_back(concat_rows_host(p));
    out.truth.push_back(concat_rows_host(t));
    out.static_preds.push_back(concat_rows_host(st));
  }
  return out;
}

inline model::EdgeBelief<double> infer_edges_all(model::Rein<double>& m, const data::Dataset& ds,
                                                 int64_t chunk = 50) {
  model::EdgeBelief<double> all;
  all.n = ds.n_objects;
  all.types = m.config().edge_types;
  all.batch = ds.n_episodes();
  std::vector<Tensor<double>> logits, samples;
  for (int64_t lo = 0; lo < ds.n_episodes(); lo += chunk) {
    const int64_t hi = std::min(ds.n_episodes(), lo + chunk);
    std::vector<int64_t> ids;
    for (int64_t e = lo; e < hi; ++e) ids.push_back(e);
    auto frames = model::stack_frames<double>(ds, ids, 0, ds.frames);
    model::EdgeBelief<double> part = m.infer_edges(frames, ids);
    logits.push_back(std::move(part.logits));
    samples.push_back(std::move(part.sample));
  }
  std::vector<const Tensor<double>*> lp, sp;
  for (const auto& t : logits) lp.push_back(&t);
  for (const auto& t : samples) sp.push_back(&t);
  all.logits = concat_rows_host(lp);
  all.sample = concat_rows_host(sp);
  return all;
}

}  // namespace detail

// Rollout MSE at the configured horizons for the checkpointed model and the
// static baseline; for the full model also edge accuracy against the random
// and correlation-threshold references. Writes <out_prefix>.csv and a
// manifest, prints a table, returns the reports.
inline std::vector<eval::MetricReport> cmd_eval(const ExperimentConfig& cfg,
                                                const std::string& ckpt_path,
                                                const std::string& data_dir,
                                                const std::string& out_prefix, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  data::Dataset ds = data::read_dataset(data_dir + "/test");
  check<ConfigError>(ds.n_objects == cfg.n_objects, "config says ", cfg.n_objects,
                     " objects but ", data_dir, "/test has ", ds.n_objects);
  ModelBundle b = load_model(ckpt_path);

  int64_t max_h = 0;
  for (int64_t h : cfg.eval.horizons) max_h = std::max(max_h, h);
  detail::RolloutSet rs = detail::rollout_all(b, ds, cfg.eval.context, max_h,
                                              cfg.eval.sample_mode, cfg.train.seed);

  std::vector<eval::MetricReport> reports;
  for (auto r : eval::mse_at_steps(rs.preds, rs.truth, cfg.eval.horizons, ds.n_objects)) {
    r.name = b.kind + "_mse";
    reports.push_back(r);
  }
  for (auto r : eval::mse_at_steps(rs.static_preds, rs.truth, cfg.eval.horizons, ds.n_objects)) {
    r.name = "static_mse";
    reports.push_back(r);
  }

  if (b.rein && b.rein->hierarchy().level_sizes[0] >= 2) {
    std::vector<const sim::RelationGraph*> graphs;
    std::vector<const sim::Episode*> eps;
    for (const auto& ep : ds.episodes) {
      graphs.push_back(&ep.graph);
      eps.push_back(&ep);
    }
    model::EdgeBelief<double> belief = detail::infer_edges_all(*b.rein, ds);
    eval::MetricReport mr = eval::edge_accuracy(belief, graphs);
    mr.tag = "model";
    reports.push_back(mr);

    model::EdgeBelief<double> rnd;
    rnd.n = ds.n_objects;
    rnd.types = b.rein->config().edge_types;
    rnd.batch = ds.n_episodes();
    std::vector<int64_t> all_ids(static_cast<size_t>(ds.n_episodes()));
    for (int64_t e = 0; e < ds.n_episodes(); ++e) all_ids[static_cast<size_t>(e)] = e;
    rnd.sample = model::random_edge_sample<double>(ds.n_objects, rnd.types, all_ids,
                                                   b.rein->config().edge_seed);
    rnd.logits = rnd.sample;
    eval::MetricReport rr = eval::edge_accuracy(rnd, graphs);
    rr.tag = "random";
    reports.push_back(rr);

    eval::MetricReport cr = eval::edge_accuracy(eval::correlation_edge_belief<double>(
                                                    eps, ds.n_objects),
                                                graphs);
    cr.tag = "correlation";
    reports.push_back(cr);
  }

  {
    std::ofstream csv(out_prefix + ".csv");
    check<IoError>(csv.good(), "cannot open ", out_prefix, ".csv");
    eval::write_metrics_csv(csv, reports);
  }
  eval::print_metrics(log, reports);

  Manifest m;
  m.set_command("eval " + b.kind);
  m.set_config_text(cfg.to_ini());
  m.add_input("checkpoint", ckpt_path);
  m.add_input("test.json", data_dir + "/test.json");
  m.add_input("test.bin", data_dir + "/test.bin");
  for (const auto& r : reports) m.add_metric(r);
  m.set_wall_seconds(detail::seconds_since(t0));
  m.write(out_prefix + ".manifest.json");
  return reports;
}

// ---- rollout / plot exports ----

inline void cmd_rollout(const ExperimentConfig& cfg, const std::string& ckpt_path,
                        const std::string& data_dir, const std::string& out_prefix,
                        int64_t episode, int64_t horizon, std::ostream& log) {
  data::Dataset ds = data::read_dataset(data_dir + "/test");
  check<InvalidArgument>(episode >= 0 && episode < ds.n_episodes(), "episode ", episode,
                         " out of range 0..", ds.n_episodes() - 1);
  check<InvalidArgument>(ds.frames >= cfg.eval.context + horizon, "episode has ", ds.frames,
                         " frames, need context ", cfg.eval.context, " + horizon ", horizon);
  ModelBundle b = load_model(ckpt_path);

  std::vector<int64_t> ids{episode};
  auto ctx = model::stack_frames<double>(ds, ids, 0, cfg.eval.context);
  std::vector<Tensor<double>> preds;
  if (b.rein) {
    RngNoise<double> noise(RandomStream::derive(cfg.train.seed, {0xe7a1ULL}));
    preds = b.rein->rollout(ctx, horizon, cfg.eval.sample_mode, noise, ids);
  } else if (b.lstm) {
    preds = b.lstm->rollout(ctx, horizon);
  } else {
    std::vector<const sim::RelationGraph*> graphs{&ds.episodes[static_cast<size_t>(episode)].graph};
    preds = b.gt->rollout(ctx, horizon,
                          baselines::gt_edge_onehot<double>(graphs, b.gt->config().edge_types));
  }

  // single episode: frames are (n x obs_dim); repack into (T x 4n) rows
  const int64_t n = ds.n_objects;
  Tensor<double> truth(cfg.eval.context + horizon, 4 * n);
  const auto& traj = ds.episodes[static_cast<size_t>(episode)].traj;
  for (int64_t t = 0; t < truth.rows; ++t)
    for (int64_t c = 0; c < 4 * n; ++c) truth.at(t, c) = static_cast<double>(traj.at(t, c));
  Tensor<double> pred(horizon, 4 * n);
  for (int64_t h = 0; h < horizon; ++h)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t c = 0; c < 4; ++c)
        pred.at(h, 4 * i + c) = preds[static_cast<size_t>(h)].at(i, c);

  atomic_write_file(out_prefix + ".csv",
                    trajectory_csv(truth, pred, ds.n_objects, cfg.eval.context));
  atomic_write_file(out_prefix + ".svg",
                    trajectory_svg(truth, pred, ds.n_objects, cfg.eval.context));
  log << "wrote " << out_prefix << ".csv and .svg (episode " << episode << ", horizon " << horizon
      << ")\n";
}

inline void cmd_plot(const std::string& ckpt_path, const std::string& data_dir,
                     const std::string& out_prefix, int64_t episode, std::ostream& log) {
  data::Dataset ds = data::read_dataset(data_dir + "/test");
  check<InvalidArgument>(episode >= 0 && episode < ds.n_episodes(), "episode ", episode,
                         " out of range 0..", ds.n_episodes() - 1);
  ModelBundle b = load_model(ckpt_path);
  check<ConfigError>(b.rein != nullptr, "edge heatmaps need a rein checkpoint, got ", b.kind);

  std::vector<int64_t> ids{episode};
  auto frames = model::stack_frames<double>(ds, ids, 0, ds.frames);
  model::EdgeBelief<double> belief = b.rein->infer_edges(frames, ids);
  Tensor<double> scores = edge_score_matrix(belief, 0);

  Tensor<double> gt(ds.n_objects, ds.n_objects);
  const auto& g = ds.episodes[static_cast<size_t>(episode)].graph;
  for (int32_t i = 0; i < ds.n_objects; ++i)
    for (int32_t j = 0; j < ds.n_objects; ++j)
      if (i != j && g.type_at(i, j) != 0) gt.at(i, j) = 1.0;

  atomic_write_file(out_prefix + "_edges.csv", heatmap_csv(scores));
  atomic_write_file(out_prefix + "_edges.svg", heatmap_svg(scores));
  atomic_write_file(out_prefix + "_edges_gt.csv", heatmap_csv(gt));
  atomic_write_file(out_prefix + "_edges_gt.svg", heatmap_svg(gt));
  log << "wrote " << out_prefix << "_edges{,_gt}.csv/.svg (episode " << episode << ")\n";
}

// ---- gradient check ----

// End-to-end derivative audit of the training objective on a tiny instance.
// Relaxed (soft) edge samples keep the loss differentiable; the recorded
// noise is replayed for every perturbed forward so finite differences see a
// deterministic function.
inline GradCheckReport cmd_gradcheck(std::ostream& log, int64_t stride_target = 4000) {
  model::ReinConfig mc;
  mc.n_objects = 2;
  mc.obs_dim = 4;
  mc.n_levels = 2;
  mc.neuron_dim = 8;
  mc.heads = 2;
  mc.edge_types = 2;
  mc.hard_edges = false;
  mc.init_seed = 7;
  model::Rein<double> m(mc);

  const int64_t T = 5, B = 2;
  RandomStream rng = RandomStream::derive(99, {0xfade});
  std::vector<Tensor<double>> frames;
  for (int64_t t = 0; t < T; ++t)
    frames.push_back(rng.normal_tensor<double>(B * mc.n_objects, mc.obs_dim, 0.5));
  std::vector<int64_t> ids{0, 1};
  const double klw = 0.7, tau = 1.3;

  RngNoise<double> base(RandomStream::derive(99, {0x015e}));
  RecordingNoise<double> rec(base);
  {
    Tape<double> t;
    zero_grads(m.params().all());
    auto res = m.elbo(t, frames, klw, tau, rec, ids);
    t.backward(res.total);
  }
  auto forward = [&]() {
    ReplayNoise<double> rep(rec.draws);
    Tape<double> t;
    t.set_grad_enabled(false);
    return m.elbo(t, frames, klw, tau, rep, ids).terms.total;
  };

  const int64_t total = m.params().total_size();
  const int64_t stride = std::max<int64_t>(1, total / stride_target);
  GradCheckReport rep = gradcheck(m.params().all(), forward, 1e-5, 1e-4, stride);
  log << "gradcheck: " << rep.coords_checked << " of " << total << " coordinates, max rel err "
      << rep.max_rel_err << " (worst " << rep.worst_param << "[" << rep.worst_index
      << "]: analytic " << rep.worst_analytic << " vs numeric " << rep.worst_numeric << ")\n";
  log << (rep.pass ? "PASS" : "FAIL") << " tolerance 1e-4\n";
  return rep;
}

}  // namespace rein::expkit
