#pragma once

#include "rein/model/trainer.hpp"
#include "rein/sim/system.hpp"

namespace rein::baselines {

using model::BatchLossFn;
using model::BatchView;

// copies the last context frame forward: the no-dynamics reference predictor
template <class T>
std::vector<Tensor<T>> static_rollout(const std::vector<Tensor<T>>& context, int64_t horizon) {
  check<InvalidArgument>(horizon >= 0, "static_rollout: horizon must be >= 0");
  check<InvalidArgument>(!context.empty(), "static_rollout: empty context");
  return std::vector<Tensor<T>>(static_cast<size_t>(horizon), context.back());
}

namespace detail {

// (B*n x obs_dim) stacked frame -> (B x n*obs_dim) per-episode rows
template <class T>
Tensor<T> flatten_episodes(const Tensor<T>& frame, int64_t n) {
  check<ShapeError>(frame.rows % n == 0, "frame rows not divisible by object count");
  const int64_t B = frame.rows / n;
  Tensor<T> out(B, n * frame.cols);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < frame.cols; ++j) out.at(b, i * frame.cols + j) = frame.at(b * n + i, j);
  return out;
}

template <class T>
Tensor<T> unflatten_episodes(const Tensor<T>& flat, int64_t n) {
  check<ShapeError>(flat.cols % n == 0, "flat cols not divisible by object count");
  const int64_t d = flat.cols / n;
  Tensor<T> out(flat.rows * n, d);
  for (int64_t b = 0; b < flat.rows; ++b)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) out.at(b * n + i, j) = flat.at(b, i * d + j);
  return out;
}

}  // namespace detail

struct JointLstmConfig {
  int32_t n_objects = 5;
  int32_t obs_dim = 4;
  int64_t hidden = 32;
  uint64_t init_seed = 1;
};

inline int64_t joint_lstm_param_count(int64_t n_objects, int64_t obs_dim, int64_t hidden) {
  const int64_t in = n_objects * obs_dim;
  return 4 * (in * hidden + hidden) + 4 * (hidden * hidden + hidden) + hidden * in + in;
}

// largest hidden size whose parameter count stays within the budget
inline int64_t pick_lstm_hidden(int64_t budget, int64_t n_objects, int64_t obs_dim) {
  int64_t best = 1;
  for (int64_t h = 1; h <= 4096; ++h) {
    if (joint_lstm_param_count(n_objects, obs_dim, h) <= budget)
      best = h;
    else
      break;
  }
  return best;
}

// Monolithic LSTM over the flattened scene vector, predicting per-step
// deltas. No structure: every object sees every coordinate.
template <class T>
class JointLstm {
 public:
  explicit JointLstm(JointLstmConfig cfg) : cfg_(cfg) {
    check<ConfigError>(cfg_.hidden >= 1, "hidden must be positive");
    RandomStream rng = RandomStream::derive(cfg_.init_seed, {0x15f3});
    const int64_t in = static_cast<int64_t>(cfg_.n_objects) * cfg_.obs_dim;
    cell_ = model::LstmCell<T>::create(reg_, model::Group::theta, "lstm", in, cfg_.hidden, rng);
    head_ = model::Linear<T>::create(reg_, model::Group::theta, "head", cfg_.hidden, in, rng, true);
  }

  const JointLstmConfig& config() const { return cfg_; }
  model::ParamRegistry<T>& params() { return reg_; }
  const model::ParamRegistry<T>& params() const { return reg_; }

  Value<T> teacher_forced_mse(Tape<T>& t, const std::vector<Tensor<T>>& frames_raw) {
    check<InvalidArgument>(frames_raw.size() >= 2, "need at least 2 frames");
    typename model::LstmCell<T>::State s;
    const int64_t B = frames_raw[0].rows / cfg_.n_objects;
    s.h = t.constant(Tensor<T>(B, cfg_.hidden));
    s.c = t.constant(Tensor<T>(B, cfg_.hidden));
    Value<T> total;
    for (size_t step = 0; step + 1 < frames_raw.size(); ++step) {
      Value<T> x = t.constant(flat_norm(frames_raw[step]));
      Value<T> target = t.constant(flat_norm(frames_raw[step + 1]));
      s = cell_.step(t, x, s);
      Value<T> pred = add(x, head_(t, s.h));
      Value<T> e = sum_all(square(sub(pred, target)));
      total = step == 0 ? e : add(total, e);
    }
    return total;
  }

  std::vector<Tensor<T>> rollout(const std::vector<Tensor<T>>& context_raw, int64_t horizon) {
    check<InvalidArgument>(horizon >= 0, "rollout: horizon must be >= 0");
    check<InvalidArgument>(!context_raw.empty(), "rollout: empty context");
    const int64_t B = context_raw[0].rows / cfg_.n_objects;
    Tensor<T> h(B, cfg_.hidden), c(B, cfg_.hidden);
    Tensor<T> prev = flat_norm(context_raw[0]);
    std::vector<Tensor<T>> preds;
    const int64_t total_steps = static_cast<int64_t>(context_raw.size()) - 1 + horizon;
    for (int64_t step = 0; step < total_steps; ++step) {
      Tape<T> t;
      t.set_grad_enabled(false);
      typename model::LstmCell<T>::State s{t.constant(h), t.constant(c)};
      Tensor<T> x_host = step < static_cast<int64_t>(context_raw.size())
                             ? flat_norm(context_raw[static_cast<size_t>(step)])
                             : prev;
      Value<T> x = t.constant(x_host);
      s = cell_.step(t, x, s);
      Tensor<T> pred = add(x, head_(t, s.h)).val();
      h = s.h.val();
      c = s.c.val();
      prev = pred;
      if (step >= static_cast<int64_t>(context_raw.size()) - 1)
        preds.push_back(model::denormalize_obs(
            detail::unflatten_episodes(pred, cfg_.n_objects), cfg_.obs_dim));
    }
    return preds;
  }

 private:
  Tensor<T> flat_norm(const Tensor<T>& frame) const {
    return detail::flatten_episodes(model::normalize_obs(frame, cfg_.obs_dim), cfg_.n_objects);
  }

  JointLstmConfig cfg_;
  model::ParamRegistry<T> reg_;
  model::LstmCell<T> cell_;
  model::Linear<T> head_;
};

// one-hot relation types for a batch of ground-truth graphs, laid out to
// match the peer pair enumeration
template <class T>
Tensor<T> gt_edge_onehot(const std::vector<const sim::RelationGraph*>& graphs, int32_t types) {
  check<InvalidArgument>(!graphs.empty(), "gt_edge_onehot: no graphs");
  const int32_t n = graphs[0]->n;
  const int64_t per_ep = static_cast<int64_t>(n) * (n - 1);
  Tensor<T> out(static_cast<int64_t>(graphs.size()) * per_ep, types);
  for (size_t e = 0; e < graphs.size(); ++e) {
    const auto& g = *graphs[e];
    check<InvalidArgument>(g.n == n, "gt_edge_onehot: mixed object counts");
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const int32_t k = g.type_at(i, j);
        check<InvalidArgument>(k >= 0 && k < types, "edge type ", k, " out of range 0..", types - 1);
        out.at(static_cast<int64_t>(e) * per_ep + model::pair_slot(n, i, j), k) = T(1);
      }
  }
  return out;
}

struct GtGraphMlpConfig {
  int32_t n_objects = 5;
  int32_t obs_dim = 4;
  int32_t edge_types = 2;
  int64_t dim = 32;
  uint64_t init_seed = 1;
};

// Markovian message-passing predictor fed the true relation graph: embeds
// each object, passes typed messages along ground-truth edges, and decodes a
// per-object delta. Upper-bound reference for edge-inference quality.
template <class T>
class GtGraphMlp {
 public:
  explicit GtGraphMlp(GtGraphMlpConfig cfg) : cfg_(cfg), hier_(model::HierarchySpec::flat(cfg.n_objects)) {
    check<ConfigError>(cfg_.dim >= 1, "dim must be positive");
    RandomStream rng = RandomStream::derive(cfg_.init_seed, {0x67});
    embed_ = model::Linear<T>::create(reg_, model::Group::theta, "embed", cfg_.obs_dim, cfg_.dim, rng);
    peer_ = model::PeerPass<T>::create(reg_, model::Group::theta, "peer", cfg_.dim, cfg_.dim,
                                       cfg_.edge_types, rng);
    out_ = model::Mlp<T>::create(reg_, model::Group::theta, "out", 2 * cfg_.dim, cfg_.dim,
                                 cfg_.obs_dim, rng, true);
  }

  const GtGraphMlpConfig& config() const { return cfg_; }
  model::ParamRegistry<T>& params() { return reg_; }
  const model::ParamRegistry<T>& params() const { return reg_; }

  Value<T> predict_step(Tape<T>& t, Value<T> obs_norm, Value<T> edges, const model::BatchLayout& lay) {
    Value<T> e = rein::tanh(embed_(t, obs_norm));
    Value<T> msg = peer_(t, e, edges, lay.peer[0], lay.rows(0));
    return add(obs_norm, out_(t, concat_cols<T>({e, msg})));
  }

  Value<T> teacher_forced_mse(Tape<T>& t, const std::vector<Tensor<T>>& frames_raw,
                              const Tensor<T>& edge_onehot) {
    check<InvalidArgument>(frames_raw.size() >= 2, "need at least 2 frames");
    const model::BatchLayout& lay = layout(frames_raw[0].rows / cfg_.n_objects);
    Value<T> edges = t.constant(edge_onehot);
    Value<T> total;
    for (size_t step = 0; step + 1 < frames_raw.size(); ++step) {
      Value<T> x = t.constant(model::normalize_obs(frames_raw[step], cfg_.obs_dim));
      Value<T> target = t.constant(model::normalize_obs(frames_raw[step + 1], cfg_.obs_dim));
      Value<T> pred = predict_step(t, x, edges, lay);
      Value<T> err = sum_all(square(sub(pred, target)));
      total = step == 0 ? err : add(total, err);
    }
    return total;
  }

  std::vector<Tensor<T>> rollout(const std::vector<Tensor<T>>& context_raw, int64_t horizon,
                                 const Tensor<T>& edge_onehot) {
    check<InvalidArgument>(horizon >= 0, "rollout: horizon must be >= 0");
    check<InvalidArgument>(!context_raw.empty(), "rollout: empty context");
    const model::BatchLayout& lay = layout(context_raw[0].rows / cfg_.n_objects);
    Tensor<T> prev = model::normalize_obs(context_raw[0], cfg_.obs_dim);
    std::vector<Tensor<T>> preds;
    const int64_t total_steps = static_cast<int64_t>(context_raw.size()) - 1 + horizon;
    for (int64_t step = 0; step < total_steps; ++step) {
      Tape<T> t;
      t.set_grad_enabled(false);
      Tensor<T> x_host = step < static_cast<int64_t>(context_raw.size())
                             ? model::normalize_obs(context_raw[static_cast<size_t>(step)], cfg_.obs_dim)
                             : prev;
      prev = predict_step(t, t.constant(x_host), t.constant(edge_onehot), lay).val();
      if (step >= static_cast<int64_t>(context_raw.size()) - 1)
        preds.push_back(model::denormalize_obs(prev, cfg_.obs_dim));
    }
    return preds;
  }

 private:
  const model::BatchLayout& layout(int64_t B) {
    auto it = layouts_.find(B);
    if (it == layouts_.end()) it = layouts_.emplace(B, model::BatchLayout(hier_, B)).first;
    return it->second;
  }

  GtGraphMlpConfig cfg_;
  model::HierarchySpec hier_;
  model::ParamRegistry<T> reg_;
  model::Linear<T> embed_;
  model::PeerPass<T> peer_;
  model::Mlp<T> out_;
  std::map<int64_t, model::BatchLayout> layouts_;
};

// trainer closures; the KL weight and temperature slots are unused here

template <class T>
BatchLossFn<T> lstm_loss(JointLstm<T>& m) {
  return [&m](Tape<T>& t, const BatchView<T>& view, T, T, NoiseSource<T>&) -> Value<T> {
    const T denom =
        static_cast<T>(view.episode_ids.size()) * static_cast<T>(view.frames.size() - 1);
    return scale(m.teacher_forced_mse(t, view.frames), T(1) / denom);
  };
}

template <class T>
BatchLossFn<T> gt_graph_loss(GtGraphMlp<T>& m, const data::Dataset& ds) {
  return [&m, &ds](Tape<T>& t, const BatchView<T>& view, T, T, NoiseSource<T>&) -> Value<T> {
    std::vector<const sim::RelationGraph*> graphs;
    graphs.reserve(view.episode_ids.size());
    for (int64_t id : view.episode_ids)
      graphs.push_back(&ds.episodes.at(static_cast<size_t>(id)).graph);
    Tensor<T> edges = gt_edge_onehot<T>(graphs, m.config().edge_types);
    const T denom =
        static_cast<T>(view.episode_ids.size()) * static_cast<T>(view.frames.size() - 1);
    return scale(m.teacher_forced_mse(t, view.frames, edges), T(1) / denom);
  };
}

}  // namespace rein::baselines
