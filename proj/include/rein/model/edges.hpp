#pragma once

#include "rein/core/stochastic.hpp"
#include "rein/model/hierarchy.hpp"
#include "rein/model/layers.hpp"

namespace rein::model {

// Categorical belief over K relation types for every ordered pair of a
// level's neurons, batch-stacked in the BatchLayout::Pairs row order. Type 0
// is "no edge".
template <class T>
struct EdgeBelief {
  int32_t n = 0;
  int32_t types = 0;
  int64_t batch = 0;
  Tensor<T> logits;  // (batch * n * (n-1)) x types
  Tensor<T> sample;  // same shape, each row sums to 1

  bool rows_normalized(T tol = T(1e-6)) const {
    for (int64_t i = 0; i < sample.rows; ++i) {
      T s = 0;
      for (int64_t j = 0; j < sample.cols; ++j) s += sample.at(i, j);
      if (std::abs(s - T(1)) > tol) return false;
    }
    return true;
  }
};

// Sequence encoder + two message-passing rounds that turn per-node time
// series into per-pair type logits.
template <class T>
struct EdgeInference {
  GruCell<T> encoder;
  Mlp<T> edge_in;   // [e_i, e_j] -> hidden
  Mlp<T> node_mid;  // summed incident messages -> node hidden
  Mlp<T> head;      // [pair hidden, v_i, v_j] -> K logits

  static EdgeInference create(ParamRegistry<T>& reg, const std::string& name, int64_t obs_dim,
                              int64_t dim, int64_t types, RandomStream& rng) {
    check<InvalidArgument>(types >= 2, "edge inference needs at least 2 types, got ", types);
    EdgeInference e;
    e.encoder = GruCell<T>::create(reg, Group::phi, name + ".enc", obs_dim, dim, rng);
    e.edge_in = Mlp<T>::create(reg, Group::phi, name + ".edge_in", 2 * dim, dim, dim, rng);
    e.node_mid = Mlp<T>::create(reg, Group::phi, name + ".node_mid", dim, dim, dim, rng);
    e.head = Mlp<T>::create(reg, Group::phi, name + ".head", 3 * dim, dim, types, rng);
    return e;
  }

  // frames: per-time observation matrices, each (rows x obs_dim)
  Value<T> logits(Tape<T>& t, const std::vector<Tensor<T>>& frames,
                  const BatchLayout::Pairs& pairs, int64_t rows) const {
    check<InvalidArgument>(frames.size() >= 2, "edge inference needs T >= 2 frames, got ",
                           frames.size());
    check<InvalidArgument>(pairs.count > 0, "edge inference on a level without pairs");
    Value<T> h = t.constant(Tensor<T>(rows, encoder.hidden_dim()));
    for (const auto& f : frames) h = encoder.step(t, t.constant(f), h);

    Value<T> hs = gather_rows(h, pairs.send);
    Value<T> hr = gather_rows(h, pairs.recv);
    Value<T> pair_h = edge_in(t, concat_cols<T>({hs, hr}));
    Value<T> agg = scatter_add_rows(pair_h, pairs.recv, rows);
    Value<T> v2 = node_mid(t, agg);
    Value<T> vs = gather_rows(v2, pairs.send);
    Value<T> vr = gather_rows(v2, pairs.recv);
    return head(t, concat_cols<T>({pair_h, vs, vr}));
  }
};

// Dynamics message passing over a sampled edge set: one MLP per non-none
// type, messages gated by the sampled type weight and summed at receivers.
// Type 0 has no MLP and therefore contributes nothing.
template <class T>
struct PeerPass {
  std::vector<Mlp<T>> type_msg;
  int64_t out_dim = 0;

  static PeerPass create(ParamRegistry<T>& reg, Group g, const std::string& name,
                         int64_t feat_dim, int64_t dim, int64_t types, RandomStream& rng) {
    check<InvalidArgument>(types >= 2, "peer pass needs at least 2 types, got ", types);
    PeerPass p;
    p.out_dim = dim;
    for (int64_t k = 1; k < types; ++k)
      p.type_msg.push_back(
          Mlp<T>::create(reg, g, name + ".type" + std::to_string(k), 2 * feat_dim, dim, dim, rng));
    return p;
  }

  Value<T> operator()(Tape<T>& t, Value<T> node_feats, Value<T> edge_sample,
                      const BatchLayout::Pairs& pairs, int64_t rows) const {
    check<ShapeError>(edge_sample.rows() == pairs.count, "peer pass: sample rows ",
                      edge_sample.rows(), " != pair count ", pairs.count);
    Value<T> hs = gather_rows(node_feats, pairs.send);
    Value<T> hr = gather_rows(node_feats, pairs.recv);
    Value<T> e = concat_cols<T>({hs, hr});
    Value<T> msg;
    for (size_t k = 0; k < type_msg.size(); ++k) {
      const int64_t col = static_cast<int64_t>(k) + 1;
      Value<T> gated =
          colvec_gate(t, slice_cols(edge_sample, col, col + 1), type_msg[k](t, e));
      msg = k == 0 ? gated : add(msg, gated);
    }
    return scatter_add_rows(msg, pairs.recv, rows);
  }
};

// Uniform random one-hot edge types, symmetric per unordered pair, fully
// determined by (seed, episode id). Used by the p_random ablation.
template <class T>
Tensor<T> random_edge_sample(int32_t n, int32_t types, const std::vector<int64_t>& episode_ids,
                             uint64_t seed) {
  const int64_t per_ep = static_cast<int64_t>(n) * (n - 1);
  Tensor<T> out(static_cast<int64_t>(episode_ids.size()) * per_ep, types);
  for (size_t e = 0; e < episode_ids.size(); ++e) {
    RandomStream rng = RandomStream::derive(seed, {0x9e3779b9u, static_cast<uint64_t>(episode_ids[e])});
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = i + 1; j < n; ++j) {
        const auto k = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(types)));
        out.at(static_cast<int64_t>(e) * per_ep + pair_slot(n, i, j), k) = T(1);
        out.at(static_cast<int64_t>(e) * per_ep + pair_slot(n, j, i), k) = T(1);
      }
  }
  return out;
}

// One-hot argmax belief for deterministic evaluation.
template <class T>
Tensor<T> hard_sample_from_logits(const Tensor<T>& logits) {
  return argmax_one_hot(logits);
}

}  // namespace rein::model
