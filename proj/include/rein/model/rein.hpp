#pragma once

#include <optional>

#include "rein/model/edges.hpp"

namespace rein::model {

enum class Ablation { full, upward, downward, p_random, p_learned };

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "upward") return Ablation::upward;
  if (s == "downward") return Ablation::downward;
  if (s == "p_random") return Ablation::p_random;
  if (s == "p_learned") return Ablation::p_learned;
  fail<ConfigError>("unknown ablation mode '", s,
                    "', expected full|upward|downward|p_random|p_learned");
}

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::upward: return "upward";
    case Ablation::downward: return "downward";
    case Ablation::p_random: return "p_random";
    case Ablation::p_learned: return "p_learned";
  }
  return "?";
}

struct ReinConfig {
  int32_t n_objects = 5;
  int32_t obs_dim = 4;
  int32_t n_levels = 2;
  int32_t mid_groups = 2;  // only used when n_levels == 3
  int32_t neuron_dim = 64;
  int32_t edge_types = 2;
  int32_t heads = 4;
  int32_t control_dim = 0;
  bool per_step_edges = false;
  bool hard_edges = true;
  std::string ablation = "full";
  uint64_t init_seed = 1;
  uint64_t edge_seed = 77;  // p_random draws

  HierarchySpec hierarchy() const {
    check<ConfigError>(n_levels == 2 || n_levels == 3, "n_levels must be 2 or 3, got ", n_levels);
    return n_levels == 2 ? HierarchySpec::flat(n_objects)
                         : HierarchySpec::grouped(n_objects, mid_groups);
  }
};

template <class T>
struct ElboTerms {
  std::vector<T> recon_steps;
  std::vector<T> kl_steps;
  T kl_weight = T(0);
  T recon_total = T(0);
  T kl_total = T(0);
  T total = T(0);
};

// Multi-head attention where lower-level neurons query the level above.
// Queries come from the querying level's recurrent state; keys and values
// from the upper level's fresh state and latent sample.
template <class T>
struct DownAttention {
  Linear<T> wq, wk, wv, wo;
  int32_t heads = 1;

  static DownAttention create(ParamRegistry<T>& reg, const std::string& name, int64_t dim,
                              int64_t kv_dim, int32_t heads, RandomStream& rng) {
    check<ConfigError>(heads >= 1 && dim % heads == 0, "attention heads (", heads,
                       ") must divide neuron_dim (", dim, ")");
    DownAttention a;
    a.heads = heads;
    a.wq = Linear<T>::create(reg, Group::phi, name + ".wq", dim, dim, rng);
    a.wk = Linear<T>::create(reg, Group::phi, name + ".wk", kv_dim, dim, rng);
    a.wv = Linear<T>::create(reg, Group::phi, name + ".wv", kv_dim, dim, rng);
    a.wo = Linear<T>::create(reg, Group::phi, name + ".wo", dim, dim, rng);
    return a;
  }

  Value<T> operator()(Tape<T>& t, Value<T> query_src, Value<T> kv_src,
                      const BatchLayout::Attn& attn, int64_t query_rows) const {
    const int64_t dim = wq.out_dim();
    const int64_t dh = dim / heads;
    Value<T> q = wq(t, query_src);
    Value<T> k = wk(t, kv_src);
    Value<T> v = wv(t, kv_src);
    std::vector<Value<T>> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int32_t hh = 0; hh < heads; ++hh) {
      const int64_t c0 = hh * dh, c1 = c0 + dh;
      Value<T> qg = gather_rows(slice_cols(q, c0, c1), attn.query);
      Value<T> kg = gather_rows(slice_cols(k, c0, c1), attn.key);
      Value<T> score = scale(sum_axis(mul(qg, kg), 1), T(1) / std::sqrt(static_cast<T>(dh)));
      Value<T> w = segment_softmax(t, score, attn.query, query_rows);
      Value<T> vg = gather_rows(slice_cols(v, c0, c1), attn.key);
      outs.push_back(scatter_add_rows(colvec_gate(t, w, vg), attn.query, query_rows));
    }
    return wo(t, concat_cols(outs));
  }
};

// Hierarchical recurrent latent-variable model over interacting objects.
// Each level's neurons are updated from three channels per step: aggregation
// from children (z_u), attention over the level above (z_d), and messages
// over an inferred same-level graph (z_c). A GRU turns the concatenated
// channels into a Gaussian posterior; a second GRU over past observations
// provides the learned prior; a decoder GRU emits next-state deltas.
template <class T>
class Rein {
 public:
  explicit Rein(ReinConfig cfg) : cfg_(std::move(cfg)), hier_(cfg_.hierarchy()) {
    mode_ = parse_ablation(cfg_.ablation);
    zero_zu_ = mode_ == Ablation::downward;
    zero_zd_ = mode_ == Ablation::upward;
    check<ConfigError>(cfg_.neuron_dim >= 1, "neuron_dim must be positive");
    check<ConfigError>(cfg_.edge_types >= 2, "edge_types must be at least 2");
    build();
  }

  const ReinConfig& config() const { return cfg_; }
  const HierarchySpec& hierarchy() const { return hier_; }
  ParamRegistry<T>& params() { return reg_; }
  const ParamRegistry<T>& params() const { return reg_; }
  Ablation mode() const { return mode_; }

  // test hooks mirroring the channel-zeroing ablation identities
  void force_zero_upward(bool on) { zero_zu_ = on; }
  void force_zero_downward(bool on) { zero_zd_ = on; }

  struct Carried {
    std::vector<Tensor<T>> h;
    std::vector<Tensor<T>> prior_h;
    Tensor<T> dec_h;
  };

  Carried init_carried(int64_t batch) const {
    Carried c;
    const BatchLayout& lay = layout(batch);
    for (int32_t m = 0; m < hier_.n_levels(); ++m) {
      c.h.emplace_back(lay.rows(m), cfg_.neuron_dim);
      c.prior_h.emplace_back(lay.rows(m), cfg_.neuron_dim);
    }
    c.dec_h = Tensor<T>(lay.rows(0), cfg_.neuron_dim);
    return c;
  }

  Tensor<T> normalize(const Tensor<T>& obs_raw) const {
    return normalize_obs(obs_raw, cfg_.obs_dim);
  }

  Tensor<T> denormalize(const Tensor<T>& obs_norm) const {
    return denormalize_obs(obs_norm, cfg_.obs_dim);
  }

  // ---- training objective ----

  struct ElboResult {
    ElboTerms<T> terms;
    Value<T> total;  // on the caller's tape
  };

  // frames: raw observations, one (B*n_objects x obs_dim) matrix per time
  // step, teacher-forced. episode_ids drive the p_random edge draw.
  ElboResult elbo(Tape<T>& t, const std::vector<Tensor<T>>& frames_raw, T kl_weight, T tau,
                  NoiseSource<T>& noise, const std::vector<int64_t>& episode_ids,
                  const Tensor<T>* control = nullptr) {
    check<InvalidArgument>(frames_raw.size() >= 2, "elbo needs T >= 2 frames, got ",
                           frames_raw.size());
    const int64_t B = infer_batch(frames_raw[0]);
    check<InvalidArgument>(static_cast<int64_t>(episode_ids.size()) == B,
                           "elbo: episode_ids size ", episode_ids.size(), " != batch ", B);
    const BatchLayout& lay = layout(B);

    std::vector<Tensor<T>> frames;
    frames.reserve(frames_raw.size());
    for (const auto& f : frames_raw) frames.push_back(normalize(f));

    std::vector<Value<T>> state_h, prior_h;
    for (int32_t m = 0; m < hier_.n_levels(); ++m) {
      state_h.push_back(t.constant(Tensor<T>(lay.rows(m), cfg_.neuron_dim)));
      prior_h.push_back(t.constant(Tensor<T>(lay.rows(m), cfg_.neuron_dim)));
    }
    Value<T> dec_h = t.constant(Tensor<T>(lay.rows(0), cfg_.neuron_dim));
    Value<T> ctrl = control_value(t, control, B);

    std::vector<std::optional<Value<T>>> edges;
    if (!cfg_.per_step_edges) edges = edge_samples(t, frames, lay, tau, noise, episode_ids);

    ElboResult out;
    out.terms.kl_weight = kl_weight;
    Value<T> recon_sum, kl_sum;
    for (size_t step = 0; step + 1 < frames.size(); ++step) {
      if (cfg_.per_step_edges) {
        const size_t upto = std::max<size_t>(step + 1, 2);
        std::vector<Tensor<T>> prefix(frames.begin(), frames.begin() + upto);
        edges = edge_samples(t, prefix, lay, tau, noise, episode_ids);
      }
      StepOut so = forward_step(t, lay, frames[step], state_h, prior_h, dec_h, edges, ctrl,
                                /*sample_z=*/true, &noise);
      Value<T> target = t.constant(frames[step + 1]);
      Value<T> rec = sum_all(square(sub(so.pred, target)));
      Value<T> kl = so.kl_levels[0];
      for (size_t m = 1; m < so.kl_levels.size(); ++m) kl = add(kl, so.kl_levels[m]);

      out.terms.recon_steps.push_back(rec.val().item());
      out.terms.kl_steps.push_back(kl.val().item());
      recon_sum = step == 0 ? rec : add(recon_sum, rec);
      kl_sum = step == 0 ? kl : add(kl_sum, kl);

      state_h = so.h_new;
      prior_h = so.prior_h_new;
      dec_h = so.dec_h_new;
    }
    out.total = add(recon_sum, scale(kl_sum, kl_weight));
    out.terms.recon_total = recon_sum.val().item();
    out.terms.kl_total = kl_sum.val().item();
    out.terms.total = out.total.val().item();
    return out;
  }

  // ---- closed-loop prediction ----

  // Feeds the raw context through the posterior path, then rolls forward H
  // steps reusing its own predictions as inputs. Gradients are never
  // recorded; each step gets a fresh throwaway tape.
  std::vector<Tensor<T>> rollout(const std::vector<Tensor<T>>& context_raw, int64_t horizon,
                                 bool sample_mode, NoiseSource<T>& noise,
                                 const std::vector<int64_t>& episode_ids,
                                 const Tensor<T>* control = nullptr) {
    check<InvalidArgument>(horizon >= 0, "rollout: horizon must be >= 0, got ", horizon);
    check<InvalidArgument>(context_raw.size() >= 2, "rollout needs a context of >= 2 frames");
    const int64_t B = infer_batch(context_raw[0]);
    const BatchLayout& lay = layout(B);

    std::vector<Tensor<T>> ctx;
    ctx.reserve(context_raw.size());
    for (const auto& f : context_raw) ctx.push_back(normalize(f));

    // edge belief from the context only, frozen for the whole rollout
    Tensor<T> edge_host;
    bool have_edges = lay.peer[0].count > 0;
    if (have_edges) edge_host = eval_edge_sample(ctx, lay, episode_ids);

    Carried carried = init_carried(B);
    Tensor<T> prev = ctx[0];
    std::vector<Tensor<T>> preds;
    const int64_t total_steps = static_cast<int64_t>(ctx.size()) - 1 + horizon;
    for (int64_t step = 0; step < total_steps; ++step) {
      Tape<T> t;
      t.set_grad_enabled(false);
      std::vector<Value<T>> h, ph;
      for (int32_t m = 0; m < hier_.n_levels(); ++m) {
        h.push_back(t.constant(carried.h[static_cast<size_t>(m)]));
        ph.push_back(t.constant(carried.prior_h[static_cast<size_t>(m)]));
      }
      Value<T> dh = t.constant(carried.dec_h);
      Value<T> ctrl = control_value(t, control, B);
      std::vector<std::optional<Value<T>>> edges(hier_.n_levels());
      if (have_edges) edges[0] = t.constant(edge_host);

      const Tensor<T>& obs = step < static_cast<int64_t>(ctx.size()) ? ctx[static_cast<size_t>(step)] : prev;
      StepOut so = forward_step(t, lay, obs, h, ph, dh, edges, ctrl, sample_mode,
                                sample_mode ? &noise : nullptr);

      for (int32_t m = 0; m < hier_.n_levels(); ++m) {
        carried.h[static_cast<size_t>(m)] = so.h_new[static_cast<size_t>(m)].val();
        carried.prior_h[static_cast<size_t>(m)] = so.prior_h_new[static_cast<size_t>(m)].val();
      }
      carried.dec_h = so.dec_h_new.val();
      prev = so.pred.val();
      if (step >= static_cast<int64_t>(ctx.size()) - 1) preds.push_back(denormalize(prev));
    }
    check<InvalidArgument>(static_cast<int64_t>(preds.size()) == horizon, "rollout bookkeeping");
    return preds;
  }

  // Bottom-level edge belief for evaluation: logits from the (normalized)
  // sequence, deterministic argmax sample.
  EdgeBelief<T> infer_edges(const std::vector<Tensor<T>>& frames_raw,
                            const std::vector<int64_t>& episode_ids) {
    const int64_t B = infer_batch(frames_raw[0]);
    const BatchLayout& lay = layout(B);
    EdgeBelief<T> belief;
    belief.n = cfg_.n_objects;
    belief.types = cfg_.edge_types;
    belief.batch = B;
    if (lay.peer[0].count == 0) {
      belief.logits = Tensor<T>(0, cfg_.edge_types);
      belief.sample = Tensor<T>(0, cfg_.edge_types);
      return belief;
    }
    if (mode_ == Ablation::p_random) {
      belief.sample = random_edge_sample<T>(cfg_.n_objects, cfg_.edge_types, episode_ids,
                                            cfg_.edge_seed);
      belief.logits = belief.sample;
      return belief;
    }
    std::vector<Tensor<T>> frames;
    frames.reserve(frames_raw.size());
    for (const auto& f : frames_raw) frames.push_back(normalize(f));
    Tape<T> t;
    t.set_grad_enabled(false);
    belief.logits = edge_inf_[0]->logits(t, frames, lay.peer[0], lay.rows(0)).val();
    belief.sample = hard_sample_from_logits(belief.logits);
    return belief;
  }

  int64_t bottom_rows(int64_t batch) const { return batch * cfg_.n_objects; }

  // raw upward channel per level (no ablation zeroing); bottom level embeds
  // the observation, higher levels pool children with learned attention
  std::vector<Value<T>> upward_channels(Tape<T>& t, const BatchLayout& lay, Value<T> obs) const {
    std::vector<Value<T>> z_u(static_cast<size_t>(hier_.n_levels()));
    z_u[0] = rein::tanh(obs_embed_(t, obs));
    for (int32_t m = 1; m < hier_.n_levels(); ++m) {
      Value<T> mapped =
          rein::tanh(up_map_[static_cast<size_t>(m - 1)](t, z_u[static_cast<size_t>(m - 1)]));
      Value<T> score = up_score_[static_cast<size_t>(m - 1)](t, mapped);
      Value<T> w = segment_softmax(t, score, lay.up[static_cast<size_t>(m - 1)], lay.rows(m));
      z_u[static_cast<size_t>(m)] = scatter_add_rows(colvec_gate(t, w, mapped),
                                                     lay.up[static_cast<size_t>(m - 1)], lay.rows(m));
    }
    return z_u;
  }

  const BatchLayout& layout_for(int64_t B) const { return layout(B); }

 private:
  struct StepOut {
    Value<T> pred;
    std::vector<Value<T>> h_new, prior_h_new, kl_levels;
    Value<T> dec_h_new;
  };

  int64_t infer_batch(const Tensor<T>& frame) const {
    check<ShapeError>(frame.cols == cfg_.obs_dim && frame.rows % cfg_.n_objects == 0,
                      "frame shape ", frame.shape_str(), " does not match ", cfg_.n_objects,
                      " objects x ", cfg_.obs_dim);
    return frame.rows / cfg_.n_objects;
  }

  const BatchLayout& layout(int64_t B) const {
    auto it = layouts_.find(B);
    if (it == layouts_.end()) it = layouts_.emplace(B, BatchLayout(hier_, B)).first;
    return it->second;
  }

  Value<T> control_value(Tape<T>& t, const Tensor<T>* control, int64_t B) {
    if (cfg_.control_dim == 0) return Value<T>{};
    check<InvalidArgument>(control != nullptr && control->rows == B &&
                               control->cols == cfg_.control_dim,
                           "control signal must be batch x ", cfg_.control_dim);
    return ctrl_embed_(t, t.constant(*control));
  }

  // per-level observation proxies: bottom = the observation, higher levels =
  // mean over member objects
  std::vector<Tensor<T>> level_proxies(const Tensor<T>& obs, const BatchLayout& lay) const {
    std::vector<Tensor<T>> proxies{obs};
    for (int32_t m = 0; m + 1 < hier_.n_levels(); ++m) {
      const auto& up = *lay.up[static_cast<size_t>(m)];
      const auto& inv = lay.child_count_inv[static_cast<size_t>(m)];
      Tensor<T> next(lay.rows(m + 1), obs.cols);
      const Tensor<T>& cur = proxies.back();
      for (int64_t i = 0; i < cur.rows; ++i) {
        const int64_t p = up[static_cast<size_t>(i)];
        for (int64_t j = 0; j < cur.cols; ++j) next.at(p, j) += cur.at(i, j);
      }
      for (int64_t i = 0; i < next.rows; ++i)
        for (int64_t j = 0; j < next.cols; ++j)
          next.at(i, j) *= static_cast<T>(inv[static_cast<size_t>(i)]);
      proxies.push_back(std::move(next));
    }
    return proxies;
  }

  // per-frame proxies for every level; index [level][time]
  std::vector<std::vector<Tensor<T>>> proxy_sequences(const std::vector<Tensor<T>>& frames,
                                                      const BatchLayout& lay) const {
    std::vector<std::vector<Tensor<T>>> seq(static_cast<size_t>(hier_.n_levels()));
    for (const auto& f : frames) {
      auto p = level_proxies(f, lay);
      for (int32_t m = 0; m < hier_.n_levels(); ++m)
        seq[static_cast<size_t>(m)].push_back(std::move(p[static_cast<size_t>(m)]));
    }
    return seq;
  }

  // sampled edge one-hots per level (train path, lives on the tape)
  std::vector<std::optional<Value<T>>> edge_samples(Tape<T>& t,
                                                    const std::vector<Tensor<T>>& frames,
                                                    const BatchLayout& lay, T tau,
                                                    NoiseSource<T>& noise,
                                                    const std::vector<int64_t>& episode_ids) {
    std::vector<std::optional<Value<T>>> out(static_cast<size_t>(hier_.n_levels()));
    auto proxies = proxy_sequences(frames, lay);
    for (int32_t m = 0; m < hier_.n_levels(); ++m) {
      if (lay.peer[static_cast<size_t>(m)].count == 0) continue;
      if (mode_ == Ablation::p_random) {
        out[static_cast<size_t>(m)] = t.constant(random_edge_sample<T>(
            hier_.size(m), cfg_.edge_types, episode_ids, cfg_.edge_seed + static_cast<uint64_t>(m)));
        continue;
      }
      Value<T> logits = edge_inf_[static_cast<size_t>(m)]->logits(
          t, proxies[static_cast<size_t>(m)], lay.peer[static_cast<size_t>(m)], lay.rows(m));
      out[static_cast<size_t>(m)] =
          gumbel_softmax_sample(logits, tau, cfg_.hard_edges, noise);
    }
    return out;
  }

  Tensor<T> eval_edge_sample(const std::vector<Tensor<T>>& frames_norm, const BatchLayout& lay,
                             const std::vector<int64_t>& episode_ids) {
    if (mode_ == Ablation::p_random)
      return random_edge_sample<T>(cfg_.n_objects, cfg_.edge_types, episode_ids, cfg_.edge_seed);
    Tape<T> t;
    t.set_grad_enabled(false);
    Tensor<T> logits =
        edge_inf_[0]->logits(t, frames_norm, lay.peer[0], lay.rows(0)).val();
    return hard_sample_from_logits(logits);
  }

  StepOut forward_step(Tape<T>& t, const BatchLayout& lay, const Tensor<T>& obs_host,
                       const std::vector<Value<T>>& h_prev, const std::vector<Value<T>>& prior_h,
                       Value<T> dec_h, const std::vector<std::optional<Value<T>>>& edges,
                       Value<T> ctrl, bool sample_z, NoiseSource<T>* noise) {
    const int32_t L = hier_.n_levels();
    const int64_t D = cfg_.neuron_dim;
    Value<T> obs = t.constant(obs_host);
    auto proxies = level_proxies(obs_host, lay);

    std::vector<Value<T>> z_u = upward_channels(t, lay, obs);
    if (zero_zu_)
      for (int32_t m = 0; m < L; ++m)
        z_u[static_cast<size_t>(m)] = t.constant(Tensor<T>(lay.rows(m), D));

    // top-down sweep: posterior, latent, and the channels that need the
    // freshly updated level above
    StepOut so;
    so.h_new.resize(static_cast<size_t>(L));
    so.prior_h_new.resize(static_cast<size_t>(L));
    so.kl_levels.resize(static_cast<size_t>(L));
    std::vector<Value<T>> z_r(static_cast<size_t>(L));
    Value<T> bottom_hcat;
    for (int32_t m = L - 1; m >= 0; --m) {
      Value<T> z_d;
      if (m == L - 1) {
        z_d = ctrl.valid() ? ctrl : t.constant(Tensor<T>(lay.rows(m), D));
      } else {
        Value<T> kv = concat_cols<T>({so.h_new[static_cast<size_t>(m + 1)], z_r[static_cast<size_t>(m + 1)]});
        z_d = attn_[static_cast<size_t>(m)](t, h_prev[static_cast<size_t>(m)], kv,
                                            lay.down[static_cast<size_t>(m)], lay.rows(m));
      }
      if (zero_zd_) z_d = t.constant(Tensor<T>(lay.rows(m), D));

      Value<T> z_c;
      if (edges[static_cast<size_t>(m)].has_value()) {
        Value<T> feats = concat_cols<T>({h_prev[static_cast<size_t>(m)], z_u[static_cast<size_t>(m)]});
        z_c = peer_[static_cast<size_t>(m)](t, feats, *edges[static_cast<size_t>(m)],
                                            lay.peer[static_cast<size_t>(m)], lay.rows(m));
      } else {
        z_c = t.constant(Tensor<T>(lay.rows(m), D));
      }

      Value<T> hcat = concat_cols<T>({z_u[static_cast<size_t>(m)], z_d, z_c});
      if (m == 0) bottom_hcat = hcat;
      Value<T> h_new = gru_phi_[static_cast<size_t>(m)].step(t, hcat, h_prev[static_cast<size_t>(m)]);
      so.h_new[static_cast<size_t>(m)] = h_new;

      Value<T> mu = mu_head_[static_cast<size_t>(m)](t, h_new);
      Value<T> lv = lv_head_[static_cast<size_t>(m)](t, h_new);
      if (sample_z) {
        check<InvalidArgument>(noise != nullptr, "sampling requires a noise source");
        z_r[static_cast<size_t>(m)] = gaussian_reparameterize(mu, lv, *noise);
      } else {
        z_r[static_cast<size_t>(m)] = mu;
      }

      Value<T> pmu = prior_mu_[static_cast<size_t>(m)](t, prior_h[static_cast<size_t>(m)]);
      Value<T> plv = prior_lv_[static_cast<size_t>(m)](t, prior_h[static_cast<size_t>(m)]);
      so.kl_levels[static_cast<size_t>(m)] = kl_diag_gaussian(mu, lv, pmu, plv);
    }

    // decode next state as a delta on the current one
    std::vector<Value<T>> en_parts{z_r[0], bottom_hcat};
    if (ctrl.valid()) en_parts.push_back(gather_rows(ctrl, bottom_ctrl_index(lay)));
    Value<T> g = en_(t, concat_cols(en_parts));
    so.dec_h_new = gru_theta_.step(t, g, dec_h);
    so.pred = add(obs, out_head_(t, so.dec_h_new));

    // learned prior absorbs the current observation for the next step
    for (int32_t m = 0; m < L; ++m)
      so.prior_h_new[static_cast<size_t>(m)] =
          prior_gru_[static_cast<size_t>(m)].step(t, t.constant(proxies[static_cast<size_t>(m)]),
                                                  prior_h[static_cast<size_t>(m)]);
    return so;
  }

  RowIndex bottom_ctrl_index(const BatchLayout& lay) {
    auto it = ctrl_idx_.find(lay.batch);
    if (it != ctrl_idx_.end()) return it->second;
    std::vector<int32_t> idx;
    idx.reserve(static_cast<size_t>(lay.rows(0)));
    for (int64_t e = 0; e < lay.batch; ++e)
      for (int32_t i = 0; i < cfg_.n_objects; ++i) idx.push_back(static_cast<int32_t>(e));
    auto r = make_row_index(std::move(idx));
    ctrl_idx_.emplace(lay.batch, r);
    return r;
  }

  void build() {
    RandomStream rng = RandomStream::derive(cfg_.init_seed, {0xadd});
    const int32_t L = hier_.n_levels();
    const int64_t D = cfg_.neuron_dim;

    obs_embed_ = Linear<T>::create(reg_, Group::phi, "obs_embed", cfg_.obs_dim, D, rng);
    if (cfg_.control_dim > 0)
      ctrl_embed_ = Linear<T>::create(reg_, Group::phi, "ctrl_embed", cfg_.control_dim, D, rng);

    for (int32_t m = 1; m < L; ++m) {
      const std::string tag = "up" + std::to_string(m);
      up_map_.push_back(Linear<T>::create(reg_, Group::phi, tag + ".map", D, D, rng));
      up_score_.push_back(Linear<T>::create(reg_, Group::phi, tag + ".score", D, 1, rng));
    }
    for (int32_t m = 0; m + 1 < L; ++m)
      attn_.push_back(DownAttention<T>::create(reg_, "down" + std::to_string(m), D, 2 * D,
                                               cfg_.heads, rng));

    edge_inf_.resize(static_cast<size_t>(L));
    peer_.resize(static_cast<size_t>(L));
    for (int32_t m = 0; m < L; ++m) {
      if (hier_.size(m) < 2) continue;
      edge_inf_[static_cast<size_t>(m)] = std::make_unique<EdgeInference<T>>(EdgeInference<T>::create(
          reg_, "edges" + std::to_string(m), cfg_.obs_dim, D, cfg_.edge_types, rng));
      peer_[static_cast<size_t>(m)] = PeerPass<T>::create(
          reg_, Group::psi, "peer" + std::to_string(m), 2 * D, D, cfg_.edge_types, rng);
    }

    for (int32_t m = 0; m < L; ++m) {
      const std::string tag = "lvl" + std::to_string(m);
      gru_phi_.push_back(GruCell<T>::create(reg_, Group::phi, tag + ".gru_phi", 3 * D, D, rng));
      mu_head_.push_back(Linear<T>::create(reg_, Group::phi, tag + ".mu", D, D, rng));
      lv_head_.push_back(Linear<T>::create(reg_, Group::phi, tag + ".logvar", D, D, rng, true));
      prior_gru_.push_back(
          GruCell<T>::create(reg_, Group::psi, tag + ".gru_prior", cfg_.obs_dim, D, rng));
      prior_mu_.push_back(Linear<T>::create(reg_, Group::psi, tag + ".prior_mu", D, D, rng));
      prior_lv_.push_back(Linear<T>::create(reg_, Group::psi, tag + ".prior_logvar", D, D, rng, true));
    }

    const int64_t en_in = D + 3 * D + (cfg_.control_dim > 0 ? D : 0);
    en_ = Mlp<T>::create(reg_, Group::theta, "dec.en", en_in, D, D, rng);
    gru_theta_ = GruCell<T>::create(reg_, Group::theta, "dec.gru_theta", D, D, rng);
    out_head_ = Linear<T>::create(reg_, Group::theta, "dec.out", D, cfg_.obs_dim, rng, true);
  }

  ReinConfig cfg_;
  HierarchySpec hier_;
  Ablation mode_ = Ablation::full;
  bool zero_zu_ = false, zero_zd_ = false;
  ParamRegistry<T> reg_;

  Linear<T> obs_embed_, ctrl_embed_;
  std::vector<Linear<T>> up_map_, up_score_;
  std::vector<DownAttention<T>> attn_;
  std::vector<std::unique_ptr<EdgeInference<T>>> edge_inf_;
  std::vector<PeerPass<T>> peer_;
  std::vector<GruCell<T>> gru_phi_, prior_gru_;
  std::vector<Linear<T>> mu_head_, lv_head_, prior_mu_, prior_lv_;
  Mlp<T> en_;
  GruCell<T> gru_theta_;
  Linear<T> out_head_;

  mutable std::map<int64_t, BatchLayout> layouts_;
  std::map<int64_t, RowIndex> ctrl_idx_;
};

}  // namespace rein::model
