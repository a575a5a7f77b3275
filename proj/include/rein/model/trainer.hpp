#pragma once

#include <functional>

#include "rein/core/adam.hpp"
#include "rein/core/gradcheck.hpp"
#include "rein/data/dataset.hpp"
#include "rein/model/rein.hpp"

namespace rein::model {

template <class T>
struct BatchView {
  std::vector<Tensor<T>> frames;     // one (B*n_objects x obs_dim) matrix per step
  std::vector<int64_t> episode_ids;  // dataset indices, stable across shuffling
};

// stacks episodes row-wise per time step and widens float storage to T
template <class T>
std::vector<Tensor<T>> stack_frames(const data::Dataset& ds, const std::vector<int64_t>& eps,
                                    int64_t t0, int64_t t1) {
  check<InvalidArgument>(t0 >= 0 && t1 > t0 && t1 <= ds.frames, "frame range [", t0, ",", t1,
                         ") out of 0..", ds.frames);
  const int64_t n = ds.n_objects;
  std::vector<Tensor<T>> out;
  out.reserve(static_cast<size_t>(t1 - t0));
  for (int64_t t = t0; t < t1; ++t) {
    Tensor<T> m(static_cast<int64_t>(eps.size()) * n, 4);
    for (size_t b = 0; b < eps.size(); ++b) {
      const auto& ep = ds.episodes.at(static_cast<size_t>(eps[b]));
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < 4; ++j)
          m.at(static_cast<int64_t>(b) * n + i, j) = static_cast<T>(ep.traj.at(t, i * 4 + j));
    }
    out.push_back(std::move(m));
  }
  return out;
}

template <class T>
struct TrainConfig {
  int64_t epochs = 30;
  int64_t batch = 50;
  T lr = T(5e-4);
  T clip = T(5);
  T tau_start = T(5);
  T tau_end = T(0.5);
  int64_t kl_warmup_epochs = 10;
  uint64_t seed = 123;
};

template <class T>
struct EpochStats {
  T mean_loss = T(0);
  int64_t steps = 0;
};

// Loss callback: given a tape, a stacked minibatch, the current KL weight and
// relaxation temperature, and a per-step noise stream, return the scalar
// minibatch loss to minimize.
template <class T>
using BatchLossFn =
    std::function<Value<T>(Tape<T>&, const BatchView<T>&, T kl_weight, T tau, NoiseSource<T>&)>;

// Deterministic minibatch loop. Shuffle order derives from (seed, epoch) and
// sampling noise from (seed, global_step), so training is a pure function of
// the config and dataset: resuming from any step boundary reproduces the
// uninterrupted run bitwise.
template <class T>
class Trainer {
 public:
  Trainer(TrainConfig<T> cfg, ParamRegistry<T>& params) : cfg_(std::move(cfg)), params_(&params) {
    check<ConfigError>(cfg_.epochs >= 1, "epochs must be >= 1");
    check<ConfigError>(cfg_.batch >= 1, "batch must be >= 1");
    check<ConfigError>(cfg_.tau_start > T(0) && cfg_.tau_end > T(0), "tau must stay positive");
    AdamConfig ac;
    ac.lr = static_cast<double>(cfg_.lr);
    opt_ = Adam<T>(ac);
    opt_.init(params.all());
  }

  const TrainConfig<T>& config() const { return cfg_; }
  Adam<T>& optimizer() { return opt_; }
  int64_t epoch() const { return epoch_; }
  int64_t step_in_epoch() const { return step_in_epoch_; }
  int64_t global_step() const { return global_step_; }
  const std::vector<EpochStats<T>>& history() const { return history_; }
  T pending_loss() const { return pending_loss_; }
  int64_t pending_steps() const { return pending_steps_; }

  // checkpointing restores progress counters through these; the pending
  // accumulators make a mid-epoch resume reproduce epoch means exactly
  void restore_progress(int64_t epoch, int64_t step_in_epoch, int64_t global_step,
                        std::vector<EpochStats<T>> history, T pending_loss = T(0),
                        int64_t pending_steps = 0) {
    epoch_ = epoch;
    step_in_epoch_ = step_in_epoch;
    global_step_ = global_step;
    history_ = std::move(history);
    pending_loss_ = pending_loss;
    pending_steps_ = pending_steps;
  }

  int64_t steps_per_epoch(const data::Dataset& ds) const {
    const int64_t n = static_cast<int64_t>(ds.episodes.size());
    check<InvalidArgument>(n >= 1, "training needs at least one episode");
    return (n + cfg_.batch - 1) / cfg_.batch;
  }

  int64_t total_steps(const data::Dataset& ds) const { return cfg_.epochs * steps_per_epoch(ds); }

  bool done(const data::Dataset& ds) const { return epoch_ >= cfg_.epochs; }

  T tau_at(int64_t step, int64_t total) const {
    if (total <= 1) return cfg_.tau_end;
    const T f = static_cast<T>(std::min(step, total - 1)) / static_cast<T>(total - 1);
    return cfg_.tau_start + (cfg_.tau_end - cfg_.tau_start) * f;
  }

  T kl_weight_at(int64_t step, int64_t spe) const {
    if (cfg_.kl_warmup_epochs <= 0) return T(1);
    const T denom = static_cast<T>(cfg_.kl_warmup_epochs * spe);
    return std::min(T(1), static_cast<T>(step) / denom);
  }

  // one optimizer step; returns false if training already finished
  bool step_once(const data::Dataset& ds, const BatchLossFn<T>& fn) {
    if (done(ds)) return false;
    const int64_t n = static_cast<int64_t>(ds.episodes.size());
    const int64_t spe = steps_per_epoch(ds);

    std::vector<int64_t> order = epoch_order(n);
    const int64_t b0 = step_in_epoch_ * cfg_.batch;
    const int64_t b1 = std::min(n, b0 + cfg_.batch);
    BatchView<T> view;
    view.episode_ids.assign(order.begin() + b0, order.begin() + b1);
    view.frames = stack_frames<T>(ds, view.episode_ids, 0, ds.frames);

    const T tau = tau_at(global_step_, total_steps(ds));
    const T klw = kl_weight_at(global_step_, spe);
    RngNoise<T> noise(RandomStream::derive(cfg_.seed, {0x5eedULL, static_cast<uint64_t>(global_step_)}));

    Tape<T> tape;
    zero_grads(params_->all());
    Value<T> loss = fn(tape, view, klw, tau, noise);
    const T loss_val = loss.val().item();
    if (!std::isfinite(loss_val))
      fail<NumericError>("non-finite loss at epoch ", epoch_, " step ", step_in_epoch_,
                         " (group norms: ", group_norms(), ")");
    tape.backward(loss);
    clip_global_norm(params_->all(), cfg_.clip);
    opt_.step(params_->all());

    pending_loss_ += loss_val;
    pending_steps_ += 1;
    global_step_ += 1;
    step_in_epoch_ += 1;
    if (step_in_epoch_ >= spe) {
      history_.push_back({pending_loss_ / static_cast<T>(pending_steps_), pending_steps_});
      pending_loss_ = T(0);
      pending_steps_ = 0;
      step_in_epoch_ = 0;
      epoch_ += 1;
    }
    return true;
  }

  using EpochCallback = std::function<void(int64_t epoch, const EpochStats<T>&)>;

  void run(const data::Dataset& ds, const BatchLossFn<T>& fn, EpochCallback cb = nullptr) {
    while (!done(ds)) {
      const int64_t before = epoch_;
      step_once(ds, fn);
      if (epoch_ != before && cb) cb(before, history_.back());
    }
  }

 private:
  std::vector<int64_t> epoch_order(int64_t n) const {
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    RandomStream rng = RandomStream::derive(cfg_.seed, {0x0edeULL, static_cast<uint64_t>(epoch_)});
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = rng.uniform_int(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    return order;
  }

  std::string group_norms() const {
    std::string out;
    for (Group g : {Group::phi, Group::psi, Group::theta, Group::beta}) {
      double acc = 0;
      for (auto* p : params_->group(g))
        for (const T& v : p->value.v) acc += static_cast<double>(v) * static_cast<double>(v);
      if (!out.empty()) out += ", ";
      out += model::to_string(g);
      out += "=";
      out += std::to_string(std::sqrt(acc));
    }
    return out;
  }

  TrainConfig<T> cfg_;
  ParamRegistry<T>* params_;
  Adam<T> opt_;
  int64_t epoch_ = 0, step_in_epoch_ = 0, global_step_ = 0;
  T pending_loss_ = T(0);
  int64_t pending_steps_ = 0;
  std::vector<EpochStats<T>> history_;
};

// standard REIN loss closure: ELBO normalized per episode and step
template <class T>
BatchLossFn<T> rein_loss(Rein<T>& model) {
  return [&model](Tape<T>& t, const BatchView<T>& view, T klw, T tau,
                  NoiseSource<T>& noise) -> Value<T> {
    auto res = model.elbo(t, view.frames, klw, tau, noise, view.episode_ids);
    const T denom = static_cast<T>(view.episode_ids.size()) *
                    static_cast<T>(view.frames.size() - 1);
    return scale(res.total, T(1) / denom);
  };
}

}  // namespace rein::model
