#pragma once

#include <deque>

#include "rein/core/random.hpp"
#include "rein/core/tape.hpp"

namespace rein {

// Indirection over random draws so a forward pass can be replayed with the
// exact same noise (finite-difference checks need a deterministic loss).
template <class T>
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Tensor<T> normal(int64_t rows, int64_t cols) = 0;
  virtual Tensor<T> gumbel(int64_t rows, int64_t cols) = 0;
};

template <class T>
class RngNoise final : public NoiseSource<T> {
 public:
  explicit RngNoise(RandomStream rng) : rng_(rng) {}
  Tensor<T> normal(int64_t r, int64_t c) override { return rng_.template normal_tensor<T>(r, c); }
  Tensor<T> gumbel(int64_t r, int64_t c) override { return rng_.template gumbel_tensor<T>(r, c); }
  RandomStream& stream() { return rng_; }

 private:
  RandomStream rng_;
};

template <class T>
class RecordingNoise final : public NoiseSource<T> {
 public:
  struct Draw {
    char kind;
    Tensor<T> t;
  };

  explicit RecordingNoise(NoiseSource<T>& inner) : inner_(&inner) {}

  Tensor<T> normal(int64_t r, int64_t c) override {
    Tensor<T> t = inner_->normal(r, c);
    draws.push_back({'n', t});
    return t;
  }
  Tensor<T> gumbel(int64_t r, int64_t c) override {
    Tensor<T> t = inner_->gumbel(r, c);
    draws.push_back({'g', t});
    return t;
  }

  std::vector<Draw> draws;

 private:
  NoiseSource<T>* inner_;
};

template <class T>
class ReplayNoise final : public NoiseSource<T> {
 public:
  explicit ReplayNoise(const std::vector<typename RecordingNoise<T>::Draw>& draws)
      : draws_(&draws) {}

  Tensor<T> normal(int64_t r, int64_t c) override { return next('n', r, c); }
  Tensor<T> gumbel(int64_t r, int64_t c) override { return next('g', r, c); }

  void rewind() { pos_ = 0; }
  bool exhausted() const { return pos_ == draws_->size(); }

 private:
  Tensor<T> next(char kind, int64_t r, int64_t c) {
    check<InvalidArgument>(pos_ < draws_->size(), "replay noise: ran out of recorded draws");
    const auto& d = (*draws_)[pos_++];
    check<InvalidArgument>(d.kind == kind && d.t.rows == r && d.t.cols == c,
                           "replay noise: draw ", pos_ - 1, " mismatch");
    return d.t;
  }

  const std::vector<typename RecordingNoise<T>::Draw>* draws_;
  size_t pos_ = 0;
};

// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I)
template <class T>
Value<T> gaussian_reparameterize(Value<T> mu, Value<T> logvar, NoiseSource<T>& noise) {
  detail::check_same_shape("gaussian_reparameterize", mu, logvar);
  Value<T> eps = mu.tape->constant(noise.normal(mu.rows(), mu.cols()));
  Value<T> std = exp(scale(logvar, T(0.5)));
  return add(mu, mul(std, eps));
}

// KL(N(mu_q, var_q) || N(mu_p, var_p)) with diagonal covariance, summed over
// every element of the batch.
template <class T>
Value<T> kl_diag_gaussian(Value<T> mu_q, Value<T> logvar_q, Value<T> mu_p, Value<T> logvar_p) {
  detail::check_same_shape("kl_diag_gaussian", mu_q, logvar_q);
  detail::check_same_shape("kl_diag_gaussian", mu_q, mu_p);
  detail::check_same_shape("kl_diag_gaussian", mu_p, logvar_p);
  Value<T> diff = sub(mu_q, mu_p);
  Value<T> inv_var_p = exp(scale(logvar_p, T(-1)));
  Value<T> ratio = exp(sub(logvar_q, logvar_p));
  Value<T> maha = mul(square(diff), inv_var_p);
  Value<T> elem = add_scalar(add(sub(logvar_p, logvar_q), add(ratio, maha)), T(-1));
  return scale(sum_all(elem), T(0.5));
}

// Rows of logits become near-one-hot samples. Soft mode returns the tempered
// softmax directly; hard mode snaps to the argmax one-hot in the forward pass
// while gradients follow the soft sample (straight-through).
template <class T>
Value<T> gumbel_softmax_sample(Value<T> logits, T tau, bool hard, NoiseSource<T>& noise) {
  check<InvalidArgument>(tau > T(0), "gumbel_softmax_sample: tau must be positive, got ", tau);
  Value<T> g = logits.tape->constant(noise.gumbel(logits.rows(), logits.cols()));
  Value<T> y = softmax_rows(scale(add(logits, g), T(1) / tau));
  if (!hard) return y;
  const Tensor<T>& yv = y.val();
  Tensor<T> bridge(yv.rows, yv.cols);
  for (int64_t i = 0; i < yv.rows; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < yv.cols; ++j)
      if (yv.at(i, j) > yv.at(i, best)) best = j;
    for (int64_t j = 0; j < yv.cols; ++j)
      bridge.at(i, j) = (j == best ? T(1) : T(0)) - yv.at(i, j);
  }
  return add(y, y.tape->constant(std::move(bridge)));
}

// argmax one-hot per row, off the tape
template <class T>
Tensor<T> argmax_one_hot(const Tensor<T>& x) {
  Tensor<T> out(x.rows, x.cols);
  for (int64_t i = 0; i < x.rows; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < x.cols; ++j)
      if (x.at(i, j) > x.at(i, best)) best = j;
    out.at(i, best) = T(1);
  }
  return out;
}

}  // namespace rein
