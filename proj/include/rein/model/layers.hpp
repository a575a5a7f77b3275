#pragma once

#include <deque>
#include <string>
#include <unordered_map>

#include "rein/core/random.hpp"
#include "rein/core/tape.hpp"

namespace rein::model {

// Parameter groups named after the roles they play in training: posterior +
// edge inference (phi), decoder (theta), dynamics + learned prior (psi), and
// an auxiliary group (beta) that stays empty for now.
enum class Group { phi, theta, psi, beta };

inline const char* to_string(Group g) {
  switch (g) {
    case Group::phi: return "phi";
    case Group::theta: return "theta";
    case Group::psi: return "psi";
    case Group::beta: return "beta";
  }
  return "?";
}

// Owns every trainable tensor of a model. Deque keeps addresses stable so
// layers can hold raw pointers; declaration order is the serialization order.
template <class T>
class ParamRegistry {
 public:
  Parameter<T>* add(Group g, const std::string& name, Tensor<T> init) {
    check<InvalidArgument>(!index_.count(name), "duplicate parameter name ", name);
    store_.emplace_back(name, std::move(init));
    Parameter<T>* p = &store_.back();
    index_.emplace(name, p);
    order_.push_back({g, p});
    return p;
  }

  std::vector<Parameter<T>*> all() const {
    std::vector<Parameter<T>*> out;
    out.reserve(order_.size());
    for (const auto& [g, p] : order_) out.push_back(p);
    return out;
  }

  std::vector<Parameter<T>*> group(Group g) const {
    std::vector<Parameter<T>*> out;
    for (const auto& [gg, p] : order_)
      if (gg == g) out.push_back(p);
    return out;
  }

  Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  const std::vector<std::pair<Group, Parameter<T>*>>& entries() const { return order_; }

  int64_t total_size() const {
    int64_t s = 0;
    for (const auto& [g, p] : order_) s += p->value.numel();
    return s;
  }

 private:
  std::deque<Parameter<T>> store_;
  std::vector<std::pair<Group, Parameter<T>*>> order_;
  std::unordered_map<std::string, Parameter<T>*> index_;
};

template <class T>
Tensor<T> glorot(int64_t in, int64_t out, RandomStream& rng) {
  const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
  return rng.template uniform_tensor<T>(in, out, -lim, lim);
}

template <class T>
struct Linear {
  Parameter<T>* W = nullptr;
  Parameter<T>* b = nullptr;

  static Linear create(ParamRegistry<T>& reg, Group g, const std::string& name, int64_t in,
                       int64_t out, RandomStream& rng, bool zero_init = false) {
    Linear l;
    l.W = reg.add(g, name + ".W", zero_init ? Tensor<T>(in, out) : glorot<T>(in, out, rng));
    l.b = reg.add(g, name + ".b", Tensor<T>(1, out));
    return l;
  }

  Value<T> operator()(Tape<T>& t, Value<T> x) const {
    return add_rowvec(matmul(x, t.param(*W)), t.param(*b));
  }

  int64_t in_dim() const { return W->value.rows; }
  int64_t out_dim() const { return W->value.cols; }
};

// Two affine maps with a tanh between; smooth everywhere, which keeps
// finite-difference gradient checks tight.
template <class T>
struct Mlp {
  Linear<T> l1, l2;

  static Mlp create(ParamRegistry<T>& reg, Group g, const std::string& name, int64_t in,
                    int64_t hidden, int64_t out, RandomStream& rng, bool zero_last = false) {
    Mlp m;
    m.l1 = Linear<T>::create(reg, g, name + ".l1", in, hidden, rng);
    m.l2 = Linear<T>::create(reg, g, name + ".l2", hidden, out, rng, zero_last);
    return m;
  }

  Value<T> operator()(Tape<T>& t, Value<T> x) const { return l2(t, rein::tanh(l1(t, x))); }
};

template <class T>
struct GruCell {
  Linear<T> xz, hz, xr, hr, xh, hh;

  static GruCell create(ParamRegistry<T>& reg, Group g, const std::string& name, int64_t in,
                        int64_t hidden, RandomStream& rng) {
    GruCell c;
    c.xz = Linear<T>::create(reg, g, name + ".xz", in, hidden, rng);
    c.hz = Linear<T>::create(reg, g, name + ".hz", hidden, hidden, rng);
    c.xr = Linear<T>::create(reg, g, name + ".xr", in, hidden, rng);
    c.hr = Linear<T>::create(reg, g, name + ".hr", hidden, hidden, rng);
    c.xh = Linear<T>::create(reg, g, name + ".xh", in, hidden, rng);
    c.hh = Linear<T>::create(reg, g, name + ".hh", hidden, hidden, rng);
    return c;
  }

  int64_t hidden_dim() const { return xz.out_dim(); }

  Value<T> step(Tape<T>& t, Value<T> x, Value<T> h) const {
    Value<T> z = sigmoid(add(xz(t, x), hz(t, h)));
    Value<T> r = sigmoid(add(xr(t, x), hr(t, h)));
    Value<T> cand = rein::tanh(add(xh(t, x), hh(t, mul(r, h))));
    Value<T> one_minus_z = add_scalar(scale(z, T(-1)), T(1));
    return add(mul(one_minus_z, h), mul(z, cand));
  }
};

// softmax over variable-size row groups: rows with the same segment id form
// one distribution. A global max shift keeps exp() in range without needing
// a per-segment max.
template <class T>
Value<T> segment_softmax(Tape<T>& t, Value<T> scores, RowIndex seg, int64_t n_segments) {
  check<ShapeError>(scores.cols() == 1, "segment_softmax: scores must be a column, got ",
                    scores.val().shape_str());
  T mx = scores.val().v[0];
  for (const T& s : scores.val().v) mx = std::max(mx, s);
  Value<T> e = rein::exp(add_scalar(scores, -mx));
  Value<T> denom = scatter_add_rows(e, seg, n_segments);
  return div(e, gather_rows(denom, seg));
}

// column vector w (rows x 1) times ones(1, cols): broadcasts a per-row weight
// across all columns so it can gate a feature matrix.
template <class T>
Value<T> colvec_gate(Tape<T>& t, Value<T> w, Value<T> features) {
  check<ShapeError>(w.cols() == 1 && w.rows() == features.rows(),
                    "colvec_gate: weight must be rows x 1 matching features");
  Value<T> ones = t.constant(Tensor<T>::full(1, features.cols(), T(1)));
  return mul(matmul(w, ones), features);
}

template <class T>
struct LstmCell {
  Linear<T> xi, hi, xf, hf, xo, ho, xg, hg;

  static LstmCell create(ParamRegistry<T>& reg, Group g, const std::string& name, int64_t in,
                         int64_t hidden, RandomStream& rng) {
    LstmCell c;
    c.xi = Linear<T>::create(reg, g, name + ".xi", in, hidden, rng);
    c.hi = Linear<T>::create(reg, g, name + ".hi", hidden, hidden, rng);
    c.xf = Linear<T>::create(reg, g, name + ".xf", in, hidden, rng);
    c.hf = Linear<T>::create(reg, g, name + ".hf", hidden, hidden, rng);
    c.xo = Linear<T>::create(reg, g, name + ".xo", in, hidden, rng);
    c.ho = Linear<T>::create(reg, g, name + ".ho", hidden, hidden, rng);
    c.xg = Linear<T>::create(reg, g, name + ".xg", in, hidden, rng);
    c.hg = Linear<T>::create(reg, g, name + ".hg", hidden, hidden, rng);
    return c;
  }

  struct State {
    Value<T> h, c;
  };

  State step(Tape<T>& t, Value<T> x, State s) const {
    Value<T> i = sigmoid(add(xi(t, x), hi(t, s.h)));
    Value<T> f = sigmoid(add(xf(t, x), hf(t, s.h)));
    Value<T> o = sigmoid(add(xo(t, x), ho(t, s.h)));
    Value<T> g = rein::tanh(add(xg(t, x), hg(t, s.h)));
    Value<T> c_new = add(mul(f, s.c), mul(i, g));
    return {mul(o, rein::tanh(c_new)), c_new};
  }
};

// fixed power-of-two scaling of raw observations; exactly invertible in
// floating point (positions span roughly +-5, velocities are narrower)
template <class T>
T obs_unit_scale(int64_t obs_dim, int64_t coord) {
  if (obs_dim == 4) return coord < 2 ? T(0.25) : T(0.5);
  return T(1);
}

template <class T>
Tensor<T> normalize_obs(const Tensor<T>& raw, int64_t obs_dim) {
  Tensor<T> out = raw;
  for (int64_t i = 0; i < out.rows; ++i)
    for (int64_t j = 0; j < out.cols; ++j) out.at(i, j) *= obs_unit_scale<T>(obs_dim, j % obs_dim);
  return out;
}

template <class T>
Tensor<T> denormalize_obs(const Tensor<T>& norm, int64_t obs_dim) {
  Tensor<T> out = norm;
  for (int64_t i = 0; i < out.rows; ++i)
    for (int64_t j = 0; j < out.cols; ++j) out.at(i, j) /= obs_unit_scale<T>(obs_dim, j % obs_dim);
  return out;
}

}  // namespace rein::model
