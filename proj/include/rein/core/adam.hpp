#pragma once

#include <cmath>
#include <vector>

#include "rein/core/tape.hpp"

namespace rein {

template <class T>
T global_grad_norm(const std::vector<Parameter<T>*>& params) {
  double sq = 0.0;
  for (const auto* p : params)
    for (const T& g : p->grad.v) sq += static_cast<double>(g) * static_cast<double>(g);
  return static_cast<T>(std::sqrt(sq));
}

// Scales all gradients by max_norm / ||g|| when the global norm exceeds
// max_norm. Returns the pre-clip norm.
template <class T>
T clip_global_norm(const std::vector<Parameter<T>*>& params, T max_norm) {
  check<InvalidArgument>(max_norm > T(0), "clip_global_norm: max_norm must be positive");
  const T norm = global_grad_norm(params);
  if (norm > max_norm) {
    const T s = max_norm / norm;
    for (auto* p : params)
      for (T& g : p->grad.v) g *= s;
  }
  return norm;
}

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers align with the parameter list
// passed to init(); the list order must stay stable across steps.
template <class T>
class Adam {
 public:
  AdamConfig cfg;
  int64_t t = 0;
  std::vector<Tensor<T>> m, v;

  Adam() = default;
  explicit Adam(AdamConfig c) : cfg(c) {}

  void init(const std::vector<Parameter<T>*>& params) {
    m.clear();
    v.clear();
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto* p : params) {
      m.emplace_back(p->value.rows, p->value.cols);
      v.emplace_back(p->value.rows, p->value.cols);
    }
    t = 0;
  }

  void step(const std::vector<Parameter<T>*>& params) {
    check<InvalidArgument>(params.size() == m.size(),
                           "adam step: parameter list changed size, expected ", m.size(),
                           " got ", params.size());
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = *params[k];
      check<ShapeError>(p.value.same_shape(m[k]), "adam step: parameter ", p.name,
                        " changed shape");
      for (size_t i = 0; i < p.value.v.size(); ++i) {
        const double g = static_cast<double>(p.grad.v[i]);
        double mi = cfg.beta1 * static_cast<double>(m[k].v[i]) + (1.0 - cfg.beta1) * g;
        double vi = cfg.beta2 * static_cast<double>(v[k].v[i]) + (1.0 - cfg.beta2) * g * g;
        m[k].v[i] = static_cast<T>(mi);
        v[k].v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p.value.v[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
      }
    }
  }
};

template <class T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace rein
