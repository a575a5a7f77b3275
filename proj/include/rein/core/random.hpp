#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

#include "rein/core/tensor.hpp"

namespace rein {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Seeded random stream. Streams are addressed by (seed, id...) so every
// consumer owns an independent, reproducible source; distribution sampling
// is implemented here (not via std distributions) to keep the draw sequence
// a pure function of the engine state, which makes checkpoint/resume exact.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed = 0) : eng_(detail::splitmix64(seed)) {}

  static RandomStream derive(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t s = detail::splitmix64(seed);
    for (uint64_t id : ids) s = detail::splitmix64(s ^ (id + 0x632be59bd9b4e019ULL));
    RandomStream r;
    r.eng_.seed(s);
    return r;
  }

  uint64_t next_u64() { return eng_(); }

  // uniform in [2^-53, 1); never returns 0 so log(u) is safe
  double uniform() {
    uint64_t bits = eng_() >> 11;
    double u = static_cast<double>(bits) * 0x1p-53;
    return u > 0.0 ? u : 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without the cached second value: stateless per call
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gumbel() { return -std::log(-std::log(uniform())); }

  // unbiased integer in [0, n) by rejection
  uint64_t uniform_int(uint64_t n) {
    check<InvalidArgument>(n > 0, "uniform_int: n must be positive");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  Tensor<T> normal_tensor(int64_t r, int64_t c, double scale = 1.0) {
    Tensor<T> t(r, c);
    for (T& x : t.v) x = static_cast<T>(scale * normal());
    return t;
  }

  template <class T>
  Tensor<T> uniform_tensor(int64_t r, int64_t c, double lo, double hi) {
    Tensor<T> t(r, c);
    for (T& x : t.v) x = static_cast<T>(uniform(lo, hi));
    return t;
  }

  template <class T>
  Tensor<T> gumbel_tensor(int64_t r, int64_t c) {
    Tensor<T> t(r, c);
    for (T& x : t.v) x = static_cast<T>(gumbel());
    return t;
  }

  std::string state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    check<InvalidArgument>(!is.fail(), "RandomStream: malformed engine state string");
  }

  bool operator==(const RandomStream& o) const { return eng_ == o.eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rein
