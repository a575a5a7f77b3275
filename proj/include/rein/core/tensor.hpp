#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rein/core/error.hpp"

namespace rein {

// Dense row-major matrix. Everything in the library is rank 2; scalars are
// 1x1 and row vectors 1xN.
template <class T>
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int64_t r, int64_t c) : rows(r), cols(c), v(checked_size(r, c), T(0)) {}
  Tensor(int64_t r, int64_t c, std::vector<T> data) : rows(r), cols(c), v(std::move(data)) {
    check<ShapeError>(static_cast<int64_t>(v.size()) == r * c,
                      "tensor data length ", v.size(), " does not match shape ", r, "x", c);
  }

  static size_t checked_size(int64_t r, int64_t c) {
    check<InvalidArgument>(r >= 0 && c >= 0, "tensor shape must be non-negative, got ", r, "x",
                           c);
    return static_cast<size_t>(r * c);
  }

  static Tensor full(int64_t r, int64_t c, T value) {
    Tensor t(r, c);
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }
  static Tensor scalar(T value) { return full(1, 1, value); }

  int64_t numel() const { return rows * cols; }
  bool empty() const { return numel() == 0; }

  T& at(int64_t i, int64_t j) { return v[static_cast<size_t>(i * cols + j)]; }
  const T& at(int64_t i, int64_t j) const { return v[static_cast<size_t>(i * cols + j)]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const { return strcat_msg(rows, "x", cols); }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  T item() const {
    check<InvalidArgument>(numel() == 1, "item() requires a scalar tensor, got ", shape_str());
    return v[0];
  }

  Tensor reshaped(int64_t r, int64_t c) const {
    check<ShapeError>(r * c == numel(), "cannot reshape ", shape_str(), " to ", r, "x", c);
    Tensor out = *this;
    out.rows = r;
    out.cols = c;
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

template <class T>
Tensor<T> transposed(const Tensor<T>& a) {
  Tensor<T> out(a.cols, a.rows);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace kernel {

// C += A * B, row-major, ikj order. The j-inner loop keeps per-element
// accumulation order identical to the scalar reference, so results are
// reproducible run to run.
template <class T>
void gemm_acc(Tensor<T>& c, const Tensor<T>& a, const Tensor<T>& b) {
  const int64_t m = a.rows, k = a.cols, n = b.cols;
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (int64_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    const T* arow = pa + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = pb + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check<ShapeError>(a.cols == b.rows, "matmul: inner dimensions disagree, ", a.shape_str(), " vs ",
                    b.shape_str());
  Tensor<T> c(a.rows, b.cols);
  gemm_acc(c, a, b);
  return c;
}

}  // namespace kernel

}  // namespace rein
