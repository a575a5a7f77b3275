#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rein/core/tensor.hpp"

namespace rein {

// Named trainable tensor with a persistent gradient accumulator.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> init)
      : name(std::move(n)), value(std::move(init)), grad(value.rows, value.cols) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), T(0)); }
};

template <class T>
class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
template <class T>
struct Value {
  Tape<T>* tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& val() const;
  int64_t rows() const { return val().rows; }
  int64_t cols() const { return val().cols; }
};

// Record of executed operations in execution order; reverse sweep visits
// nodes back to front, so topological order is creation order by
// construction. One backward pass per tape.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int32_t)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    bool grad_live = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Value<T> constant(Tensor<T> v) { return emit(std::move(v), false, nullptr); }

  Value<T> leaf(Tensor<T> v, bool requires_grad) {
    return emit(std::move(v), requires_grad && grad_enabled_, nullptr);
  }

  // Parameters are cached per tape so that a module used repeatedly in one
  // forward (e.g. a GRU unrolled over time) shares a single leaf node.
  Value<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Value<T>{this, it->second};
    Value<T> v = emit(p.value, grad_enabled_, nullptr);
    node(v.id).param = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  Value<T> emit(Tensor<T> v, bool requires_grad, BackwardFn fn) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Value<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  Node& node(int32_t id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }
  size_t size() const { return nodes_.size(); }

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  bool needs_grad(int32_t id) const { return node(id).requires_grad; }

  // Gradient buffer of a node, allocated (zeroed) on first touch.
  Tensor<T>& grad_buf(int32_t id) {
    Node& n = node(id);
    if (!n.grad_live) {
      n.grad = Tensor<T>(n.value.rows, n.value.cols);
      n.grad_live = true;
    }
    return n.grad;
  }

  bool grad_live(int32_t id) const { return node(id).grad_live; }

  // Reverse sweep from a scalar loss. Accumulates into Parameter::grad for
  // every parameter leaf that influenced the loss.
  void backward(Value<T> loss) {
    check<InvalidArgument>(loss.valid() && loss.tape == this, "backward: loss not on this tape");
    check<InvalidArgument>(node(loss.id).value.numel() == 1,
                           "backward: loss must be a scalar tensor, got ",
                           node(loss.id).value.shape_str());
    check<InvalidArgument>(!consumed_, "backward: tape already consumed");
    check<InvalidArgument>(node(loss.id).requires_grad,
                           "backward: loss does not depend on any tracked parameter");
    consumed_ = true;
    grad_buf(loss.id).v[0] = T(1);
    for (int32_t id = loss.id; id >= 0; --id) {
      Node& n = node(id);
      if (!n.requires_grad || !n.grad_live) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param != nullptr) {
        Tensor<T>& pg = n.param->grad;
        for (size_t i = 0; i < pg.v.size(); ++i) pg.v[i] += n.grad.v[i];
      }
    }
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<Parameter<T>*, int32_t> param_nodes_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

template <class T>
const Tensor<T>& Value<T>::val() const {
  return tape->node(id).value;
}

namespace detail {

template <class T>
void check_same_shape(const char* op, const Value<T>& a, const Value<T>& b) {
  check<ShapeError>(a.val().same_shape(b.val()), op, ": shape mismatch ", a.val().shape_str(),
                    " vs ", b.val().shape_str());
}

template <class T>
bool any_requires(std::initializer_list<Value<T>> vs) {
  for (const auto& v : vs)
    if (v.tape->needs_grad(v.id)) return true;
  return false;
}

template <class T>
void acc(Tensor<T>& dst, const Tensor<T>& src) {
  for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace detail

// ---- elementwise binary ----

template <class T>
Value<T> add(Value<T> a, Value<T> b) {
  detail::check_same_shape("add", a, b);
  Tensor<T> out = a.val();
  detail::acc(out, b.val());
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) detail::acc(t.grad_buf(a.id), g);
    if (t.needs_grad(b.id)) detail::acc(t.grad_buf(b.id), g);
  });
}

template <class T>
Value<T> sub(Value<T> a, Value<T> b) {
  detail::check_same_shape("sub", a, b);
  Tensor<T> out = a.val();
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.val().v[i];
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) detail::acc(t.grad_buf(a.id), g);
    if (t.needs_grad(b.id)) {
      Tensor<T>& gb = t.grad_buf(b.id);
      for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= g.v[i];
    }
  });
}

template <class T>
Value<T> mul(Value<T> a, Value<T> b) {
  detail::check_same_shape("mul", a, b);
  Tensor<T> out = a.val();
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.val().v[i];
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) {
      Tensor<T>& ga = t.grad_buf(a.id);
      const Tensor<T>& bv = t.node(b.id).value;
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] * bv.v[i];
    }
    if (t.needs_grad(b.id)) {
      Tensor<T>& gb = t.grad_buf(b.id);
      const Tensor<T>& av = t.node(a.id).value;
      for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += g.v[i] * av.v[i];
    }
  });
}

template <class T>
Value<T> div(Value<T> a, Value<T> b) {
  detail::check_same_shape("div", a, b);
  Tensor<T> out = a.val();
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= b.val().v[i];
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& av = t.node(a.id).value;
    const Tensor<T>& bv = t.node(b.id).value;
    if (t.needs_grad(a.id)) {
      Tensor<T>& ga = t.grad_buf(a.id);
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] / bv.v[i];
    }
    if (t.needs_grad(b.id)) {
      Tensor<T>& gb = t.grad_buf(b.id);
      for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= g.v[i] * av.v[i] / (bv.v[i] * bv.v[i]);
    }
  });
}

// ---- scalar and broadcast ----

template <class T>
Value<T> scale(Value<T> a, T c) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x *= c;
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a, c](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) {
      Tensor<T>& ga = t.grad_buf(a.id);
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += c * g.v[i];
    }
  });
}

template <class T>
Value<T> add_scalar(Value<T> a, T c) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x += c;
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (t.needs_grad(a.id)) detail::acc(t.grad_buf(a.id), t.node(self).grad);
  });
}

// m x n plus a 1 x n row vector broadcast down the rows
template <class T>
Value<T> add_rowvec(Value<T> a, Value<T> b) {
  check<ShapeError>(b.val().rows == 1 && b.val().cols == a.val().cols,
                    "add_rowvec: expected 1x", a.val().cols, " bias, got ", b.val().shape_str());
  Tensor<T> out = a.val();
  const int64_t m = out.rows, n = out.cols;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) += b.val().v[static_cast<size_t>(j)];
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) detail::acc(t.grad_buf(a.id), g);
    if (t.needs_grad(b.id)) {
      Tensor<T>& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < g.rows; ++i)
        for (int64_t j = 0; j < g.cols; ++j) gb.v[static_cast<size_t>(j)] += g.at(i, j);
    }
  });
}

// 1 x n row vector repeated to m rows
template <class T>
Value<T> broadcast_rows(Value<T> a, int64_t m) {
  check<ShapeError>(a.val().rows == 1, "broadcast_rows: expected a single row, got ",
                    a.val().shape_str());
  const int64_t n = a.val().cols;
  Tensor<T> out(m, n);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = a.val().v[static_cast<size_t>(j)];
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.rows; ++i)
      for (int64_t j = 0; j < g.cols; ++j) ga.v[static_cast<size_t>(j)] += g.at(i, j);
  });
}

// ---- linear algebra ----

template <class T>
Value<T> matmul(Value<T> a, Value<T> b) {
  check<ShapeError>(a.val().cols == b.val().rows, "matmul: inner dimensions disagree, ",
                    a.val().shape_str(), " vs ", b.val().shape_str());
  Tensor<T> out = kernel::matmul(a.val(), b.val());
  bool rg = detail::any_requires({a, b});
  return a.tape->emit(std::move(out), rg, [a, b](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    if (t.needs_grad(a.id)) {
      Tensor<T> bt = transposed(t.node(b.id).value);
      kernel::gemm_acc(t.grad_buf(a.id), g, bt);
    }
    if (t.needs_grad(b.id)) {
      Tensor<T> at = transposed(t.node(a.id).value);
      kernel::gemm_acc(t.grad_buf(b.id), at, g);
    }
  });
}

template <class T>
Value<T> transpose(Value<T> a) {
  return a.tape->emit(transposed(a.val()), a.tape->needs_grad(a.id),
                      [a](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        Tensor<T> gt = transposed(t.node(self).grad);
                        detail::acc(t.grad_buf(a.id), gt);
                      });
}

// ---- elementwise unary ----

template <class T>
Value<T> exp(Value<T> a) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x = std::exp(x);
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& y = t.node(self).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] * y.v[i];
  });
}

template <class T>
Value<T> log(Value<T> a) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x = std::log(x);
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& av = t.node(a.id).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] / av.v[i];
  });
}

template <class T>
Value<T> tanh(Value<T> a) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x = std::tanh(x);
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& y = t.node(self).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] * (T(1) - y.v[i] * y.v[i]);
  });
}

template <class T>
Value<T> sigmoid(Value<T> a) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x = T(1) / (T(1) + std::exp(-x));
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& y = t.node(self).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] * y.v[i] * (T(1) - y.v[i]);
  });
}

template <class T>
Value<T> relu(Value<T> a) {
  Tensor<T> out = a.val();
  for (T& x : out.v) x = x > T(0) ? x : T(0);
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& av = t.node(a.id).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += av.v[i] > T(0) ? g.v[i] : T(0);
  });
}

// ---- softmax ----

template <class T>
Value<T> softmax_rows(Value<T> a) {
  Tensor<T> out = a.val();
  const int64_t m = out.rows, n = out.cols;
  for (int64_t i = 0; i < m; ++i) {
    T mx = out.at(i, 0);
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
    T s = T(0);
    for (int64_t j = 0; j < n; ++j) {
      T e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      s += e;
    }
    for (int64_t j = 0; j < n; ++j) out.at(i, j) /= s;
  }
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    const Tensor<T>& y = t.node(self).value;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.rows; ++i) {
      T dot = T(0);
      for (int64_t j = 0; j < g.cols; ++j) dot += g.at(i, j) * y.at(i, j);
      for (int64_t j = 0; j < g.cols; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

// axis 1: softmax across each row; axis 0: across each column
template <class T>
Value<T> softmax(Value<T> a, int axis) {
  check<InvalidArgument>(axis == 0 || axis == 1, "softmax: axis must be 0 or 1, got ", axis);
  if (axis == 1) return softmax_rows(a);
  return transpose(softmax_rows(transpose(a)));
}

// ---- concat / slice ----

template <class T>
Value<T> concat_cols(const std::vector<Value<T>>& parts) {
  check<InvalidArgument>(!parts.empty(), "concat_cols: no inputs");
  if (parts.size() == 1) return parts[0];
  const int64_t m = parts[0].val().rows;
  int64_t n = 0;
  for (const auto& p : parts) {
    check<ShapeError>(p.val().rows == m, "concat_cols: row mismatch ", p.val().shape_str(),
                      " vs ", m, " rows");
    n += p.val().cols;
  }
  Tensor<T> out(m, n);
  int64_t off = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.val();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < pv.cols; ++j) out.at(i, off + j) = pv.at(i, j);
    off += pv.cols;
    rg = rg || p.tape->needs_grad(p.id);
  }
  auto parts_copy = parts;
  return parts[0].tape->emit(std::move(out), rg, [parts_copy](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    int64_t off = 0;
    for (const auto& p : parts_copy) {
      const int64_t pc = t.node(p.id).value.cols;
      if (t.needs_grad(p.id)) {
        Tensor<T>& gp = t.grad_buf(p.id);
        for (int64_t i = 0; i < g.rows; ++i)
          for (int64_t j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, off + j);
      }
      off += pc;
    }
  });
}

template <class T>
Value<T> concat_rows(const std::vector<Value<T>>& parts) {
  check<InvalidArgument>(!parts.empty(), "concat_rows: no inputs");
  if (parts.size() == 1) return parts[0];
  const int64_t n = parts[0].val().cols;
  int64_t m = 0;
  for (const auto& p : parts) {
    check<ShapeError>(p.val().cols == n, "concat_rows: column mismatch ", p.val().shape_str(),
                      " vs ", n, " cols");
    m += p.val().rows;
  }
  Tensor<T> out(m, n);
  int64_t off = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.val();
    std::copy(pv.v.begin(), pv.v.end(), out.v.begin() + off * n);
    off += pv.rows;
    rg = rg || p.tape->needs_grad(p.id);
  }
  auto parts_copy = parts;
  return parts[0].tape->emit(std::move(out), rg, [parts_copy](Tape<T>& t, int32_t self) {
    const Tensor<T>& g = t.node(self).grad;
    int64_t off = 0;
    for (const auto& p : parts_copy) {
      const int64_t pr = t.node(p.id).value.rows;
      if (t.needs_grad(p.id)) {
        Tensor<T>& gp = t.grad_buf(p.id);
        for (int64_t i = 0; i < pr; ++i)
          for (int64_t j = 0; j < g.cols; ++j) gp.at(i, j) += g.at(off + i, j);
      }
      off += pr;
    }
  });
}

template <class T>
Value<T> concat(const std::vector<Value<T>>& parts, int axis) {
  check<InvalidArgument>(axis == 0 || axis == 1, "concat: axis must be 0 or 1, got ", axis);
  return axis == 0 ? concat_rows(parts) : concat_cols(parts);
}

template <class T>
Value<T> slice_cols(Value<T> a, int64_t c0, int64_t c1) {
  check<InvalidArgument>(0 <= c0 && c0 < c1 && c1 <= a.val().cols, "slice_cols: bad range [", c0,
                         ", ", c1, ") for ", a.val().shape_str());
  const int64_t m = a.val().rows, w = c1 - c0;
  Tensor<T> out(m, w);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < w; ++j) out.at(i, j) = a.val().at(i, c0 + j);
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id),
                      [a, c0, w](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        const Tensor<T>& g = t.node(self).grad;
                        Tensor<T>& ga = t.grad_buf(a.id);
                        for (int64_t i = 0; i < g.rows; ++i)
                          for (int64_t j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
                      });
}

template <class T>
Value<T> slice_rows(Value<T> a, int64_t r0, int64_t r1) {
  check<InvalidArgument>(0 <= r0 && r0 < r1 && r1 <= a.val().rows, "slice_rows: bad range [", r0,
                         ", ", r1, ") for ", a.val().shape_str());
  const int64_t n = a.val().cols, h = r1 - r0;
  Tensor<T> out(h, n);
  std::copy(a.val().v.begin() + r0 * n, a.val().v.begin() + r1 * n, out.v.begin());
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id),
                      [a, r0, h](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        const Tensor<T>& g = t.node(self).grad;
                        Tensor<T>& ga = t.grad_buf(a.id);
                        for (int64_t i = 0; i < h; ++i)
                          for (int64_t j = 0; j < g.cols; ++j) ga.at(r0 + i, j) += g.at(i, j);
                      });
}

// ---- reductions ----

template <class T>
Value<T> sum_all(Value<T> a) {
  T s = T(0);
  for (const T& x : a.val().v) s += x;
  return a.tape->emit(Tensor<T>::scalar(s), a.tape->needs_grad(a.id),
                      [a](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        const T g = t.node(self).grad.v[0];
                        Tensor<T>& ga = t.grad_buf(a.id);
                        for (T& x : ga.v) x += g;
                      });
}

template <class T>
Value<T> mean_all(Value<T> a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.val().numel()));
}

// axis 0 collapses rows (result 1 x n), axis 1 collapses cols (result m x 1)
template <class T>
Value<T> sum_axis(Value<T> a, int axis) {
  check<InvalidArgument>(axis == 0 || axis == 1, "sum_axis: axis must be 0 or 1, got ", axis);
  const int64_t m = a.val().rows, n = a.val().cols;
  if (axis == 0) {
    Tensor<T> out(1, n);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.v[static_cast<size_t>(j)] += a.val().at(i, j);
    return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
      if (!t.needs_grad(a.id)) return;
      const Tensor<T>& g = t.node(self).grad;
      Tensor<T>& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < ga.rows; ++i)
        for (int64_t j = 0; j < ga.cols; ++j) ga.at(i, j) += g.v[static_cast<size_t>(j)];
    });
  }
  Tensor<T> out(m, 1);
  for (int64_t i = 0; i < m; ++i) {
    T s = T(0);
    for (int64_t j = 0; j < n; ++j) s += a.val().at(i, j);
    out.v[static_cast<size_t>(i)] = s;
  }
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id), [a](Tape<T>& t, int32_t self) {
    if (!t.needs_grad(a.id)) return;
    const Tensor<T>& g = t.node(self).grad;
    Tensor<T>& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < ga.rows; ++i)
      for (int64_t j = 0; j < ga.cols; ++j) ga.at(i, j) += g.v[static_cast<size_t>(i)];
  });
}

template <class T>
Value<T> mean_axis(Value<T> a, int axis) {
  const T denom = static_cast<T>(axis == 0 ? a.val().rows : a.val().cols);
  return scale(sum_axis(a, axis), T(1) / denom);
}

// ---- gather / scatter ----

using RowIndex = std::shared_ptr<const std::vector<int32_t>>;

inline RowIndex make_row_index(std::vector<int32_t> idx) {
  return std::make_shared<const std::vector<int32_t>>(std::move(idx));
}

template <class T>
Value<T> gather_rows(Value<T> a, RowIndex idx) {
  const int64_t n = a.val().cols;
  Tensor<T> out(static_cast<int64_t>(idx->size()), n);
  for (size_t i = 0; i < idx->size(); ++i) {
    const int32_t src = (*idx)[i];
    check<InvalidArgument>(src >= 0 && src < a.val().rows, "gather_rows: index ", src,
                           " out of range for ", a.val().shape_str());
    std::copy(a.val().v.begin() + src * n, a.val().v.begin() + (src + 1) * n,
              out.v.begin() + static_cast<int64_t>(i) * n);
  }
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id),
                      [a, idx](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        const Tensor<T>& g = t.node(self).grad;
                        Tensor<T>& ga = t.grad_buf(a.id);
                        for (size_t i = 0; i < idx->size(); ++i) {
                          const int64_t dst = (*idx)[i];
                          for (int64_t j = 0; j < g.cols; ++j)
                            ga.at(dst, j) += g.at(static_cast<int64_t>(i), j);
                        }
                      });
}

// out[idx[i], :] += a[i, :]; rows not named by idx stay zero
template <class T>
Value<T> scatter_add_rows(Value<T> a, RowIndex idx, int64_t out_rows) {
  check<InvalidArgument>(static_cast<int64_t>(idx->size()) == a.val().rows,
                         "scatter_add_rows: index count ", idx->size(), " != rows ",
                         a.val().rows);
  const int64_t n = a.val().cols;
  Tensor<T> out(out_rows, n);
  for (size_t i = 0; i < idx->size(); ++i) {
    const int32_t dst = (*idx)[i];
    check<InvalidArgument>(dst >= 0 && dst < out_rows, "scatter_add_rows: index ", dst,
                           " out of range for ", out_rows, " rows");
    for (int64_t j = 0; j < n; ++j) out.at(dst, j) += a.val().at(static_cast<int64_t>(i), j);
  }
  return a.tape->emit(std::move(out), a.tape->needs_grad(a.id),
                      [a, idx](Tape<T>& t, int32_t self) {
                        if (!t.needs_grad(a.id)) return;
                        const Tensor<T>& g = t.node(self).grad;
                        Tensor<T>& ga = t.grad_buf(a.id);
                        for (size_t i = 0; i < idx->size(); ++i) {
                          const int64_t src = (*idx)[i];
                          for (int64_t j = 0; j < g.cols; ++j)
                            ga.at(static_cast<int64_t>(i), j) += g.at(src, j);
                        }
                      });
}

// constant copy; gradients stop here
template <class T>
Value<T> detach(Value<T> a) {
  return a.tape->constant(a.val());
}

template <class T>
Value<T> square(Value<T> a) {
  return mul(a, a);
}

// ---- operator sugar ----

template <class T>
Value<T> operator+(Value<T> a, Value<T> b) {
  return add(a, b);
}
template <class T>
Value<T> operator-(Value<T> a, Value<T> b) {
  return sub(a, b);
}
template <class T>
Value<T> operator*(Value<T> a, Value<T> b) {
  return mul(a, b);
}
template <class T>
Value<T> operator/(Value<T> a, Value<T> b) {
  return div(a, b);
}
template <class T>
Value<T> operator*(T c, Value<T> a) {
  return scale(a, c);
}

}  // namespace rein
