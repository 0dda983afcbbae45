#pragma once

// Dense 64-bit tensors with a dynamic reverse-mode tape.
//
// A Var is an immutable value plus an optional (tape, node) handle. Ops on
// constants evaluate eagerly and record nothing; as soon as one input is
// tracked the result is recorded on that input's tape. Broadcasting follows
// the usual right-aligned rule (a dimension of 1, or a missing leading
// dimension, stretches).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gcart {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match " +
                                  std::to_string(data_.size()) + " elements");
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double item() const {
    if (data_.size() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape_));
    return data_[0];
  }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on = true) {
    requires_grad_ = on;
    return *this;
  }

  // Same shape, new contents; keeps requires_grad.
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw std::invalid_argument("reshape: " + shape_str(shape_) + " -> " + shape_str(shape));
    }
    Tensor t(std::move(shape), data_);
    t.requires_grad_ = requires_grad_;
    return t;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

class Tape;

class Var {
 public:
  Var() : value_(std::make_shared<const Tensor>()) {}
  Var(Tensor value)  // NOLINT(google-explicit-constructor): constants convert implicitly
      : value_(std::make_shared<const Tensor>(std::move(value))) {}
  Var(double scalar) : Var(Tensor::scalar(scalar)) {}  // NOLINT

  const Tensor& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  std::size_t size() const { return value_->size(); }
  double item() const { return value_->item(); }

  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool tracked() const { return tape_ != nullptr && node_ >= 0; }

 private:
  friend class Tape;
  Var(std::shared_ptr<const Tensor> value, Tape* tape, int node)
      : value_(std::move(value)), tape_(tape), node_(node) {}

  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Local gradient rule: receives d(loss)/d(output) and a per-input flag telling
// which inputs need a gradient; returns one tensor per input (an unneeded slot
// may be left default-constructed).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<char>& need)>;

class Gradients {
 public:
  bool contains(const Var& v) const { return grads_.count(v.node()) != 0; }

  // Gradient for a leaf; a leaf that the loss does not reach has zero gradient.
  Tensor operator[](const Var& v) const {
    auto it = grads_.find(v.node());
    if (it == grads_.end()) return Tensor(v.shape(), 0.0);
    return it->second;
  }

  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::map<int, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records a leaf if the tensor requires grad; otherwise returns a constant.
  Var leaf(Tensor t) {
    if (!t.requires_grad()) return Var(std::move(t));
    return push(std::make_shared<const Tensor>(std::move(t)), {}, nullptr);
  }

  Var variable(Tensor t) {
    t.set_requires_grad(true);
    return leaf(std::move(t));
  }

  std::size_t size() const { return nodes_.size(); }

  Var record(Tensor out, const std::vector<const Var*>& inputs, BackwardFn fn) {
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Var* v : inputs) {
      if (v->tracked() && v->tape() != this) throw std::invalid_argument("tape: inputs recorded on different tapes");
      ids.push_back(v->tracked() ? v->node() : -1);
    }
    return push(std::make_shared<const Tensor>(std::move(out)), std::move(ids), std::move(fn));
  }

  Gradients backward(const Var& loss) const {
    if (!loss.tracked() || loss.tape() != this) throw std::invalid_argument("backward: loss is not recorded on this tape");
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));

    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> has(nodes_.size(), 0);
    grads[loss.node()] = Tensor(loss.shape(), 1.0);
    has[loss.node()] = 1;

    Gradients result;
    for (int id = loss.node(); id >= 0; --id) {
      if (!has[id]) continue;
      const Node& node = nodes_[id];
      if (!node.backward) {
        result.grads_.emplace(id, std::move(grads[id]));
        continue;
      }
      std::vector<char> need(node.inputs.size());
      for (std::size_t i = 0; i < node.inputs.size(); ++i) need[i] = node.inputs[i] >= 0;
      std::vector<Tensor> local = node.backward(grads[id], need);
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const int in = node.inputs[i];
        if (in < 0) continue;
        if (local[i].shape() != nodes_[in].shape) {
          throw std::logic_error("backward: gradient shape " + shape_str(local[i].shape()) + " != " +
                                 shape_str(nodes_[in].shape));
        }
        if (!has[in]) {
          grads[in] = std::move(local[i]);
          has[in] = 1;
        } else {
          auto dst = grads[in].data();
          auto src = local[i].data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }
      grads[id] = Tensor();
      has[id] = 0;
    }
    return result;
  }

 private:
  struct Node {
    Shape shape;
    std::vector<int> inputs;
    BackwardFn backward;  // empty for leaves
  };

  Var push(std::shared_ptr<const Tensor> value, std::vector<int> inputs, BackwardFn fn) {
    nodes_.push_back(Node{value->shape(), std::move(inputs), std::move(fn)});
    return Var(std::move(value), this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

// Records `out` on the tape of the tracked inputs, or returns it as a constant
// when none is tracked. Used by every primitive and by fused module ops.
inline Var record_op(Tensor out, const std::vector<const Var*>& inputs, BackwardFn fn) {
#ifndef NDEBUG
  for (double x : out.data()) {
    if (!std::isfinite(x)) throw std::domain_error("forward op produced a non-finite value");
  }
#endif
  Tape* tape = nullptr;
  for (const Var* v : inputs) {
    if (v->tracked()) {
      tape = v->tape();
      break;
    }
  }
  if (tape == nullptr) return Var(std::move(out));
  return tape->record(std::move(out), inputs, std::move(fn));
}

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` laid against `out` (right-aligned); 0 along stretched axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> st(out.size(), 0);
  const std::size_t offset = out.size() - in.size();
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    st[offset + i] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  return st;
}

// Visits every output index in row-major order with the matching input offsets.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t n = shape_size(out);
  const std::size_t rank = out.size();
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <class F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F&& f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  Shape shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(shape);
  for_each_broadcast(shape, broadcast_strides(a.shape(), shape), broadcast_strides(b.shape(), shape),
                     [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = f(a[ia], b[ib]); });
  return out;
}

// Sums a gradient of broadcast shape back down to `target`, in output order.
inline Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor r(target, 0.0);
  const auto st = broadcast_strides(target, g.shape());
  const std::vector<std::size_t> zero(g.rank(), 0);
  for_each_broadcast(g.shape(), st, zero, [&](std::size_t o, std::size_t it, std::size_t) { r[it] += g[o]; });
  return r;
}

template <class F>
Tensor map(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x * y; });
}

inline std::size_t check_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  return axis;
}

template <class F>
Var unary(const Var& x, F&& f, std::function<Tensor(const Tensor& x, const Tensor& y, const Tensor& g)> df) {
  Tensor y = map(x.value(), f);
  auto xv = std::make_shared<const Tensor>(x.value());
  auto yv = std::make_shared<const Tensor>(y);
  return record_op(std::move(y), {&x}, [xv, yv, df](const Tensor& g, const std::vector<char>&) {
    return std::vector<Tensor>{df(*xv, *yv, g)};
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

inline Var add(const Var& a, const Var& b) {
  Tensor out = detail::broadcast_binary(a.value(), b.value(), [](double x, double y) { return x + y; });
  return record_op(std::move(out), {&a, &b},
                   [sa = a.shape(), sb = b.shape()](const Tensor& g, const std::vector<char>& need) {
                     std::vector<Tensor> r(2);
                     if (need[0]) r[0] = detail::reduce_to(g, sa);
                     if (need[1]) r[1] = detail::reduce_to(g, sb);
                     return r;
                   });
}

inline Var sub(const Var& a, const Var& b) {
  Tensor out = detail::broadcast_binary(a.value(), b.value(), [](double x, double y) { return x - y; });
  return record_op(std::move(out), {&a, &b},
                   [sa = a.shape(), sb = b.shape()](const Tensor& g, const std::vector<char>& need) {
                     std::vector<Tensor> r(2);
                     if (need[0]) r[0] = detail::reduce_to(g, sa);
                     if (need[1]) r[1] = detail::reduce_to(detail::map(g, [](double v) { return -v; }), sb);
                     return r;
                   });
}

inline Var mul(const Var& a, const Var& b) {
  Tensor out = detail::mul(a.value(), b.value());
  auto av = std::make_shared<const Tensor>(a.value());
  auto bv = std::make_shared<const Tensor>(b.value());
  return record_op(std::move(out), {&a, &b}, [av, bv](const Tensor& g, const std::vector<char>& need) {
    std::vector<Tensor> r(2);
    if (need[0]) r[0] = detail::reduce_to(detail::mul(g, *bv), av->shape());
    if (need[1]) r[1] = detail::reduce_to(detail::mul(g, *av), bv->shape());
    return r;
  });
}

inline Var div(const Var& a, const Var& b) {
  for (double d : b.value().data()) {
    if (d == 0.0) throw std::domain_error("div: division by exact zero");
  }
  Tensor out = detail::broadcast_binary(a.value(), b.value(), [](double x, double y) { return x / y; });
  auto av = std::make_shared<const Tensor>(a.value());
  auto bv = std::make_shared<const Tensor>(b.value());
  return record_op(std::move(out), {&a, &b}, [av, bv](const Tensor& g, const std::vector<char>& need) {
    std::vector<Tensor> r(2);
    if (need[0]) {
      r[0] = detail::reduce_to(detail::broadcast_binary(g, *bv, [](double gv, double y) { return gv / y; }),
                               av->shape());
    }
    if (need[1]) {
      // d(a/b)/db = -a/b^2
      Tensor q = detail::broadcast_binary(*av, *bv, [](double x, double y) { return -x / (y * y); });
      r[1] = detail::reduce_to(detail::mul(g, q), bv->shape());
    }
    return r;
  });
}

// 2-D matrix product [n,k] x [k,m] -> [n,m].
inline Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0]) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  const std::size_t n = A.shape()[0];
  const std::size_t k = A.shape()[1];
  const std::size_t m = B.shape()[1];
  Tensor out(Shape{n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &out[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * m];
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
  auto av = std::make_shared<const Tensor>(A);
  auto bv = std::make_shared<const Tensor>(B);
  return record_op(std::move(out), {&a, &b}, [av, bv, n, k, m](const Tensor& g, const std::vector<char>& need) {
    std::vector<Tensor> r(2);
    if (need[0]) {  // g * B^T
      Tensor ga(Shape{n, k}, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * (*bv)[p * m + j];
          ga[i * k + p] = s;
        }
      }
      r[0] = std::move(ga);
    }
    if (need[1]) {  // A^T * g
      Tensor gb(Shape{k, m}, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = (*av)[i * k + p];
          if (aip == 0.0) continue;
          double* row = &gb[p * m];
          for (std::size_t j = 0; j < m; ++j) row[j] += aip * g[i * m + j];
        }
      }
      r[1] = std::move(gb);
    }
    return r;
  });
}

inline Var exp(const Var& x) {
  return detail::unary(x, [](double v) { return std::exp(v); },
                       [](const Tensor&, const Tensor& y, const Tensor& g) { return detail::mul(g, y); });
}

inline Var log(const Var& x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw std::domain_error("log: argument must be positive");
  }
  return detail::unary(x, [](double v) { return std::log(v); },
                       [](const Tensor& xv, const Tensor&, const Tensor& g) {
                         return detail::broadcast_binary(g, xv, [](double gv, double v) { return gv / v; });
                       });
}

// x^p for a constant exponent p.
inline Var pow(const Var& x, double p) {
  return detail::unary(x, [p](double v) { return std::pow(v, p); },
                       [p](const Tensor& xv, const Tensor&, const Tensor& g) {
                         return detail::broadcast_binary(
                             g, xv, [p](double gv, double v) { return gv * p * std::pow(v, p - 1.0); });
                       });
}

// relu'(0) := 0.
inline Var relu(const Var& x) {
  return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](const Tensor& xv, const Tensor&, const Tensor& g) {
                         return detail::broadcast_binary(g, xv, [](double gv, double v) { return v > 0.0 ? gv : 0.0; });
                       });
}

// max(0, x); same subgradient choice as relu.
inline Var max0(const Var& x) { return relu(x); }

inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
inline double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Var softplus(const Var& x) {
  return detail::unary(x, [](double v) { return softplus(v); },
                       [](const Tensor& xv, const Tensor&, const Tensor& g) {
                         return detail::broadcast_binary(g, xv, [](double gv, double v) { return gv * sigmoid(v); });
                       });
}

// Sum of all elements, left to right.
inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return record_op(Tensor::scalar(s), {&x}, [shape = x.shape()](const Tensor& g, const std::vector<char>&) {
    return std::vector<Tensor>{Tensor(shape, g.item())};
  });
}

inline Var mean(const Var& x) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return record_op(Tensor::scalar(s / n), {&x}, [shape = x.shape(), n](const Tensor& g, const std::vector<char>&) {
    return std::vector<Tensor>{Tensor(shape, g.item() / n)};
  });
}

// Sum along one axis (removed from the result), ascending index order.
inline Var sum(const Var& x, std::size_t axis) {
  const Shape& in = x.shape();
  detail::check_axis(in, axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[axis];
  Shape out_shape = in;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape, 0.0);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * len + l) * inner + i];
  return record_op(std::move(out), {&x}, [in, outer, inner, len](const Tensor& g, const std::vector<char>&) {
    Tensor gx(in);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + l) * inner + i] = g[o * inner + i];
    return std::vector<Tensor>{std::move(gx)};
  });
}

inline Var mean(const Var& x, std::size_t axis) {
  const double len = static_cast<double>(x.shape().at(detail::check_axis(x.shape(), axis)));
  return div(sum(x, axis), Var(len));
}

inline Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return record_op(std::move(out), {&x}, [in = x.shape()](const Tensor& g, const std::vector<char>&) {
    return std::vector<Tensor>{g.reshaped(in)};
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return mul(a, Var(-1.0)); }

}  // namespace gcart
