#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nuc/common.hpp"

namespace nuc {

// Dense float tensor with reverse-mode autodiff. Scalar type is a template
// parameter: `float` is the working precision, `double` serves as the shadow
// precision for finite-difference checks. Reductions always accumulate in
// double regardless of S.
//
// Tensors are value-semantic handles onto shared nodes. A node is immutable
// after the forward op that produced it; backward() walks the recorded graph
// in reverse topological order, visiting each node exactly once.

template <typename S>
struct TensorNode {
  std::vector<int> shape;
  std::vector<S> value;
  std::vector<S> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void(TensorNode<S>&)> backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), S(0));
  }
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

template <typename S>
class TensorT {
 public:
  using Node = TensorNode<S>;

  TensorT() = default;

  static TensorT zeros(std::vector<int> shape) {
    return filled(std::move(shape), S(0));
  }

  static TensorT filled(std::vector<int> shape, S v) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(count(n->shape), v);
    return TensorT(std::move(n));
  }

  static TensorT from_data(std::vector<int> shape, std::vector<S> data) {
    if (count(shape) != static_cast<int64_t>(data.size()))
      throw shape_error("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return TensorT(std::move(n));
  }

  static TensorT scalar(S v) { return from_data({1}, {v}); }

  // Leaf with gradient tracking (a trainable parameter).
  static TensorT param(std::vector<int> shape, std::vector<S> data) {
    TensorT t = from_data(std::move(shape), std::move(data));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  int dim(int i) const { return node_->shape[i]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  const std::vector<S>& data() const { return node_->value; }
  // Mutating a leaf's values between graph builds (optimizer updates).
  std::vector<S>& data_mut() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<S>& grad() const {
    if (!has_grad())
      throw usage_error("tensor has no gradient; call backward() first");
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  S item() const {
    if (numel() != 1)
      throw usage_error("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
  }

  // Element access for [C,H,W] tensors (tests and renderers).
  S at(int c, int y, int x) const {
    const auto& s = node_->shape;
    return node_->value[(static_cast<int64_t>(c) * s[1] + y) * s[2] + x];
  }

  std::shared_ptr<Node> node() const { return node_; }

  bool same_shape(const TensorT& o) const { return shape() == o.shape(); }

  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw shape_error("non-positive dimension in " + shape_str(shape));
      n *= d;
    }
    return n;
  }

  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

namespace detail {

template <typename S>
std::shared_ptr<TensorNode<S>> make_result(
    std::vector<int> shape, std::vector<S> value,
    std::vector<std::shared_ptr<TensorNode<S>>> parents,
    std::function<void(TensorNode<S>&)> backward_fn) {
  auto n = std::make_shared<TensorNode<S>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool track = false;
  for (const auto& p : parents)
    if (p->requires_grad) track = true;
  if (track) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

template <typename S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (!a.same_shape(b))
    throw shape_error(std::string(op) + ": shape mismatch " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise binary ops ----

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<S> out(a.numel());
  const auto &av = a.data(), &bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto an = a.node(), bn = b.node();
  return TensorT<S>(detail::make_result<S>(
      a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
      }));
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<S> out(a.numel());
  const auto &av = a.data(), &bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto an = a.node(), bn = b.node();
  return TensorT<S>(detail::make_result<S>(
      a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
      }));
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<S> out(a.numel());
  const auto &av = a.data(), &bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto an = a.node(), bn = b.node();
  return TensorT<S>(detail::make_result<S>(
      a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn->grad[i] += self.grad[i] * an->value[i];
        }
      }));
}

// ---- elementwise unary ops ----

namespace detail {

// Builds a unary op from a value map and a gradient factor computed from
// (input value, output value).
template <typename S, typename FwdFn, typename GradFn>
TensorT<S> unary_op(const TensorT<S>& x, FwdFn fwd, GradFn dfn) {
  std::vector<S> out(x.numel());
  const auto& xv = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<S>(fwd(xv[i]));
  auto xn = x.node();
  return TensorT<S>(detail::make_result<S>(
      x.shape(), std::move(out), {xn}, [xn, dfn](TensorNode<S>& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          xn->grad[i] += self.grad[i] * static_cast<S>(dfn(xn->value[i], self.value[i]));
      }));
}

}  // namespace detail

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& x, double c) {
  return detail::unary_op(
      x, [c](S v) { return static_cast<double>(v) + c; },
      [](S, S) { return 1.0; });
}

template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& x, double c) {
  return detail::unary_op(
      x, [c](S v) { return static_cast<double>(v) * c; },
      [c](S, S) { return c; });
}

template <typename S>
TensorT<S> square(const TensorT<S>& x) {
  return detail::unary_op(
      x, [](S v) { return v * v; },
      [](S v, S) { return 2.0 * static_cast<double>(v); });
}

template <typename S>
TensorT<S> sqrt(const TensorT<S>& x) {
  return detail::unary_op(
      x, [](S v) { return std::sqrt(static_cast<double>(v)); },
      [](S, S y) { return 0.5 / static_cast<double>(y); });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  return detail::unary_op(
      x,
      [](S v) {
        const double d = static_cast<double>(v);
        // Branch avoids exp overflow for large negative inputs.
        if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
        const double e = std::exp(d);
        return e / (1.0 + e);
      },
      [](S, S y) {
        const double d = static_cast<double>(y);
        return d * (1.0 - d);
      });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
  return detail::unary_op(
      x, [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? 1.0 : 0.0; });
}

// |x|, subgradient 0 at x == 0.
template <typename S>
TensorT<S> abs(const TensorT<S>& x) {
  return detail::unary_op(
      x, [](S v) { return v < S(0) ? -v : v; },
      [](S v, S) { return v > S(0) ? 1.0 : (v < S(0) ? -1.0 : 0.0); });
}

// ---- reductions ----

template <typename S>
TensorT<S> sum_all(const TensorT<S>& x) {
  double acc = 0.0;
  for (S v : x.data()) acc += static_cast<double>(v);
  auto xn = x.node();
  return TensorT<S>(detail::make_result<S>(
      {1}, {static_cast<S>(acc)}, {xn}, [xn](TensorNode<S>& self) {
        xn->ensure_grad();
        const S g = self.grad[0];
        for (auto& gv : xn->grad) gv += g;
      }));
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& x) {
  double acc = 0.0;
  for (S v : x.data()) acc += static_cast<double>(v);
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  auto xn = x.node();
  return TensorT<S>(detail::make_result<S>(
      {1}, {static_cast<S>(acc * inv_n)}, {xn}, [xn, inv_n](TensorNode<S>& self) {
        xn->ensure_grad();
        const S g = static_cast<S>(static_cast<double>(self.grad[0]) * inv_n);
        for (auto& gv : xn->grad) gv += g;
      }));
}

// ---- channel split / concat for [C,H,W] ----

template <typename S>
std::pair<TensorT<S>, TensorT<S>> split_channels(const TensorT<S>& x, int c0) {
  if (x.rank() != 3)
    throw shape_error("split_channels expects [C,H,W], got " + shape_str(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (c0 <= 0 || c0 >= C)
    throw shape_error("split point " + std::to_string(c0) + " out of range for C=" +
                      std::to_string(C));
  const int64_t plane = static_cast<int64_t>(H) * W;
  auto xn = x.node();

  auto make_slice = [&](int begin, int nch) {
    std::vector<S> out(xn->value.begin() + begin * plane,
                       xn->value.begin() + (begin + nch) * plane);
    const int64_t off = begin * plane;
    return TensorT<S>(detail::make_result<S>(
        {nch, H, W}, std::move(out), {xn}, [xn, off](TensorNode<S>& self) {
          xn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[off + i] += self.grad[i];
        }));
  };
  return {make_slice(0, c0), make_slice(c0, C - c0)};
}

template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw shape_error("concat_channels: incompatible shapes " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  const int H = a.dim(1), W = a.dim(2);
  std::vector<S> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  auto an = a.node(), bn = b.node();
  const int64_t na = a.numel();
  return TensorT<S>(detail::make_result<S>(
      {a.dim(0) + b.dim(0), H, W}, std::move(out), {an, bn},
      [an, bn, na](TensorNode<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (int64_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          const int64_t nb = static_cast<int64_t>(self.grad.size()) - na;
          for (int64_t i = 0; i < nb; ++i) bn->grad[i] += self.grad[na + i];
        }
      }));
}

// Per-channel scale: x[C,H,W] * w[C,1,1].
template <typename S>
TensorT<S> mul_channels(const TensorT<S>& x, const TensorT<S>& w) {
  if (x.rank() != 3 || w.rank() != 3 || w.dim(0) != x.dim(0) || w.dim(1) != 1 ||
      w.dim(2) != 1)
    throw shape_error("mul_channels: expected x[C,H,W] and w[C,1,1], got " +
                      shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int C = x.dim(0);
  const int64_t plane = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  std::vector<S> out(x.numel());
  const auto &xv = x.data(), &wv = w.data();
  for (int c = 0; c < C; ++c) {
    const S s = wv[c];
    for (int64_t i = 0; i < plane; ++i) out[c * plane + i] = xv[c * plane + i] * s;
  }
  auto xn = x.node(), wn = w.node();
  return TensorT<S>(detail::make_result<S>(
      x.shape(), std::move(out), {xn, wn}, [xn, wn, C, plane](TensorNode<S>& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int c = 0; c < C; ++c) {
            const S s = wn->value[c];
            for (int64_t i = 0; i < plane; ++i)
              xn->grad[c * plane + i] += self.grad[c * plane + i] * s;
          }
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i)
              acc += static_cast<double>(self.grad[c * plane + i]) *
                     static_cast<double>(xn->value[c * plane + i]);
            wn->grad[c] += static_cast<S>(acc);
          }
        }
      }));
}

// ---- backward ----

template <typename S>
void backward(const TensorT<S>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw usage_error("backward() requires a scalar loss");
  if (!loss.requires_grad())
    throw usage_error("backward() on an untracked graph: no parameter requires grad");

  // Iterative post-order DFS; reverse gives a topological order with every
  // node after all of its consumers.
  std::vector<TensorNode<S>*> order;
  std::unordered_set<TensorNode<S>*> visited;
  std::vector<std::pair<TensorNode<S>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode<S>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<S>* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// Value-level helpers (no gradient), for metrics/export paths.

template <typename S>
TensorT<S> clamp_values(const TensorT<S>& x, double lo, double hi) {
  std::vector<S> out(x.numel());
  const auto& xv = x.data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(std::min(hi, std::max(lo, static_cast<double>(xv[i]))));
  return TensorT<S>::from_data(x.shape(), std::move(out));
}

template <typename S>
TensorT<S> detach(const TensorT<S>& x) {
  return TensorT<S>::from_data(x.shape(), x.data());
}

template <typename S>
bool all_finite(const TensorT<S>& x) {
  for (S v : x.data())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// Precision conversion (f32 <-> f64 shadow).
template <typename To, typename From>
TensorT<To> cast(const TensorT<From>& x) {
  std::vector<To> out(x.numel());
  const auto& xv = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(xv[i]);
  TensorT<To> t = TensorT<To>::from_data(x.shape(), std::move(out));
  t.set_requires_grad(x.requires_grad());
  return t;
}

}  // namespace nuc
