#pragma once

#include <vector>

#include "nuc/tensor.hpp"

namespace nuc {

enum class PoolMode { avg, max };

// Global pooling [C,H,W] -> [C,1,1]. Average accumulates in double; max
// routes the gradient to the first argmax in row-major order.
template <typename S>
TensorT<S> global_pool(const TensorT<S>& x, PoolMode mode) {
  if (x.rank() != 3)
    throw shape_error("global_pool: input must be [C,H,W], got " + shape_str(x.shape()));
  const int C = x.dim(0);
  const int64_t plane = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  if (plane == 0) throw shape_error("global_pool: empty spatial extent");

  std::vector<S> out(C);
  std::vector<int64_t> argmax;
  if (mode == PoolMode::avg) {
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      const S* xc = x.data().data() + c * plane;
      for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(xc[i]);
      out[c] = static_cast<S>(acc / static_cast<double>(plane));
    }
  } else {
    argmax.resize(C);
    for (int c = 0; c < C; ++c) {
      const S* xc = x.data().data() + c * plane;
      int64_t best = 0;
      for (int64_t i = 1; i < plane; ++i)
        if (xc[i] > xc[best]) best = i;
      argmax[c] = best;
      out[c] = xc[best];
    }
  }

  auto xn = x.node();
  return TensorT<S>(detail::make_result<S>(
      {C, 1, 1}, std::move(out), {xn},
      [xn, C, plane, mode, argmax = std::move(argmax)](TensorNode<S>& self) {
        xn->ensure_grad();
        if (mode == PoolMode::avg) {
          const double inv = 1.0 / static_cast<double>(plane);
          for (int c = 0; c < C; ++c) {
            const S g = static_cast<S>(static_cast<double>(self.grad[c]) * inv);
            S* gx = xn->grad.data() + c * plane;
            for (int64_t i = 0; i < plane; ++i) gx[i] += g;
          }
        } else {
          for (int c = 0; c < C; ++c)
            xn->grad[c * plane + argmax[c]] += self.grad[c];
        }
      }));
}

}  // namespace nuc
