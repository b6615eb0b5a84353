#pragma once

#include <vector>

#include "nuc/tensor.hpp"

namespace nuc {

// Padding for same-size 2D convolution. 1x1 kernels take Pad::none; 3x3
// kernels take zero1 or mirror1 (reflect-101: the edge pixel is not
// duplicated, so mirrored axes need size >= 2).
enum class Pad { none, zero1, mirror1 };

namespace detail {

inline int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Copies one channel into a (H+2)x(W+2) buffer. Border values are zero or
// the reflect-101 image of the interior.
template <typename S>
void pad1_channel(const S* src, int H, int W, bool mirror, S* dst) {
  const int Wp = W + 2;
  for (int py = 0; py < H + 2; ++py) {
    S* drow = dst + static_cast<int64_t>(py) * Wp;
    if (mirror) {
      const S* srow = src + static_cast<int64_t>(reflect101(py - 1, H)) * W;
      drow[0] = srow[1];
      for (int x = 0; x < W; ++x) drow[x + 1] = srow[x];
      drow[W + 1] = srow[W - 2];
    } else {
      const bool inside = py >= 1 && py <= H;
      if (!inside) {
        for (int px = 0; px < Wp; ++px) drow[px] = S(0);
      } else {
        const S* srow = src + static_cast<int64_t>(py - 1) * W;
        drow[0] = S(0);
        for (int x = 0; x < W; ++x) drow[x + 1] = srow[x];
        drow[W + 1] = S(0);
      }
    }
  }
}

// Adjoint of pad1_channel: folds a padded-gradient buffer back onto the
// source gradient.
template <typename S>
void fold_pad1_channel(const double* gpad, int H, int W, bool mirror, S* gsrc) {
  const int Wp = W + 2;
  if (mirror) {
    for (int py = 0; py < H + 2; ++py) {
      const int sy = reflect101(py - 1, H);
      const double* grow = gpad + static_cast<int64_t>(py) * Wp;
      S* srow = gsrc + static_cast<int64_t>(sy) * W;
      srow[1] += static_cast<S>(grow[0]);
      for (int x = 0; x < W; ++x) srow[x] += static_cast<S>(grow[x + 1]);
      srow[W - 2] += static_cast<S>(grow[W + 1]);
    }
  } else {
    for (int y = 0; y < H; ++y) {
      const double* grow = gpad + static_cast<int64_t>(y + 1) * Wp + 1;
      S* srow = gsrc + static_cast<int64_t>(y) * W;
      for (int x = 0; x < W; ++x) srow[x] += static_cast<S>(grow[x]);
    }
  }
}

}  // namespace detail

// Same-size 2D convolution (cross-correlation), differentiable w.r.t. input,
// kernel and bias. input [Cin,H,W], kernel [Cout,Cin,k,k], bias [Cout] ->
// [Cout,H,W]. Inner products accumulate in double.
template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& kernel,
                  const TensorT<S>& bias, Pad pad) {
  if (input.rank() != 3)
    throw shape_error("conv2d: input must be [Cin,H,W], got " + shape_str(input.shape()));
  if (kernel.rank() != 4)
    throw shape_error("conv2d: kernel must be [Cout,Cin,k,k], got " +
                      shape_str(kernel.shape()));
  const int Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int Cout = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != Cin)
    throw shape_error("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                      " input channels, input has " + std::to_string(Cin));
  if (kernel.dim(3) != k || (k != 1 && k != 3))
    throw config_error("conv2d: unsupported kernel size " + std::to_string(kernel.dim(2)) +
                       "x" + std::to_string(kernel.dim(3)) + " (1x1 and 3x3 only)");
  if (bias.rank() != 1 || bias.dim(0) != Cout)
    throw shape_error("conv2d: bias must be [Cout]=" + std::to_string(Cout) + ", got " +
                      shape_str(bias.shape()));
  if (k == 1 && pad != Pad::none)
    throw config_error("conv2d: 1x1 kernel takes Pad::none");
  if (k == 3 && pad == Pad::none)
    throw config_error("conv2d: 3x3 kernel needs zero1 or mirror1 padding");
  if (pad == Pad::mirror1 && (H < 2 || W < 2))
    throw shape_error("conv2d: mirror padding needs H,W >= 2, got " +
                      shape_str(input.shape()));

  const int64_t plane = static_cast<int64_t>(H) * W;
  std::vector<S> out(static_cast<int64_t>(Cout) * plane);

  if (k == 1) {
    std::vector<double> acc(plane);
    for (int co = 0; co < Cout; ++co) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(bias.data()[co]));
      for (int ci = 0; ci < Cin; ++ci) {
        const double w = kernel.data()[static_cast<int64_t>(co) * Cin + ci];
        const S* xin = input.data().data() + ci * plane;
        for (int64_t i = 0; i < plane; ++i) acc[i] += w * static_cast<double>(xin[i]);
      }
      S* orow = out.data() + co * plane;
      for (int64_t i = 0; i < plane; ++i) orow[i] = static_cast<S>(acc[i]);
    }
  } else {
    const int Wp = W + 2;
    const int64_t pplane = static_cast<int64_t>(H + 2) * Wp;
    std::vector<S> padded(static_cast<int64_t>(Cin) * pplane);
    for (int ci = 0; ci < Cin; ++ci)
      detail::pad1_channel(input.data().data() + ci * plane, H, W,
                           pad == Pad::mirror1, padded.data() + ci * pplane);
    std::vector<double> acc(plane);
    for (int co = 0; co < Cout; ++co) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(bias.data()[co]));
      for (int ci = 0; ci < Cin; ++ci) {
        const S* xp = padded.data() + ci * pplane;
        const S* kk = kernel.data().data() + (static_cast<int64_t>(co) * Cin + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double w = static_cast<double>(kk[ky * 3 + kx]);
            for (int y = 0; y < H; ++y) {
              const S* xrow = xp + static_cast<int64_t>(y + ky) * Wp + kx;
              double* arow = acc.data() + static_cast<int64_t>(y) * W;
              for (int x = 0; x < W; ++x) arow[x] += w * static_cast<double>(xrow[x]);
            }
          }
        }
      }
      S* orow = out.data() + co * plane;
      for (int64_t i = 0; i < plane; ++i) orow[i] = static_cast<S>(acc[i]);
    }
  }

  auto xn = input.node(), kn = kernel.node(), bn = bias.node();
  return TensorT<S>(detail::make_result<S>(
      {Cout, H, W}, std::move(out), {xn, kn, bn},
      [xn, kn, bn, Cin, Cout, H, W, k, pad](TensorNode<S>& self) {
        const int64_t plane = static_cast<int64_t>(H) * W;
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            const S* g = self.grad.data() + co * plane;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(g[i]);
            bn->grad[co] += static_cast<S>(acc);
          }
        }
        if (k == 1) {
          if (kn->requires_grad) {
            kn->ensure_grad();
            for (int co = 0; co < Cout; ++co) {
              const S* g = self.grad.data() + co * plane;
              for (int ci = 0; ci < Cin; ++ci) {
                const S* xin = xn->value.data() + ci * plane;
                double acc = 0.0;
                for (int64_t i = 0; i < plane; ++i)
                  acc += static_cast<double>(g[i]) * static_cast<double>(xin[i]);
                kn->grad[static_cast<int64_t>(co) * Cin + ci] += static_cast<S>(acc);
              }
            }
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            std::vector<double> acc(plane);
            for (int ci = 0; ci < Cin; ++ci) {
              std::fill(acc.begin(), acc.end(), 0.0);
              for (int co = 0; co < Cout; ++co) {
                const double w = kn->value[static_cast<int64_t>(co) * Cin + ci];
                const S* g = self.grad.data() + co * plane;
                for (int64_t i = 0; i < plane; ++i) acc[i] += w * static_cast<double>(g[i]);
              }
              S* gx = xn->grad.data() + ci * plane;
              for (int64_t i = 0; i < plane; ++i) gx[i] += static_cast<S>(acc[i]);
            }
          }
          return;
        }

        const int Wp = W + 2;
        const int64_t pplane = static_cast<int64_t>(H + 2) * Wp;
        const bool mirror = pad == Pad::mirror1;
        std::vector<S> padded;
        if (kn->requires_grad) {
          // Padded input is recomputed rather than kept alive by the graph.
          padded.resize(static_cast<int64_t>(Cin) * pplane);
          for (int ci = 0; ci < Cin; ++ci)
            detail::pad1_channel(xn->value.data() + ci * plane, H, W, mirror,
                                 padded.data() + ci * pplane);
          kn->ensure_grad();
          for (int co = 0; co < Cout; ++co) {
            const S* g = self.grad.data() + co * plane;
            for (int ci = 0; ci < Cin; ++ci) {
              const S* xp = padded.data() + ci * pplane;
              S* gk = kn->grad.data() + (static_cast<int64_t>(co) * Cin + ci) * 9;
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  double acc = 0.0;
                  for (int y = 0; y < H; ++y) {
                    const S* xrow = xp + static_cast<int64_t>(y + ky) * Wp + kx;
                    const S* grow = g + static_cast<int64_t>(y) * W;
                    for (int x = 0; x < W; ++x)
                      acc += static_cast<double>(xrow[x]) * static_cast<double>(grow[x]);
                  }
                  gk[ky * 3 + kx] += static_cast<S>(acc);
                }
              }
            }
          }
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          std::vector<double> gpad(pplane);
          for (int ci = 0; ci < Cin; ++ci) {
            std::fill(gpad.begin(), gpad.end(), 0.0);
            for (int co = 0; co < Cout; ++co) {
              const S* g = self.grad.data() + co * plane;
              const S* kk = kn->value.data() + (static_cast<int64_t>(co) * Cin + ci) * 9;
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const double w = static_cast<double>(kk[ky * 3 + kx]);
                  for (int y = 0; y < H; ++y) {
                    double* prow = gpad.data() + static_cast<int64_t>(y + ky) * Wp + kx;
                    const S* grow = g + static_cast<int64_t>(y) * W;
                    for (int x = 0; x < W; ++x) prow[x] += w * static_cast<double>(grow[x]);
                  }
                }
              }
            }
            detail::fold_pad1_channel(gpad.data(), H, W, mirror,
                                      xn->grad.data() + ci * plane);
          }
        }
      }));
}

// 3x3 window mean with mirror padding, each window summed in double and
// divided by 9 once. Exact for constant channels, which the windowed
// standard deviation relies on.
template <typename S>
TensorT<S> window_mean3x3(const TensorT<S>& x) {
  if (x.rank() != 3)
    throw shape_error("window_mean3x3: input must be [C,H,W], got " +
                      shape_str(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H < 2 || W < 2)
    throw shape_error("window_mean3x3: mirror padding needs H,W >= 2, got " +
                      shape_str(x.shape()));
  const int Wp = W + 2;
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t pplane = static_cast<int64_t>(H + 2) * Wp;

  std::vector<S> out(x.numel());
  std::vector<S> padded(pplane);
  for (int c = 0; c < C; ++c) {
    detail::pad1_channel(x.data().data() + c * plane, H, W, true, padded.data());
    for (int y = 0; y < H; ++y) {
      S* orow = out.data() + c * plane + static_cast<int64_t>(y) * W;
      const S* r0 = padded.data() + static_cast<int64_t>(y) * Wp;
      const S* r1 = r0 + Wp;
      const S* r2 = r1 + Wp;
      for (int x = 0; x < W; ++x) {
        const double s = static_cast<double>(r0[x]) + static_cast<double>(r0[x + 1]) +
                         static_cast<double>(r0[x + 2]) + static_cast<double>(r1[x]) +
                         static_cast<double>(r1[x + 1]) + static_cast<double>(r1[x + 2]) +
                         static_cast<double>(r2[x]) + static_cast<double>(r2[x + 1]) +
                         static_cast<double>(r2[x + 2]);
        orow[x] = static_cast<S>(s / 9.0);
      }
    }
  }

  auto xnode = x.node();
  return TensorT<S>(detail::make_result<S>(
      x.shape(), std::move(out), {xnode}, [xnode, C, H, W](TensorNode<S>& self) {
        xnode->ensure_grad();
        const int Wp = W + 2;
        const int64_t plane = static_cast<int64_t>(H) * W;
        std::vector<double> gpad(static_cast<int64_t>(H + 2) * Wp);
        for (int c = 0; c < C; ++c) {
          std::fill(gpad.begin(), gpad.end(), 0.0);
          const S* g = self.grad.data() + c * plane;
          for (int y = 0; y < H; ++y) {
            const S* grow = g + static_cast<int64_t>(y) * W;
            for (int ky = 0; ky < 3; ++ky) {
              double* prow = gpad.data() + static_cast<int64_t>(y + ky) * Wp;
              for (int x = 0; x < W; ++x) {
                const double gv = static_cast<double>(grow[x]) / 9.0;
                prow[x] += gv;
                prow[x + 1] += gv;
                prow[x + 2] += gv;
              }
            }
          }
          detail::fold_pad1_channel(gpad.data(), H, W, true,
                                    xnode->grad.data() + c * plane);
        }
      }));
}

// Explicit reflect-101 padding as a plain value (test oracles).
template <typename S>
TensorT<S> mirror_pad1_values(const TensorT<S>& x) {
  if (x.rank() != 3 || x.dim(1) < 2 || x.dim(2) < 2)
    throw shape_error("mirror_pad1_values: need [C,H>=2,W>=2], got " +
                      shape_str(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<S> out(static_cast<int64_t>(C) * (H + 2) * (W + 2));
  for (int c = 0; c < C; ++c)
    detail::pad1_channel(x.data().data() + static_cast<int64_t>(c) * H * W, H, W, true,
                         out.data() + static_cast<int64_t>(c) * (H + 2) * (W + 2));
  return TensorT<S>::from_data({C, H + 2, W + 2}, std::move(out));
}

}  // namespace nuc
