#pragma once

#include <complex>
#include <vector>

#include "nuc/tensor.hpp"

namespace nuc {

namespace fft_detail {

using cd = std::complex<double>;
constexpr double kTwoPi = 6.283185307179586476925286766559;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2. sign=-1 forward, sign=+1 inverse; both
// unnormalized.
inline void fft_pow2(cd* a, int n, int sign) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * kTwoPi / len;
    const cd wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const cd u = a[i + j];
        const cd v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary n, via a power-of-two cyclic convolution.
inline void fft_bluestein(cd* a, int n, int sign) {
  int m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<cd> chirp(n);
  for (int j = 0; j < n; ++j) {
    // j^2 mod 2n keeps the twiddle angle small.
    const int64_t q = (static_cast<int64_t>(j) * j) % (2 * n);
    const double ang = sign * kTwoPi * 0.5 * static_cast<double>(q) / n;
    chirp[j] = cd(std::cos(ang), std::sin(ang));
  }
  std::vector<cd> b(m, cd(0.0, 0.0)), c(m, cd(0.0, 0.0));
  for (int j = 0; j < n; ++j) b[j] = a[j] * chirp[j];
  for (int j = 0; j < n; ++j) {
    c[j] = std::conj(chirp[j]);
    if (j != 0) c[m - j] = std::conj(chirp[j]);
  }
  fft_pow2(b.data(), m, -1);
  fft_pow2(c.data(), m, -1);
  for (int j = 0; j < m; ++j) b[j] *= c[j];
  fft_pow2(b.data(), m, +1);
  const double inv_m = 1.0 / m;
  for (int k = 0; k < n; ++k) a[k] = b[k] * inv_m * chirp[k];
}

inline void fft_1d(cd* a, int n, int sign) {
  if (n == 1) return;
  if (is_pow2(n))
    fft_pow2(a, n, sign);
  else
    fft_bluestein(a, n, sign);
}

// Unnormalized 2D transform on a row-major HxW buffer.
inline void fft_2d(cd* data, int H, int W, int sign) {
  for (int y = 0; y < H; ++y) fft_1d(data + static_cast<int64_t>(y) * W, W, sign);
  std::vector<cd> col(H);
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) col[y] = data[static_cast<int64_t>(y) * W + x];
    fft_1d(col.data(), H, sign);
    for (int y = 0; y < H; ++y) data[static_cast<int64_t>(y) * W + x] = col[y];
  }
}

}  // namespace fft_detail

inline int rfft_width(int W) { return W / 2 + 1; }

// Real 2D FFT of [C,H,W], returned as 2C real channels: [0,C) real parts,
// [C,2C) imaginary parts, spatial shape H x (W/2+1). Unnormalized forward.
// The backward is the adjoint map: zero-pad the half-spectrum cotangent onto
// the full grid, apply the conjugate-exponent transform, take the real part.
template <typename S>
TensorT<S> rfft2_stacked(const TensorT<S>& x) {
  using fft_detail::cd;
  if (x.rank() != 3)
    throw shape_error("rfft2: input must be [C,H,W], got " + shape_str(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H < 2 || W < 2)
    throw shape_error("rfft2: H,W >= 2 required, got " + shape_str(x.shape()));
  const int Wr = rfft_width(W);
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t rplane = static_cast<int64_t>(H) * Wr;

  std::vector<S> out(static_cast<int64_t>(2 * C) * rplane);
  std::vector<cd> buf(plane);
  for (int c = 0; c < C; ++c) {
    const S* xc = x.data().data() + c * plane;
    for (int64_t i = 0; i < plane; ++i) buf[i] = cd(static_cast<double>(xc[i]), 0.0);
    fft_detail::fft_2d(buf.data(), H, W, -1);
    S* ore = out.data() + static_cast<int64_t>(c) * rplane;
    S* oim = out.data() + static_cast<int64_t>(C + c) * rplane;
    for (int u = 0; u < H; ++u)
      for (int v = 0; v < Wr; ++v) {
        const cd z = buf[static_cast<int64_t>(u) * W + v];
        ore[static_cast<int64_t>(u) * Wr + v] = static_cast<S>(z.real());
        oim[static_cast<int64_t>(u) * Wr + v] = static_cast<S>(z.imag());
      }
  }

  auto xn = x.node();
  return TensorT<S>(detail::make_result<S>(
      {2 * C, H, Wr}, std::move(out), {xn}, [xn, C, H, W, Wr](TensorNode<S>& self) {
        xn->ensure_grad();
        const int64_t plane = static_cast<int64_t>(H) * W;
        const int64_t rplane = static_cast<int64_t>(H) * Wr;
        std::vector<cd> buf(plane);
        for (int c = 0; c < C; ++c) {
          std::fill(buf.begin(), buf.end(), cd(0.0, 0.0));
          const S* gre = self.grad.data() + static_cast<int64_t>(c) * rplane;
          const S* gim = self.grad.data() + static_cast<int64_t>(C + c) * rplane;
          for (int u = 0; u < H; ++u)
            for (int v = 0; v < Wr; ++v)
              buf[static_cast<int64_t>(u) * W + v] =
                  cd(static_cast<double>(gre[static_cast<int64_t>(u) * Wr + v]),
                     static_cast<double>(gim[static_cast<int64_t>(u) * Wr + v]));
          fft_detail::fft_2d(buf.data(), H, W, +1);
          S* gx = xn->grad.data() + c * plane;
          for (int64_t i = 0; i < plane; ++i) gx[i] += static_cast<S>(buf[i].real());
        }
      }));
}

// Inverse of rfft2_stacked: [2C,H,W/2+1] stacked re/im channels -> [C,H,W]
// real image, scaled by 1/(H*W). Columns without a distinct mirror (v=0 and,
// for even W, v=W/2) are used exactly as given; the rest of the spectrum is
// the conjugate mirror of the input, matching the usual irfft semantics.
template <typename S>
TensorT<S> irfft2_stacked(const TensorT<S>& y, int W) {
  using fft_detail::cd;
  if (y.rank() != 3 || y.dim(0) % 2 != 0)
    throw shape_error("irfft2: input must be [2C,H,Wr], got " + shape_str(y.shape()));
  const int C = y.dim(0) / 2, H = y.dim(1), Wr = y.dim(2);
  if (W < 2 || rfft_width(W) != Wr)
    throw shape_error("irfft2: output width " + std::to_string(W) +
                      " inconsistent with half-spectrum width " + std::to_string(Wr));
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t rplane = static_cast<int64_t>(H) * Wr;
  const double inv_hw = 1.0 / (static_cast<double>(H) * W);

  std::vector<S> out(static_cast<int64_t>(C) * plane);
  std::vector<cd> buf(plane);
  for (int c = 0; c < C; ++c) {
    const S* yre = y.data().data() + static_cast<int64_t>(c) * rplane;
    const S* yim = y.data().data() + static_cast<int64_t>(C + c) * rplane;
    for (int u = 0; u < H; ++u) {
      for (int v = 0; v < Wr; ++v)
        buf[static_cast<int64_t>(u) * W + v] =
            cd(static_cast<double>(yre[static_cast<int64_t>(u) * Wr + v]),
               static_cast<double>(yim[static_cast<int64_t>(u) * Wr + v]));
      for (int v = Wr; v < W; ++v) {
        const int mu = (H - u) % H, mv = W - v;
        buf[static_cast<int64_t>(u) * W + v] =
            std::conj(cd(static_cast<double>(yre[static_cast<int64_t>(mu) * Wr + mv]),
                         static_cast<double>(yim[static_cast<int64_t>(mu) * Wr + mv])));
      }
    }
    fft_detail::fft_2d(buf.data(), H, W, +1);
    S* oc = out.data() + c * plane;
    for (int64_t i = 0; i < plane; ++i) oc[i] = static_cast<S>(buf[i].real() * inv_hw);
  }

  auto yn = y.node();
  return TensorT<S>(detail::make_result<S>(
      {C, H, W}, std::move(out), {yn},
      [yn, C, H, W, Wr, inv_hw](TensorNode<S>& self) {
        yn->ensure_grad();
        const int64_t plane = static_cast<int64_t>(H) * W;
        const int64_t rplane = static_cast<int64_t>(H) * Wr;
        std::vector<cd> buf(plane);
        for (int c = 0; c < C; ++c) {
          const S* g = self.grad.data() + c * plane;
          for (int64_t i = 0; i < plane; ++i)
            buf[i] = cd(static_cast<double>(g[i]), 0.0);
          fft_detail::fft_2d(buf.data(), H, W, -1);
          S* gre = yn->grad.data() + static_cast<int64_t>(c) * rplane;
          S* gim = yn->grad.data() + static_cast<int64_t>(C + c) * rplane;
          for (int u = 0; u < H; ++u) {
            for (int v = 0; v < Wr; ++v) {
              const cd z = buf[static_cast<int64_t>(u) * W + v] * inv_hw;
              const int mv = (W - v) % W;
              const int64_t idx = static_cast<int64_t>(u) * Wr + v;
              if (mv == v) {
                gre[idx] += static_cast<S>(z.real());
                gim[idx] += static_cast<S>(z.imag());
              } else {
                const cd zm = buf[static_cast<int64_t>((H - u) % H) * W + mv] * inv_hw;
                gre[idx] += static_cast<S>(z.real() + zm.real());
                gim[idx] += static_cast<S>(z.imag() - zm.imag());
              }
            }
          }
        }
      }));
}

// Complex half-spectrum as a re/im tensor pair.
template <typename S>
struct ComplexTensorT {
  TensorT<S> re, im;
};
using ComplexTensor = ComplexTensorT<float>;

template <typename S>
ComplexTensorT<S> rfft2(const TensorT<S>& x) {
  TensorT<S> stacked = rfft2_stacked(x);
  auto [re, im] = split_channels(stacked, x.dim(0));
  return {re, im};
}

template <typename S>
TensorT<S> irfft2(const ComplexTensorT<S>& f, int W) {
  if (!f.re.same_shape(f.im))
    throw shape_error("irfft2: re/im shape mismatch " + shape_str(f.re.shape()) +
                      " vs " + shape_str(f.im.shape()));
  return irfft2_stacked(concat_channels(f.re, f.im), W);
}

}  // namespace nuc
