#pragma once

#include <array>
#include <cassert>
#include <functional>
#include <string>
#include <vector>

#include "nuc/conv.hpp"
#include "nuc/fft.hpp"
#include "nuc/pool.hpp"
#include "nuc/tensor.hpp"

namespace nuc {

// Architecture switches. The ablation variants map onto the flags:
//   full: sdgw+fbgw+pe, v1: none, v2: fbgw+pe, v3: sdgw only,
//   v4: sdgw + channel-attention substitute, v5: sdgw+fbgw (no pe).
struct ArchConfig {
  int n = 8;  // enhancement block count
  int C = 64; // feature channels (split C/2 + C/2 inside blocks)
  int r = 4;  // classification-chain reduction ratio
  bool sdgw_enabled = true;
  bool fbgw_enabled = true;
  bool position_embedding_enabled = true;
  bool channel_attention_substitute = false;

  static ArchConfig variant(const std::string& name, int n, int C, int r);
};

inline void validate_arch(const ArchConfig& a) {
  if (a.n < 1) throw config_error("arch: block count must be >= 1");
  if (a.C < 2 || a.C % 2 != 0)
    throw config_error("arch: channel count must be even and >= 2, got " +
                       std::to_string(a.C));
  const int cb = a.C / 2;
  if (a.r < 1 || cb % a.r != 0)
    throw config_error("arch: reduction ratio " + std::to_string(a.r) +
                       " must divide branch width " + std::to_string(cb));
  if (a.channel_attention_substitute && !a.fbgw_enabled)
    throw config_error("arch: channel-attention substitute replaces an enabled FBGW");
}

inline ArchConfig ArchConfig::variant(const std::string& name, int n, int C, int r) {
  ArchConfig a;
  a.n = n;
  a.C = C;
  a.r = r;
  if (name == "full") {
  } else if (name == "v1") {
    a.sdgw_enabled = a.fbgw_enabled = a.position_embedding_enabled = false;
  } else if (name == "v2") {
    a.sdgw_enabled = false;
  } else if (name == "v3") {
    a.fbgw_enabled = a.position_embedding_enabled = false;
  } else if (name == "v4") {
    a.channel_attention_substitute = true;
    a.position_embedding_enabled = false;
  } else if (name == "v5") {
    a.position_embedding_enabled = false;
  } else {
    throw config_error("unknown arch variant '" + name + "'");
  }
  validate_arch(a);
  return a;
}

template <typename S>
struct ConvParamT {
  TensorT<S> kernel;  // [Cout,Cin,k,k]
  TensorT<S> bias;    // [Cout]
  bool defined() const { return kernel.defined(); }
};

template <typename S>
struct SdgwParamsT {
  ConvParamT<S> feat_conv;    // 3x3, C/2 -> C/2
  ConvParamT<S> weight_conv;  // 1x1 on the windowed-SD map
};

template <typename S>
struct ClsChainT {
  ConvParamT<S> conv1;  // 1x1, Cb -> Cb/r
  ConvParamT<S> conv2;  // 1x1, Cb/r -> Cb
};

template <typename S>
struct FbgwParamsT {
  ConvParamT<S> decouple_conv;  // 1x1, 2Cb(+2) -> Cb; absent in CA mode
  ClsChainT<S> cls_avg, cls_max;
  ConvParamT<S> recouple_conv;  // 1x1, Cb -> 2Cb; absent in CA mode
};

template <typename S>
struct BlockParamsT {
  std::array<SdgwParamsT<S>, 2> sdgw;
  std::array<FbgwParamsT<S>, 2> fbgw;
  ConvParamT<S> fuse_conv;  // 3x3, C -> C
};

template <typename S>
struct ModelParamsT {
  ArchConfig arch;
  ConvParamT<S> head_conv;  // 3x3, 1 -> C
  std::vector<BlockParamsT<S>> blocks;
  ConvParamT<S> tail_conv;  // 3x3, C -> 1
};

using ModelParams = ModelParamsT<float>;

// Visits every parameter tensor in a fixed order with its dotted path name.
template <typename S, typename Fn>
void for_each_param(ModelParamsT<S>& m, Fn&& fn) {
  auto conv = [&](const std::string& prefix, ConvParamT<S>& c) {
    if (!c.defined()) return;
    fn(prefix + ".kernel", c.kernel);
    fn(prefix + ".bias", c.bias);
  };
  conv("head_conv", m.head_conv);
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    const std::string b = "blocks." + std::to_string(i);
    auto& blk = m.blocks[i];
    for (int j = 0; j < 2; ++j) {
      const std::string s = b + ".sdgw." + std::to_string(j);
      conv(s + ".feat_conv", blk.sdgw[j].feat_conv);
      conv(s + ".weight_conv", blk.sdgw[j].weight_conv);
    }
    for (int j = 0; j < 2; ++j) {
      const std::string f = b + ".fbgw." + std::to_string(j);
      conv(f + ".decouple_conv", blk.fbgw[j].decouple_conv);
      conv(f + ".cls_avg.conv1", blk.fbgw[j].cls_avg.conv1);
      conv(f + ".cls_avg.conv2", blk.fbgw[j].cls_avg.conv2);
      conv(f + ".cls_max.conv1", blk.fbgw[j].cls_max.conv1);
      conv(f + ".cls_max.conv2", blk.fbgw[j].cls_max.conv2);
      conv(f + ".recouple_conv", blk.fbgw[j].recouple_conv);
    }
    conv(b + ".fuse_conv", blk.fuse_conv);
  }
  conv("tail_conv", m.tail_conv);
}

template <typename S>
int64_t param_count(ModelParamsT<S>& m) {
  int64_t n = 0;
  for_each_param(m, [&](const std::string&, TensorT<S>& t) { n += t.numel(); });
  return n;
}

// Kernels drawn uniform on [-b, b] with b = sqrt(1/fan_in), biases zero.
// One RNG stream consumed in parameter-visitation order, so a seed pins
// every buffer bit-exactly.
template <typename S = float>
ModelParamsT<S> init_model(const ArchConfig& arch, uint64_t seed) {
  validate_arch(arch);
  const int C = arch.C, cb = C / 2;

  auto make_conv = [](int cout, int cin, int k) {
    ConvParamT<S> c;
    c.kernel = TensorT<S>::param({cout, cin, k, k},
                                 std::vector<S>(static_cast<size_t>(cout) * cin * k * k));
    c.bias = TensorT<S>::param({cout}, std::vector<S>(cout));
    return c;
  };

  ModelParamsT<S> m;
  m.arch = arch;
  m.head_conv = make_conv(C, 1, 3);
  m.blocks.resize(arch.n);
  const int dec_in = 2 * cb + (arch.position_embedding_enabled ? 2 : 0);
  for (auto& blk : m.blocks) {
    for (int j = 0; j < 2; ++j) {
      blk.sdgw[j].feat_conv = make_conv(cb, cb, 3);
      blk.sdgw[j].weight_conv = make_conv(cb, cb, 1);
    }
    for (int j = 0; j < 2; ++j) {
      if (!arch.channel_attention_substitute) {
        blk.fbgw[j].decouple_conv = make_conv(cb, dec_in, 1);
        blk.fbgw[j].recouple_conv = make_conv(2 * cb, cb, 1);
      }
      blk.fbgw[j].cls_avg.conv1 = make_conv(cb / arch.r, cb, 1);
      blk.fbgw[j].cls_avg.conv2 = make_conv(cb, cb / arch.r, 1);
      blk.fbgw[j].cls_max.conv1 = make_conv(cb / arch.r, cb, 1);
      blk.fbgw[j].cls_max.conv2 = make_conv(cb, cb / arch.r, 1);
    }
    blk.fuse_conv = make_conv(C, C, 3);
  }
  m.tail_conv = make_conv(1, C, 3);

  Rng rng(seed);
  for_each_param(m, [&](const std::string& name, TensorT<S>& t) {
    if (name.size() >= 7 && name.compare(name.size() - 7, 7, ".kernel") == 0) {
      const auto& shp = t.shape();
      const double fan_in = static_cast<double>(shp[1]) * shp[2] * shp[3];
      const double b = std::sqrt(1.0 / fan_in);
      for (auto& v : t.data_mut()) v = static_cast<S>(rng.uniform(-b, b));
    }
  });
  return m;
}

// Forward pieces -------------------------------------------------------

// Windowed standard deviation: sqrt(E[X^2] - E[X]^2 + 1e-5) over mirror-padded
// 3x3 windows, per channel. Fused single op: the whole window statistic is
// carried in double and rounded once, which keeps constant inputs at exactly
// sqrt(1e-5) and avoids the 1/(2*sd) error blow-up of low-variance windows.
// The variance is floored at zero (subgradient 0 there) before adding eps.
template <typename S>
TensorT<S> local_sd(const TensorT<S>& feature) {
  if (feature.rank() != 3)
    throw shape_error("local_sd: input must be [C,H,W], got " +
                      shape_str(feature.shape()));
  const int C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
  if (H < 2 || W < 2)
    throw shape_error("local_sd: mirror padding needs H,W >= 2, got " +
                      shape_str(feature.shape()));
  constexpr double kEps = 1e-5;
  const int Wp = W + 2;
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t pplane = static_cast<int64_t>(H + 2) * Wp;

  std::vector<S> out(feature.numel());
  std::vector<S> padded(pplane);
  for (int c = 0; c < C; ++c) {
    detail::pad1_channel(feature.data().data() + c * plane, H, W, true, padded.data());
    for (int y = 0; y < H; ++y) {
      S* orow = out.data() + c * plane + static_cast<int64_t>(y) * W;
      for (int x = 0; x < W; ++x) {
        double s = 0.0, s2 = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          const S* prow = padded.data() + static_cast<int64_t>(y + ky) * Wp + x;
          for (int kx = 0; kx < 3; ++kx) {
            const double v = static_cast<double>(prow[kx]);
            s += v;
            s2 += v * v;
          }
        }
        const double mean = s / 9.0;
        const double var = std::max(0.0, s2 / 9.0 - mean * mean);
        orow[x] = static_cast<S>(std::sqrt(var + kEps));
      }
    }
  }

  auto xn = feature.node();
  return TensorT<S>(detail::make_result<S>(
      feature.shape(), std::move(out), {xn}, [xn, C, H, W](TensorNode<S>& self) {
        xn->ensure_grad();
        const int Wp = W + 2;
        const int64_t plane = static_cast<int64_t>(H) * W;
        const int64_t pplane = static_cast<int64_t>(H + 2) * Wp;
        std::vector<S> padded(pplane);
        std::vector<double> g1(pplane), g2(pplane);
        for (int c = 0; c < C; ++c) {
          detail::pad1_channel(xn->value.data() + c * plane, H, W, true, padded.data());
          std::fill(g1.begin(), g1.end(), 0.0);
          std::fill(g2.begin(), g2.end(), 0.0);
          const S* g = self.grad.data() + c * plane;
          for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
              double s = 0.0, s2 = 0.0;
              for (int ky = 0; ky < 3; ++ky) {
                const S* prow = padded.data() + static_cast<int64_t>(y + ky) * Wp + x;
                for (int kx = 0; kx < 3; ++kx) {
                  const double v = static_cast<double>(prow[kx]);
                  s += v;
                  s2 += v * v;
                }
              }
              const double mean = s / 9.0;
              const double var = s2 / 9.0 - mean * mean;
              if (var <= 0.0) continue;  // clamped: zero subgradient
              const double sd = std::sqrt(var + kEps);
              const double gw = static_cast<double>(g[static_cast<int64_t>(y) * W + x]);
              // d sd/d e2 = 1/(2 sd), d sd/d mean = -mean/sd; both spread
              // uniformly over the 9 window taps.
              const double t2 = gw / (2.0 * sd) / 9.0;
              const double t1 = -gw * mean / sd / 9.0;
              for (int ky = 0; ky < 3; ++ky) {
                double* r1 = g1.data() + static_cast<int64_t>(y + ky) * Wp + x;
                double* r2 = g2.data() + static_cast<int64_t>(y + ky) * Wp + x;
                for (int kx = 0; kx < 3; ++kx) {
                  r1[kx] += t1;
                  r2[kx] += t2;
                }
              }
            }
          }
          // gx = fold(g1) + 2x .* fold(g2); the padded value at p equals the
          // source value it folds onto, so multiplying after folding is exact.
          std::vector<double> f1(plane, 0.0), f2(plane, 0.0);
          // Reuse the mirror fold through a temporary S buffer would lose
          // precision; fold in double here.
          auto fold = [&](const std::vector<double>& gp, std::vector<double>& dst) {
            for (int py = 0; py < H + 2; ++py) {
              const int sy = detail::reflect101(py - 1, H);
              const double* grow = gp.data() + static_cast<int64_t>(py) * Wp;
              double* drow = dst.data() + static_cast<int64_t>(sy) * W;
              drow[1] += grow[0];
              for (int x = 0; x < W; ++x) drow[x] += grow[x + 1];
              drow[W - 2] += grow[W + 1];
            }
          };
          fold(g1, f1);
          fold(g2, f2);
          const S* xc = xn->value.data() + c * plane;
          S* gx = xn->grad.data() + c * plane;
          for (int64_t i = 0; i < plane; ++i)
            gx[i] += static_cast<S>(f1[i] + 2.0 * static_cast<double>(xc[i]) * f2[i]);
        }
      }));
}

namespace detail {

template <typename S>
void assert_range(const TensorT<S>& t, double lo, double hi) {
#ifndef NDEBUG
  for (S v : t.data()) {
    assert(static_cast<double>(v) >= lo && static_cast<double>(v) <= hi);
    (void)v;
  }
#endif
  (void)t;
  (void)lo;
  (void)hi;
}

}  // namespace detail

template <typename S>
TensorT<S> sdgw_forward(const TensorT<S>& feature, const SdgwParamsT<S>& p,
                        bool gated = true) {
  TensorT<S> feat = conv2d(feature, p.feat_conv.kernel, p.feat_conv.bias, Pad::zero1);
  if (!gated) return feat;
  TensorT<S> gate = sigmoid(
      conv2d(local_sd(feature), p.weight_conv.kernel, p.weight_conv.bias, Pad::none));
  detail::assert_range(gate, 0.0, 1.0);
  return mul(feat, gate);
}

// Normalized grid coordinates over the half-spectrum, two channels in [0,1].
template <typename S>
TensorT<S> position_embedding(int H, int Wr) {
  std::vector<S> data(static_cast<size_t>(2) * H * Wr);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < Wr; ++v) {
      data[static_cast<size_t>(u) * Wr + v] =
          static_cast<S>(static_cast<double>(u) / (H - 1));
      data[static_cast<size_t>(H) * Wr + u * Wr + v] =
          static_cast<S>(static_cast<double>(v) / (Wr - 1));
    }
  return TensorT<S>::from_data({2, H, Wr}, std::move(data));
}

template <typename S>
TensorT<S> cls_chain(const TensorT<S>& f, const ClsChainT<S>& c, PoolMode mode) {
  TensorT<S> pooled = global_pool(f, mode);
  TensorT<S> hidden = relu(conv2d(pooled, c.conv1.kernel, c.conv1.bias, Pad::none));
  return conv2d(hidden, c.conv2.kernel, c.conv2.bias, Pad::none);
}

// Dual-pooled per-channel weights in [0,2]: sigmoid(avg chain) + sigmoid(max chain).
template <typename S>
TensorT<S> band_weights(const TensorT<S>& f, const FbgwParamsT<S>& p) {
  TensorT<S> w = add(sigmoid(cls_chain(f, p.cls_avg, PoolMode::avg)),
                     sigmoid(cls_chain(f, p.cls_max, PoolMode::max)));
  detail::assert_range(w, 0.0, 2.0);
  return w;
}

// Frequency band-guided weighting. Pipeline: rfft -> stack re/im (+ position
// channels) -> 1x1 decouple -> per-channel [0,2] weights from dual-pooled
// classification chains -> 1x1 recouple -> irfft. With the channel-attention
// substitute the weights gate the spatial feature directly (no FFT, no
// position embedding). `w_out`, when given, receives the weight vector.
template <typename S>
TensorT<S> fbgw_forward(const TensorT<S>& feature, const FbgwParamsT<S>& p,
                        const ArchConfig& arch, TensorT<S>* w_out = nullptr) {
  if (feature.rank() != 3)
    throw shape_error("fbgw: feature must be [Cb,H,W], got " + shape_str(feature.shape()));
  const int H = feature.dim(1), W = feature.dim(2);
  if (H < 2 || W < 2)
    throw shape_error("fbgw: H,W >= 2 required, got " + shape_str(feature.shape()));

  if (arch.channel_attention_substitute) {
    TensorT<S> w = band_weights(feature, p);
    if (w_out) *w_out = w;
    return mul_channels(feature, w);
  }

  TensorT<S> spec = rfft2_stacked(feature);
  if (arch.position_embedding_enabled)
    spec = concat_channels(spec, position_embedding<S>(H, rfft_width(W)));
  TensorT<S> bands =
      conv2d(spec, p.decouple_conv.kernel, p.decouple_conv.bias, Pad::none);
  if (arch.fbgw_enabled) {
    TensorT<S> w = band_weights(bands, p);
    if (w_out) *w_out = w;
    bands = mul_channels(bands, w);
  }
  TensorT<S> recoupled =
      conv2d(bands, p.recouple_conv.kernel, p.recouple_conv.bias, Pad::none);
  return irfft2_stacked(recoupled, W);
}

// One spatial-frequency enhancement block: split channels in half, enhance
// each branch twice, concatenate, fuse with a 3x3 conv, add the block input.
template <typename S>
TensorT<S> sfe_block_forward(const TensorT<S>& feature, const BlockParamsT<S>& p,
                             const ArchConfig& arch) {
  if (feature.dim(0) % 2 != 0)
    throw config_error("sfe block: channel count must be even, got " +
                       std::to_string(feature.dim(0)));
  auto [spatial, freq] = split_channels(feature, feature.dim(0) / 2);
  TensorT<S> s = sdgw_forward(spatial, p.sdgw[0], arch.sdgw_enabled);
  s = sdgw_forward(s, p.sdgw[1], arch.sdgw_enabled);
  TensorT<S> f = fbgw_forward(freq, p.fbgw[0], arch);
  f = fbgw_forward(f, p.fbgw[1], arch);
  TensorT<S> fused =
      conv2d(concat_channels(s, f), p.fuse_conv.kernel, p.fuse_conv.bias, Pad::zero1);
  return add(fused, feature);
}

// Full model: shallow 3x3 head, n enhancement blocks, 3x3 tail.
template <typename S>
TensorT<S> scgn_forward(const TensorT<S>& image, const ModelParamsT<S>& m) {
  if (image.rank() != 3 || image.dim(0) != 1)
    throw shape_error("scgn: input must be [1,H,W], got " + shape_str(image.shape()));
  TensorT<S> h = conv2d(image, m.head_conv.kernel, m.head_conv.bias, Pad::zero1);
  for (const auto& blk : m.blocks) h = sfe_block_forward(h, blk, m.arch);
  return conv2d(h, m.tail_conv.kernel, m.tail_conv.bias, Pad::zero1);
}

// Precision conversion for the f64 shadow path.
template <typename To, typename From>
ModelParamsT<To> cast_params(const ModelParamsT<From>& m) {
  ModelParamsT<To> out;
  out.arch = m.arch;
  auto cc = [](const ConvParamT<From>& c) {
    ConvParamT<To> r;
    if (c.defined()) {
      r.kernel = cast<To>(c.kernel);
      r.bias = cast<To>(c.bias);
    }
    return r;
  };
  out.head_conv = cc(m.head_conv);
  out.blocks.resize(m.blocks.size());
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    for (int j = 0; j < 2; ++j) {
      out.blocks[i].sdgw[j].feat_conv = cc(m.blocks[i].sdgw[j].feat_conv);
      out.blocks[i].sdgw[j].weight_conv = cc(m.blocks[i].sdgw[j].weight_conv);
      out.blocks[i].fbgw[j].decouple_conv = cc(m.blocks[i].fbgw[j].decouple_conv);
      out.blocks[i].fbgw[j].cls_avg.conv1 = cc(m.blocks[i].fbgw[j].cls_avg.conv1);
      out.blocks[i].fbgw[j].cls_avg.conv2 = cc(m.blocks[i].fbgw[j].cls_avg.conv2);
      out.blocks[i].fbgw[j].cls_max.conv1 = cc(m.blocks[i].fbgw[j].cls_max.conv1);
      out.blocks[i].fbgw[j].cls_max.conv2 = cc(m.blocks[i].fbgw[j].cls_max.conv2);
      out.blocks[i].fbgw[j].recouple_conv = cc(m.blocks[i].fbgw[j].recouple_conv);
    }
    out.blocks[i].fuse_conv = cc(m.blocks[i].fuse_conv);
  }
  out.tail_conv = cc(m.tail_conv);
  return out;
}

// Deep copy with fresh nodes (per-sample parameter clones for parallel
// training keep gradient accumulation race-free).
template <typename S>
ModelParamsT<S> clone_params(const ModelParamsT<S>& m) {
  return cast_params<S, S>(m);
}

}  // namespace nuc
