// Acceptance suite: one numbered criterion per function, each printing a
// single PASS/FAIL line with the measured values. Select criteria with
// --criteria 1,2,4; default runs everything. Exit code = failure count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nuc/checkpoint.hpp"
#include "nuc/cli.hpp"
#include "nuc/datagen.hpp"
#include "nuc/fft.hpp"
#include "nuc/metrics.hpp"
#include "nuc/noisemodel.hpp"
#include "nuc/scgn.hpp"
#include "nuc/tensor_io.hpp"
#include "nuc/trainer.hpp"

namespace fs = std::filesystem;
using namespace nuc;

namespace {

using DTensor = TensorT<double>;

const char* kTmp = "acceptance_tmp";

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int criterion, bool pass, const std::string& detail, double seconds) {
  std::printf("criterion %2d: %s  %s  (%.1fs)\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
}

DTensor random_dtensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                       double hi = 1.0, bool tracked = true) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return tracked ? DTensor::param(std::move(shape), std::move(data))
                 : DTensor::from_data(std::move(shape), std::move(data));
}

DTensor random_offzero(std::vector<int> shape, Rng& rng, double min_mag = 0.05) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) {
    const double mag = min_mag + rng.uniform();
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return DTensor::param(std::move(shape), std::move(data));
}

// Central differences at step h resolve gradients only to ~h^2 * f'''
// absolute, so elements far below a tensor's gradient scale cannot be
// ratio-compared; the denominator is floored at 2% of that tensor's max
// gradient magnitude. A wrong backward formula errs at the gradient scale
// and still trips the check.
template <typename LossFn>
double max_fd_rel_err(std::vector<DTensor*> wrt, LossFn&& loss_fn, double h = 1e-3,
                      double tau = 1e-6) {
  for (auto* t : wrt) t->zero_grad();
  DTensor loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> grads;
  for (auto* t : wrt)
    grads.push_back(t->has_grad() ? t->grad() : std::vector<double>(t->numel(), 0.0));
  double max_rel = 0.0;
  for (size_t k = 0; k < wrt.size(); ++k) {
    double gmax = 0.0;
    for (double g : grads[k]) gmax = std::max(gmax, std::abs(g));
    const double floor = std::max(tau, 0.02 * gmax);
    auto& data = wrt[k]->data_mut();
    for (size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double lp = loss_fn().item();
      data[i] = orig - h;
      const double lm = loss_fn().item();
      data[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = grads[k][i];
      const double denom = std::max({std::abs(fd), std::abs(g), floor});
      max_rel = std::max(max_rel, std::abs(fd - g) / denom);
    }
  }
  for (auto* t : wrt) t->zero_grad();
  return max_rel;
}

DTensor project(const DTensor& out, const DTensor& w) {
  return sum_all(mul(out, w));
}

// Near-constant windows put the windowed SD at its eps floor where the
// curvature of sqrt explodes and a 1e-3 central difference stops being a
// trustworthy oracle. Draw until every window has some spread.
DTensor sd_friendly_input(std::vector<int> shape, Rng& rng) {
  for (;;) {
    DTensor x = random_dtensor(shape, rng, 0.0, 1.0);
    DTensor probe = DTensor::from_data(x.shape(), x.data());
    DTensor sd = local_sd(probe);
    double min_var = 1e300;
    for (double v : sd.data()) min_var = std::min(min_var, v * v - 1e-5);
    if (min_var >= 0.02) return x;
  }
}

// ---- criterion 1: gradient correctness ------------------------------

bool criterion1(double& worst) {
  worst = 0.0;
  Rng rng(1001);
  auto track = [&](double err) { worst = std::max(worst, err); };

  for (int inst = 0; inst < 20; ++inst) {
    // Elementwise, reductions, channel ops.
    {
      DTensor a = random_dtensor({2, 4, 4}, rng);
      DTensor b = random_dtensor({2, 4, 4}, rng);
      DTensor w = random_dtensor({2, 4, 4}, rng, -1, 1, false);
      track(max_fd_rel_err({&a, &b}, [&]() { return project(add(a, b), w); }));
      track(max_fd_rel_err({&a, &b}, [&]() { return project(sub(a, b), w); }));
      track(max_fd_rel_err({&a, &b}, [&]() { return project(mul(a, b), w); }));
      track(max_fd_rel_err({&a}, [&]() {
        return project(add_scalar(mul_scalar(a, -1.3), 0.4), w);
      }));
      track(max_fd_rel_err({&a}, [&]() { return project(square(a), w); }));
      track(max_fd_rel_err({&a}, [&]() { return project(sigmoid(a), w); }));
      track(max_fd_rel_err({&a}, [&]() { return sum_all(mul(a, b)); }));
      track(max_fd_rel_err({&a}, [&]() { return mean_all(square(a)); }));

      DTensor cw = random_dtensor({2, 1, 1}, rng);
      track(max_fd_rel_err({&a, &cw}, [&]() { return project(mul_channels(a, cw), w); }));
      track(max_fd_rel_err({&a, &b}, [&]() {
        auto [lo, hi] = split_channels(a, 1);
        return project(concat_channels(hi, lo), w);
      }));
    }
    // Kinked ops away from their kinks; sqrt on positive inputs.
    {
      DTensor pos = random_dtensor({2, 3, 3}, rng, 0.2, 2.0);
      DTensor off = random_offzero({2, 3, 3}, rng, 0.1);
      DTensor w = random_dtensor({2, 3, 3}, rng, -1, 1, false);
      track(max_fd_rel_err({&pos}, [&]() { return project(nuc::sqrt(pos), w); }));
      track(max_fd_rel_err({&off}, [&]() { return project(relu(off), w); }));
      track(max_fd_rel_err({&off}, [&]() { return project(nuc::abs(off), w); }));
      track(max_fd_rel_err({&off}, [&]() {
        DTensor t = DTensor::from_data(off.shape(), std::vector<double>(off.numel(), 0.0));
        return l1_loss(off, t);
      }));
    }
    // Convolutions and pooling.
    {
      DTensor x = random_dtensor({2, 4, 5}, rng);
      DTensor k3 = random_dtensor({2, 2, 3, 3}, rng);
      DTensor k1 = random_dtensor({3, 2, 1, 1}, rng);
      DTensor b3 = random_dtensor({2}, rng);
      DTensor b1 = random_dtensor({3}, rng);
      DTensor w = random_dtensor({2, 4, 5}, rng, -1, 1, false);
      DTensor w1 = random_dtensor({3, 4, 5}, rng, -1, 1, false);
      DTensor wp = random_dtensor({2, 1, 1}, rng, -1, 1, false);
      track(max_fd_rel_err({&x, &k3, &b3},
                           [&]() { return project(conv2d(x, k3, b3, Pad::zero1), w); }));
      track(max_fd_rel_err({&x, &k3, &b3},
                           [&]() { return project(conv2d(x, k3, b3, Pad::mirror1), w); }));
      track(max_fd_rel_err({&x, &k1, &b1},
                           [&]() { return project(conv2d(x, k1, b1, Pad::none), w1); }));
      track(max_fd_rel_err({&x}, [&]() { return project(window_mean3x3(x), w); }));
      track(max_fd_rel_err({&x}, [&]() {
        return project(global_pool(x, PoolMode::avg), wp);
      }));
      {
        DTensor xs = sd_friendly_input({2, 4, 5}, rng);
        track(max_fd_rel_err({&xs}, [&]() { return project(local_sd(xs), w); }));
      }
      {
        // Spread the values so the FD step cannot flip the argmax.
        std::vector<double> vals(2 * 4 * 5);
        for (size_t i = 0; i < vals.size(); ++i)
          vals[i] = static_cast<double>(i) * 0.05 + rng.uniform(0.0, 0.02);
        for (int i = static_cast<int>(vals.size()) - 1; i > 0; --i)
          std::swap(vals[i], vals[rng.uniform_int(i + 1)]);
        DTensor xm = DTensor::param({2, 4, 5}, vals);
        track(max_fd_rel_err({&xm}, [&]() {
          return project(global_pool(xm, PoolMode::max), wp);
        }));
      }
    }
    // The FFT pair.
    {
      const int H = 4 + (inst % 3) * 2, W = 6;
      DTensor x = random_dtensor({2, H, W}, rng);
      DTensor ws = random_dtensor({4, H, rfft_width(W)}, rng, -1, 1, false);
      DTensor wi = random_dtensor({2, H, W}, rng, -1, 1, false);
      track(max_fd_rel_err({&x}, [&]() { return project(rfft2_stacked(x), ws); }));
      DTensor y = random_dtensor({4, H, rfft_width(W)}, rng);
      track(max_fd_rel_err({&y}, [&]() { return project(irfft2_stacked(y, W), wi); }));
    }
    // Tiny full model: n=1, C=4, 8x8, every parameter checked. Central
    // differences require a locally smooth evaluation point, so instances
    // are drawn with margins around every kink: the target sits far from the
    // predictions (L1 ties), classification relu pre-activations stay away
    // from zero (a dead relu has an exact-zero gradient the FD step can
    // wake), max-pool top-2 gaps cannot flip within the step, and windowed
    // variances stay off the sqrt eps floor. Kink subgradients themselves
    // are covered by the standalone relu/abs/max checks above.
    {
      ArchConfig arch;
      arch.n = 1;
      arch.C = 4;
      arch.r = 2;
      ModelParamsT<double> dm;
      DTensor x;
      bool found = false;
      for (uint64_t retry = 0; retry < 64 && !found; ++retry) {
        dm = cast_params<double>(init_model(arch, 2000 + inst + 100000 * retry));
        x = random_dtensor({1, 8, 8}, rng, 0.0, 1.0);

        double min_relu = 1e300, min_gap = 1e300;
        auto run_fbgw = [&](const DTensor& fin, const FbgwParamsT<double>& q) {
          DTensor spec = concat_channels(rfft2_stacked(fin),
                                         position_embedding<double>(8, rfft_width(8)));
          DTensor dec = conv2d(spec, q.decouple_conv.kernel, q.decouple_conv.bias,
                               Pad::none);
          for (PoolMode mode : {PoolMode::avg, PoolMode::max}) {
            const auto& chain = mode == PoolMode::avg ? q.cls_avg : q.cls_max;
            DTensor z = conv2d(global_pool(dec, mode), chain.conv1.kernel,
                               chain.conv1.bias, Pad::none);
            for (double zv : z.data()) min_relu = std::min(min_relu, std::abs(zv));
          }
          const int64_t plane = static_cast<int64_t>(dec.dim(1)) * dec.dim(2);
          for (int c = 0; c < dec.dim(0); ++c) {
            double top1 = -1e300, top2 = -1e300;
            for (int64_t i = 0; i < plane; ++i) {
              const double v = dec.data()[c * plane + i];
              if (v > top1) {
                top2 = top1;
                top1 = v;
              } else if (v > top2) {
                top2 = v;
              }
            }
            min_gap = std::min(min_gap, top1 - top2);
          }
          return fbgw_forward(fin, q, arch);
        };

        DTensor h =
            conv2d(x, dm.head_conv.kernel, dm.head_conv.bias, Pad::zero1);
        auto [sp, fr] = split_channels(h, 2);
        (void)sp;
        DTensor f1 = run_fbgw(fr, dm.blocks[0].fbgw[0]);
        run_fbgw(f1, dm.blocks[0].fbgw[1]);
        found = min_relu >= 0.05 && min_gap >= 0.02;
      }
      if (!found) return false;

      DTensor target = random_dtensor({1, 8, 8}, rng, 2.0, 3.0, false);
      std::vector<DTensor*> wrt{&x};
      for_each_param(dm, [&](const std::string&, DTensor& t) { wrt.push_back(&t); });
      track(max_fd_rel_err(wrt, [&]() { return l1_loss(scgn_forward(x, dm), target); }));
    }
    if (worst >= 1e-4) return false;
  }
  return worst < 1e-4;
}

// ---- criterion 2: windowed standard deviation oracle -----------------

bool criterion2(double& worst_rnd, double& worst_const) {
  Rng rng(1002);
  worst_rnd = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<float> v(4 * 16 * 16);
    for (auto& e : v) e = static_cast<float>(rng.uniform(0, 1));
    Tensor x = Tensor::from_data({4, 16, 16}, v);
    Tensor sd = local_sd(x);

    const int C = 4, H = 16, W = 16;
    auto mirrored = [&](int c, int y, int xx) -> double {
      const int my = y < 0 ? -y : (y >= H ? 2 * H - 2 - y : y);
      const int mx = xx < 0 ? -xx : (xx >= W ? 2 * W - 2 - xx : xx);
      return x.at(c, my, mx);
    };
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          double s = 0.0, s2 = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const double e = mirrored(c, y + dy, xx + dx);
              s += e;
              s2 += e * e;
            }
          const double mean = s / 9.0;
          const double oracle = std::sqrt(std::max(0.0, s2 / 9.0 - mean * mean) + 1e-5);
          worst_rnd = std::max(worst_rnd,
                               std::abs(double(sd.at(c, y, xx)) - oracle));
        }
  }

  worst_const = 0.0;
  for (float c : {0.0f, 0.5f, 3.25f, 100.0f, 255.0f}) {
    Tensor sd = local_sd(Tensor::filled({1, 8, 8}, c));
    for (float v : sd.data())
      worst_const = std::max(worst_const, std::abs(double(v) - std::sqrt(1e-5)));
  }
  return worst_rnd < 1e-6 && worst_const < 1e-9;
}

// ---- criterion 3: noise calibration closed loop ----------------------

bool criterion3(std::string& detail) {
  const NoiseParams paper = NoiseParams::builtin_paper();
  const int threads = resolve_threads(0);

  auto check_recovery = [&](const NoiseParams& truth, int frames, int hw,
                            const std::vector<double>& intensities, uint64_t seed,
                            double& worst) {
    std::vector<VacuumSequence> seqs;
    for (size_t i = 0; i < intensities.size(); ++i)
      seqs.push_back(synth_vacuum(intensities[i], truth, frames, hw, hw,
                                  seed + 17 * i, threads));
    const NoiseParams fitted = calibrate(seqs);
    const double es = std::abs(fitted.slope - truth.slope) / truth.slope;
    const double ei = std::abs(fitted.intercept - truth.intercept) / truth.intercept;
    const double ec = std::abs(fitted.sigma_c - truth.sigma_c) / truth.sigma_c;
    worst = std::max({es, ei, ec});
    return worst < 0.05;
  };

  // Six intensities spanning a 2x range, 100 frames of 256^2, paper truth.
  std::vector<double> paper_intens;
  for (int i = 0; i < 6; ++i) paper_intens.push_back(100.0 * (1.0 + 0.2 * i));
  double worst_paper = 0.0;
  if (!check_recovery(paper, 100, 256, paper_intens, 42, worst_paper)) {
    detail = "paper-parameter recovery err " + std::to_string(worst_paper);
    return false;
  }

  // 20 random parameter draws. Tall frames keep the sigma_p^2/H leakage
  // subtracted from the column variance small next to sigma_c^2 = 0.04 at
  // the low end of the draw range; low intensities bound sigma_p itself.
  Rng rng(1003);
  double worst_draw = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    NoiseParams truth;
    truth.slope = rng.uniform(0.01, 0.1);
    truth.intercept = rng.uniform(0.5, 3.0);
    truth.sigma_c = rng.uniform(0.2, 2.0);
    std::vector<double> intens;
    for (int i = 0; i < 6; ++i) intens.push_back(rng.uniform(20, 30) * (1.0 + 0.2 * i));
    double worst = 0.0;
    if (!check_recovery(truth, 100, 256, intens, 5000 + draw * 31, worst)) {
      detail = "draw " + std::to_string(draw) + " recovery err " + std::to_string(worst);
      return false;
    }
    worst_draw = std::max(worst_draw, worst);
  }
  std::ostringstream os;
  os << "paper err " << worst_paper << ", worst draw err " << worst_draw;
  detail = os.str();
  return true;
}

// ---- criterion 4: weight-range invariants ----------------------------

bool criterion4(std::string& detail) {
  Rng rng(1004);
  ArchConfig arch;
  arch.n = 1;
  arch.C = 8;
  arch.r = 2;
  double min_gate = 1.0, max_gate = 0.0, min_w = 2.0, max_w = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    ModelParams m = init_model(arch, 3000 + rep);
    const int cb = arch.C / 2;
    std::vector<float> xv(static_cast<size_t>(cb) * 16 * 16);
    for (auto& v : xv) v = static_cast<float>(rng.uniform(-2, 2));
    Tensor x = Tensor::from_data({cb, 16, 16}, xv);

    const auto& sp = m.blocks[0].sdgw[0];
    Tensor gate = sigmoid(
        conv2d(local_sd(x), sp.weight_conv.kernel, sp.weight_conv.bias, Pad::none));
    for (float gv : gate.data()) {
      min_gate = std::min(min_gate, double(gv));
      max_gate = std::max(max_gate, double(gv));
      if (!(gv > 0.0f && gv < 1.0f)) {
        detail = "gate out of (0,1): " + std::to_string(gv);
        return false;
      }
    }
    Tensor w;
    fbgw_forward(x, m.blocks[0].fbgw[0], arch, &w);
    for (float wv : w.data()) {
      min_w = std::min(min_w, double(wv));
      max_w = std::max(max_w, double(wv));
      if (!(wv >= 0.0f && wv <= 2.0f)) {
        detail = "band weight out of [0,2]: " + std::to_string(wv);
        return false;
      }
    }
  }
  std::ostringstream os;
  os << "gates in [" << min_gate << "," << max_gate << "], weights in [" << min_w << ","
     << max_w << "]";
  detail = os.str();
  return true;
}

// ---- criterion 5: FFT properties -------------------------------------

bool criterion5(double& worst_rt, double& worst_parseval) {
  Rng rng(1005);
  worst_rt = 0.0;
  worst_parseval = 0.0;
  for (int H : {4, 8, 16, 32}) {
    for (int W : {4, 8, 16, 32}) {
      std::vector<float> v(static_cast<size_t>(H) * W);
      for (auto& e : v) e = static_cast<float>(rng.uniform(-1, 1));
      Tensor x = Tensor::from_data({1, H, W}, v);
      Tensor back = irfft2(rfft2(x), W);
      for (size_t i = 0; i < v.size(); ++i)
        worst_rt = std::max(worst_rt, std::abs(double(back.data()[i]) - double(v[i])));

      double spatial = 0.0;
      for (float e : v) spatial += double(e) * double(e);
      ComplexTensor f = rfft2(x);
      double spectral = 0.0;
      for (int u = 0; u < H; ++u)
        for (int vv = 0; vv < rfft_width(W); ++vv) {
          const double p = double(f.re.at(0, u, vv)) * f.re.at(0, u, vv) +
                           double(f.im.at(0, u, vv)) * f.im.at(0, u, vv);
          const bool self = (vv == 0) || (2 * vv == W);
          spectral += self ? p : 2.0 * p;
        }
      spectral /= static_cast<double>(H) * W;
      worst_parseval = std::max(worst_parseval, std::abs(spectral - spatial) / spatial);
    }
  }
  return worst_rt < 1e-5 && worst_parseval < 1e-4;
}

// ---- criterion 6: Poisson disk audit ---------------------------------

bool criterion6(std::string& detail) {
  double global_min = 1e300;
  int64_t total = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    AtomSet a = poisson_disk(256, 256, 4.0, 7000 + seed);
    total += static_cast<int64_t>(a.positions.size());
    for (size_t i = 0; i < a.positions.size(); ++i)
      for (size_t j = i + 1; j < a.positions.size(); ++j) {
        const double dx = a.positions[i][0] - a.positions[j][0];
        const double dy = a.positions[i][1] - a.positions[j][1];
        global_min = std::min(global_min, std::sqrt(dx * dx + dy * dy));
      }
    if (global_min < 4.0) {
      detail = "min distance " + std::to_string(global_min) + " at seed " +
               std::to_string(seed);
      return false;
    }
  }
  std::ostringstream os;
  os << "50 sets, min pairwise distance " << global_min << ", mean count "
     << (total / 50);
  detail = os.str();
  return true;
}

// ---- criteria 7/8: desk-scale training -------------------------------

struct DeskData {
  std::string train_dir, test_dir;
};

GenConfig desk_gen_config() {
  GenConfig cfg;
  cfg.width = cfg.height = 64;
  cfg.r_min = 4.0;
  cfg.perlin_cell = 32;
  cfg.noise = NoiseParams::builtin_paper();
  return cfg;
}

DeskData make_desk_datasets(uint64_t seed) {
  DeskData d;
  d.train_dir = std::string(kTmp) + "/desk_train_" + std::to_string(seed);
  d.test_dir = std::string(kTmp) + "/desk_test_" + std::to_string(seed);
  const GenConfig cfg = desk_gen_config();
  const int threads = resolve_threads(0);
  if (!fs::exists(fs::path(d.train_dir) / "index.json"))
    write_dataset(d.train_dir, cfg, 200, seed, false, threads);
  // Disjoint validation/test split by seed offset.
  if (!fs::exists(fs::path(d.test_dir) / "index.json"))
    write_dataset(d.test_dir, cfg, 50, seed + 1000000, false, threads);
  return d;
}

TrainResult desk_train(const DeskData& data, const std::string& variant, uint64_t seed) {
  TrainConfig cfg = TrainConfig::desk_preset();
  cfg.arch = ArchConfig::variant(variant, 2, 16, 4);
  cfg.dataset_dir = data.train_dir;
  cfg.seed = seed;
  cfg.threads = resolve_threads(0);
  return train(cfg);
}

bool criterion7(std::string& detail) {
  const DeskData data = make_desk_datasets(64001);
  TrainResult res = desk_train(data, "full", 1);

  const int threads = resolve_threads(0);
  const MetricReport scgn =
      evaluate(EvalMethod::scgn_model(res.model), data.test_dir, 127.5, threads);
  const MetricReport gauss =
      evaluate(EvalMethod::gaussian_baseline(1.5), data.test_dir, 127.5, threads);
  const double first = res.log.epoch_loss.front();
  const double last = res.log.epoch_loss.back();

  std::ostringstream os;
  os << "scgn " << scgn.psnr_db << " dB / ssim " << scgn.ssim << " vs gaussian "
     << gauss.psnr_db << " dB / ssim " << gauss.ssim << "; loss " << first << " -> "
     << last;
  detail = os.str();
  return scgn.psnr_db >= gauss.psnr_db + 3.0 && scgn.ssim >= gauss.ssim + 0.1 &&
         last < 0.5 * first;
}

bool criterion8(std::string& detail) {
  const DeskData data = make_desk_datasets(64001);
  const int threads = resolve_threads(0);
  const std::vector<std::string> variants{"full", "v2", "v3", "v5", "v1"};
  std::map<std::string, double> mean_psnr;
  for (const auto& variant : variants) {
    double acc = 0.0;
    for (uint64_t seed : {1, 2, 3}) {
      TrainResult res = desk_train(data, variant, seed);
      const MetricReport rep =
          evaluate(EvalMethod::scgn_model(res.model), data.test_dir, 127.5, threads);
      acc += rep.psnr_db;
    }
    mean_psnr[variant] = acc / 3.0;
  }

  std::ostringstream os;
  os << "mean PSNR: full " << mean_psnr["full"] << ", v2(no sdgw) " << mean_psnr["v2"]
     << ", v3(no fbgw) " << mean_psnr["v3"] << ", v5(no pe) " << mean_psnr["v5"]
     << ", v1(both off) " << mean_psnr["v1"];
  detail = os.str();

  // Ties (within 0.05 dB) pass against the single-ablation variants but
  // count as failures against v1.
  const double full = mean_psnr["full"];
  return full >= mean_psnr["v2"] - 0.05 && full >= mean_psnr["v3"] - 0.05 &&
         full >= mean_psnr["v5"] - 0.05 && full >= mean_psnr["v1"] + 0.05;
}

// ---- criterion 9: localization round trip ----------------------------

bool criterion9(std::string& detail) {
  GenConfig cfg = desk_gen_config();
  double worst_centroid = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Sample s = make_sample(cfg, 90000 + seed);
    LocalizationResult res = localize(s.gt);
    if (res.centroids.size() != s.atoms.positions.size()) {
      detail = "seed " + std::to_string(seed) + ": found " +
               std::to_string(res.centroids.size()) + " of " +
               std::to_string(s.atoms.positions.size()) + " atoms";
      return false;
    }
    // Greedy nearest matching; with exact counts and sparse atoms this is
    // the assignment.
    for (const auto& c : res.centroids) {
      double best = 1e300;
      for (const auto& a : s.atoms.positions)
        best = std::min(best, std::hypot(c[0] - a[0], c[1] - a[1]));
      worst_centroid = std::max(worst_centroid, best);
      if (best >= 0.5) {
        detail = "seed " + std::to_string(seed) + ": centroid off by " +
                 std::to_string(best) + " px";
        return false;
      }
    }
    const Tensor mask = binarize(s.gt, 127.5);
    if (iou(mask, mask) != 1.0) {
      detail = "gt-vs-gt IoU != 1";
      return false;
    }
  }
  std::ostringstream os;
  os << "50 renders, exact counts, worst centroid error " << worst_centroid << " px";
  detail = os.str();
  return true;
}

// ---- criterion 10: end-to-end determinism ----------------------------

bool file_bytes(const fs::path& p, std::string& out) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return false;
  out.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return true;
}

bool dirs_identical(const fs::path& a, const fs::path& b, std::string& why,
                    bool strip_wall_clock) {
  std::vector<fs::path> ra, rb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) ra.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rb.push_back(fs::relative(e.path(), b));
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  if (ra != rb) {
    why = "file lists differ";
    return false;
  }
  for (const auto& rel : ra) {
    std::string ca, cb;
    if (!file_bytes(a / rel, ca) || !file_bytes(b / rel, cb)) {
      why = "unreadable " + rel.string();
      return false;
    }
    if (strip_wall_clock && rel.filename() == "train_log.jsonl") {
      // Wall-clock fields are the one legitimately nondeterministic output.
      auto strip = [](const std::string& text) {
        std::istringstream in(text);
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line)) {
          nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
          if (!j.is_discarded()) j.erase("wall_s");
          out << j.dump() << "\n";
        }
        return out.str();
      };
      ca = strip(ca);
      cb = strip(cb);
    }
    if (ca != cb) {
      why = "content differs: " + rel.string();
      return false;
    }
  }
  return true;
}

bool criterion10(std::string& detail) {
  const std::string root = std::string(kTmp) + "/determinism";
  fs::remove_all(root);

  auto gen_args = [&](const std::string& out) {
    return std::vector<std::string>{"generate", "--out", out,     "--count", "24",
                                    "--size",   "48x48", "--seed", "11",     "--threads",
                                    "1"};
  };
  if (cli_run(gen_args(root + "/gen_a")) != 0 || cli_run(gen_args(root + "/gen_b")) != 0) {
    detail = "generate failed";
    return false;
  }
  std::string why;
  if (!dirs_identical(root + "/gen_a", root + "/gen_b", why, false)) {
    detail = "generate runs differ: " + why;
    return false;
  }

  auto train_args = [&](const std::string& out) {
    return std::vector<std::string>{
        "train", "--data", root + "/gen_a", "--out", out,  "--preset", "desk",
        "--n",   "1",      "--channels",    "8",     "--epochs", "2",
        "--seed", "3",     "--threads",     "1"};
  };
  if (cli_run(train_args(root + "/train_a")) != 0 ||
      cli_run(train_args(root + "/train_b")) != 0) {
    detail = "train failed";
    return false;
  }
  if (!dirs_identical(root + "/train_a", root + "/train_b", why, true)) {
    detail = "train runs differ: " + why;
    return false;
  }

  auto eval_args = [&](const std::string& out) {
    return std::vector<std::string>{"eval",
                                    "--data",
                                    root + "/gen_a",
                                    "--model",
                                    root + "/train_a/model",
                                    "--gaussian-sigma",
                                    "1.5",
                                    "--out",
                                    out + "/report.json",
                                    "--threads",
                                    "1"};
  };
  if (cli_run(eval_args(root + "/eval_a")) != 0 ||
      cli_run(eval_args(root + "/eval_b")) != 0) {
    detail = "eval failed";
    return false;
  }
  if (!dirs_identical(root + "/eval_a", root + "/eval_b", why, false)) {
    detail = "eval runs differ: " + why;
    return false;
  }
  detail = "generate/train/eval byte-identical across reruns";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criteria" && i + 1 < argc) {
      std::istringstream in(argv[++i]);
      std::string tok;
      while (std::getline(in, tok, ',')) selected.insert(std::stoi(tok));
    }
  }
  if (selected.empty())
    for (int c = 1; c <= 10; ++c) selected.insert(c);

  fs::create_directories(kTmp);
  int failures = 0;
  auto run = [&](int id, auto&& fn) {
    if (!selected.count(id)) return;
    Timer timer;
    std::string detail;
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    report(id, pass, detail, timer.seconds());
    failures += pass ? 0 : 1;
  };

  run(1, [](std::string& d) {
    double worst = 0.0;
    const bool ok = criterion1(worst);
    d = "max FD rel err " + std::to_string(worst) + " (tol 1e-4)";
    return ok;
  });
  run(2, [](std::string& d) {
    double wr = 0.0, wc = 0.0;
    const bool ok = criterion2(wr, wc);
    std::ostringstream os;
    os << "oracle err " << wr << " (tol 1e-6), constant err " << wc << " (tol 1e-9)";
    d = os.str();
    return ok;
  });
  run(3, [](std::string& d) { return criterion3(d); });
  run(4, [](std::string& d) { return criterion4(d); });
  run(5, [](std::string& d) {
    double rt = 0.0, pv = 0.0;
    const bool ok = criterion5(rt, pv);
    std::ostringstream os;
    os << "round trip err " << rt << " (tol 1e-5), Parseval rel err " << pv
       << " (tol 1e-4)";
    d = os.str();
    return ok;
  });
  run(6, [](std::string& d) { return criterion6(d); });
  run(7, [](std::string& d) { return criterion7(d); });
  run(8, [](std::string& d) { return criterion8(d); });
  run(9, [](std::string& d) { return criterion9(d); });
  run(10, [](std::string& d) { return criterion10(d); });

  if (failures == 0)
    std::printf("all selected criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
