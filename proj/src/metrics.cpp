#include "nuc/metrics.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace nuc {

double psnr(const Tensor& pred, const Tensor& gt, double peak) {
  if (!pred.same_shape(gt))
    throw shape_error("psnr: shape mismatch " + shape_str(pred.shape()) + " vs " +
                      shape_str(gt.shape()));
  const auto &a = pred.data(), &b = gt.data();
  double mse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    throw shape_error("ssim: shape mismatch " + shape_str(pred.shape()) + " vs " +
                      shape_str(gt.shape()));
  if (pred.rank() != 3 || pred.dim(0) != 1)
    throw shape_error("ssim: expected [1,H,W], got " + shape_str(pred.shape()));
  const int H = pred.dim(1), W = pred.dim(2);
  constexpr int kWin = 11, kR = 5;
  if (H < kWin || W < kWin)
    throw shape_error("ssim: image smaller than the 11x11 window: " +
                      shape_str(pred.shape()));

  // Normalized 11x11 Gaussian window, sigma 1.5.
  double wsum = 0.0;
  std::array<std::array<double, kWin>, kWin> win;
  for (int dy = -kR; dy <= kR; ++dy)
    for (int dx = -kR; dx <= kR; ++dx) {
      const double g = std::exp(-0.5 * (dx * dx + dy * dy) / (1.5 * 1.5));
      win[dy + kR][dx + kR] = g;
      wsum += g;
    }
  for (auto& row : win)
    for (auto& v : row) v /= wsum;

  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  const auto &a = pred.data(), &b = gt.data();

  double acc = 0.0;
  int64_t count = 0;
  for (int y = kR; y < H - kR; ++y) {
    for (int x = kR; x < W - kR; ++x) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -kR; dy <= kR; ++dy)
        for (int dx = -kR; dx <= kR; ++dx) {
          const double w = win[dy + kR][dx + kR];
          const double va = a[static_cast<size_t>(y + dy) * W + x + dx];
          const double vb = b[static_cast<size_t>(y + dy) * W + x + dx];
          mx += w * va;
          my += w * vb;
          sxx += w * va * va;
          syy += w * vb * vb;
          sxy += w * va * vb;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * sxy + kC2);
      const double den = (mx * mx + my * my + kC1) * (sxx + syy + kC2);
      acc += num / den;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double iou(const Tensor& mask_a, const Tensor& mask_b) {
  if (!mask_a.same_shape(mask_b))
    throw shape_error("iou: shape mismatch " + shape_str(mask_a.shape()) + " vs " +
                      shape_str(mask_b.shape()));
  const auto &a = mask_a.data(), &b = mask_b.data();
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool sa = a[i] > 0.5f, sb = b[i] > 0.5f;
    inter += sa && sb;
    uni += sa || sb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Tensor binarize(const Tensor& image, double threshold) {
  std::vector<float> out(image.numel());
  const auto& v = image.data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(v[i]) >= threshold ? 1.0f : 0.0f;
  return Tensor::from_data(image.shape(), std::move(out));
}

LocalizationResult localize(const Tensor& image, double threshold, int min_px) {
  if (image.rank() != 3 || image.dim(0) != 1)
    throw shape_error("localize: expected [1,H,W], got " + shape_str(image.shape()));
  if (threshold <= 0.0 || threshold >= 255.0)
    throw config_error("localize: threshold must lie in (0,255)");
  const int H = image.dim(1), W = image.dim(2);
  const auto& v = image.data();

  std::vector<int> label(static_cast<size_t>(H) * W, 0);
  auto set_at = [&](int y, int x) {
    return static_cast<double>(v[static_cast<size_t>(y) * W + x]) >= threshold;
  };

  LocalizationResult res;
  std::vector<float> mask(static_cast<size_t>(H) * W, 0.0f);
  int next_label = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!set_at(y, x) || label[static_cast<size_t>(y) * W + x] != 0) continue;
      ++next_label;
      stack.clear();
      stack.emplace_back(y, x);
      label[static_cast<size_t>(y) * W + x] = next_label;
      std::vector<std::pair<int, int>> pixels;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        pixels.emplace_back(cy, cx);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= H || nx >= W) continue;
            if (!set_at(ny, nx) || label[static_cast<size_t>(ny) * W + nx] != 0) continue;
            label[static_cast<size_t>(ny) * W + nx] = next_label;
            stack.emplace_back(ny, nx);
          }
      }
      if (static_cast<int>(pixels.size()) < min_px) continue;
      double wsum = 0.0, xsum = 0.0, ysum = 0.0;
      for (auto [py, px] : pixels) {
        const double wv = static_cast<double>(v[static_cast<size_t>(py) * W + px]);
        wsum += wv;
        xsum += wv * px;
        ysum += wv * py;
        mask[static_cast<size_t>(py) * W + px] = 1.0f;
      }
      res.centroids.push_back({xsum / wsum, ysum / wsum});
    }
  }
  res.mask = Tensor::from_data({1, H, W}, std::move(mask));
  return res;
}

void finalize_report(MetricReport& r) {
  double p = 0.0, s = 0.0, i = 0.0;
  r.psnr_capped = 0;
  for (const auto& m : r.per_sample) {
    double pd = m.psnr_db;
    if (std::isinf(pd)) {
      pd = kPsnrCapDb;
      ++r.psnr_capped;
    }
    p += pd;
    s += m.ssim;
    i += m.iou;
  }
  const double n = static_cast<double>(r.per_sample.size());
  if (n > 0) {
    r.psnr_db = p / n;
    r.ssim = s / n;
    r.iou = i / n;
  }
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"method", r.method},
                     {"params", r.params},
                     {"dataset_id", r.dataset_id},
                     {"psnr_db", r.psnr_db},
                     {"ssim", r.ssim},
                     {"iou", r.iou},
                     {"psnr_capped", r.psnr_capped},
                     {"iou_both_empty", r.iou_both_empty}};
  auto arr = nlohmann::json::array();
  for (const auto& m : r.per_sample) {
    const double pd = std::isinf(m.psnr_db) ? kPsnrCapDb : m.psnr_db;
    arr.push_back({{"psnr_db", pd}, {"ssim", m.ssim}, {"iou", m.iou}});
  }
  j["per_sample"] = arr;
}

}  // namespace nuc
