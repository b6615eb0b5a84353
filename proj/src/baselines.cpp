#include "nuc/baselines.hpp"

#include <cmath>
#include <vector>

namespace nuc {

namespace {

// reflect-101 against both edges; radius may exceed the extent, so iterate.
int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

Tensor gaussian_filter(const Tensor& image, const GaussianFilterSpec& spec) {
  if (spec.sigma <= 0.0) throw config_error("gaussian filter: sigma must be positive");
  if (spec.radius < static_cast<int>(std::ceil(3.0 * spec.sigma)))
    throw config_error("gaussian filter: radius " + std::to_string(spec.radius) +
                       " below 3*sigma support");
  if (image.rank() != 3 || image.dim(0) != 1)
    throw shape_error("gaussian filter: expected [1,H,W], got " + shape_str(image.shape()));
  const int H = image.dim(1), W = image.dim(2);

  const int R = spec.radius;
  std::vector<double> taps(2 * R + 1);
  double norm = 0.0;
  for (int i = -R; i <= R; ++i) {
    taps[i + R] = std::exp(-0.5 * (static_cast<double>(i) * i) / (spec.sigma * spec.sigma));
    norm += taps[i + R];
  }
  for (auto& t : taps) t /= norm;

  // Horizontal pass, then vertical, accumulating in double throughout.
  std::vector<double> tmp(static_cast<size_t>(H) * W);
  const auto& src = image.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int i = -R; i <= R; ++i)
        acc += taps[i + R] *
               static_cast<double>(src[static_cast<size_t>(y) * W + reflect_index(x + i, W)]);
      tmp[static_cast<size_t>(y) * W + x] = acc;
    }
  }
  std::vector<float> out(tmp.size());
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) {
      double acc = 0.0;
      for (int i = -R; i <= R; ++i)
        acc += taps[i + R] * tmp[static_cast<size_t>(reflect_index(y + i, H)) * W + x];
      out[static_cast<size_t>(y) * W + x] = static_cast<float>(acc);
    }
  }
  return Tensor::from_data(image.shape(), std::move(out));
}

}  // namespace nuc
