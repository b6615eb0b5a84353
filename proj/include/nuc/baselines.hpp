#pragma once

#include "nuc/tensor.hpp"

namespace nuc {

struct GaussianFilterSpec {
  double sigma = 1.5;
  int radius = 5;  // kernel half-width, >= ceil(3*sigma)

  static GaussianFilterSpec from_sigma(double sigma) {
    if (sigma <= 0.0) throw config_error("gaussian filter: sigma must be positive");
    return {sigma, std::max(1, static_cast<int>(std::ceil(3.0 * sigma)))};
  }
};

// Separable Gaussian smoothing with normalized taps and mirror boundary.
// Preserves the image mean (DC) to rounding.
Tensor gaussian_filter(const Tensor& image, const GaussianFilterSpec& spec);

}  // namespace nuc
