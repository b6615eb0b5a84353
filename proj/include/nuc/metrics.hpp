#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuc/tensor.hpp"

namespace nuc {

// Peak signal-to-noise ratio in dB; +inf for identical images (callers cap
// it when aggregating).
double psnr(const Tensor& pred, const Tensor& gt, double peak = 255.0);

// Mean structural similarity, 11x11 Gaussian window sigma=1.5 over valid
// positions, K1=0.01 K2=0.03, dynamic range 255.
double ssim(const Tensor& pred, const Tensor& gt);

// Intersection over union of two binary masks (entries > 0.5 are set).
// Both masks empty yields 1.0 by convention.
double iou(const Tensor& mask_a, const Tensor& mask_b);

Tensor binarize(const Tensor& image, double threshold);

struct LocalizationResult {
  Tensor mask;  // binarized, small components removed
  std::vector<std::array<double, 2>> centroids;  // (x, y)
};

// Threshold -> 8-connected components -> intensity-weighted centroids.
// Components with fewer than min_px pixels are dropped.
LocalizationResult localize(const Tensor& image, double threshold = 127.5,
                            int min_px = 1);

struct SampleMetrics {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double iou = 0.0;
};

struct MetricReport {
  std::string method;
  std::string params;      // human-readable method parameters
  std::string dataset_id;  // dataset directory or label
  double psnr_db = 0.0;    // means over samples (PSNR capped at 99 dB)
  double ssim = 0.0;
  double iou = 0.0;
  int psnr_capped = 0;     // samples whose PSNR hit the +inf sentinel
  int iou_both_empty = 0;  // samples where pred and gt masks were both empty
  std::vector<SampleMetrics> per_sample;
};

// Aggregation: arithmetic means, +inf PSNR entries counted and capped at 99 dB.
void finalize_report(MetricReport& r);

void to_json(nlohmann::json& j, const MetricReport& r);

constexpr double kPsnrCapDb = 99.0;

}  // namespace nuc
