#pragma once

#include <map>
#include <string>
#include <vector>

#include "nuc/baselines.hpp"
#include "nuc/metrics.hpp"
#include "nuc/scgn.hpp"
#include "nuc/tensor.hpp"

namespace nuc {

// Mean absolute error, subgradient 0 at exact ties.
template <typename S>
TensorT<S> l1_loss(const TensorT<S>& pred, const TensorT<S>& gt) {
  return mean_all(abs(sub(pred, gt)));
}

struct TrainConfig {
  int epochs = 100;
  double lr = 2e-4;
  int batch_size = 6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // elementwise clip magnitude, 0 = off
  ArchConfig arch;
  std::string dataset_dir;
  std::string out_dir;
  std::string val_dataset_dir;  // optional held-out set for eval hooks
  int eval_every = 0;           // epochs between val evaluations, 0 = off
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between checkpoints, 0 = final only
  int threads = 1;

  // Training recipe at full scale (n=8, C=64, 100 epochs, lr 2e-4, batch 6;
  // expects a 1000-pair dataset).
  static TrainConfig paper_preset();
  // Reduced recipe that trains in minutes on a desktop CPU: 64x64 images,
  // n=2, C=16, 20 epochs, 200 training pairs.
  static TrainConfig desk_preset();

  void validate() const;
};

struct AdamState {
  std::map<std::string, std::vector<float>> m, v;
  int64_t t = 0;
};

using GradMap = std::map<std::string, std::vector<float>>;

// Bias-corrected Adam update over every parameter in visitation order.
// Throws usage_error naming the parameter path on non-finite gradients.
void adam_step(ModelParams& params, const GradMap& grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-sample L1 per epoch
  std::vector<double> wall_s;      // wall-clock seconds per epoch
  std::vector<std::pair<int, MetricReport>> evals;  // (epoch, val metrics)
};

struct TrainResult {
  ModelParams model;
  TrainLog log;
};

// Supervised training loop: seeded shuffling, fixed batch order, last
// partial batch kept, deterministic for a fixed seed at any thread count
// (per-sample gradients are reduced in sample-index order).
TrainResult train(const TrainConfig& cfg);

struct EvalMethod {
  enum class Kind { scgn, gaussian, identity, gt_oracle };
  Kind kind = Kind::scgn;
  const ModelParams* model = nullptr;    // scgn
  GaussianFilterSpec gaussian{};         // gaussian

  static EvalMethod scgn_model(const ModelParams& m) {
    return {Kind::scgn, &m, {}};
  }
  static EvalMethod gaussian_baseline(double sigma) {
    return {Kind::gaussian, nullptr, GaussianFilterSpec::from_sigma(sigma)};
  }
  static EvalMethod identity() { return {Kind::identity, nullptr, {}}; }
  static EvalMethod gt_oracle() { return {Kind::gt_oracle, nullptr, {}}; }
};

// Denoise one [1,H,W] image (0..255 scale in, clamped 0..255 out for scgn
// happens in evaluate; here the raw mapped output is returned).
Tensor run_method(const EvalMethod& method, const Tensor& noisy, const Tensor& gt);

// Denoises every sample, clamps to [0,255], and reports mean PSNR/SSIM/IoU.
MetricReport evaluate(const EvalMethod& method, const std::string& dataset_dir,
                      double iou_threshold = 127.5, int threads = 1);

}  // namespace nuc
