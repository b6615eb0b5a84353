#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nuc/common.hpp"
#include "nuc/tensor.hpp"

namespace nuc {

// Sensor noise model: per-pixel Gaussian noise whose standard deviation
// grows affinely with the clean signal, plus a per-column Gaussian offset
// shared by all rows of a column within a frame.
struct NoiseParams {
  double slope = 0.0;      // pointwise sigma per intensity unit
  double intercept = 0.0;  // pointwise sigma floor
  double sigma_c = 0.0;    // column-noise sigma

  // Calibration constants shipped with the toolkit (CLI token
  // "builtin-paper").
  static NoiseParams builtin_paper() { return {0.03583, 1.379, 0.6641}; }
};

struct VacuumSequence {
  double intensity = 0.0;  // mean signal level, image units
  std::vector<Tensor> frames;
};

// Per-sequence fit details, reported alongside calibration output.
struct CalibrationReport {
  std::vector<double> intensities;      // per-sequence mean pixel value
  std::vector<double> sigma_p;          // per-sequence pointwise sigma
  std::vector<double> sigma_c;          // per-sequence column sigma
  std::vector<double> fit_residuals;    // sigma_p - (slope*I + intercept)
};

double sigma_p(double intensity, const NoiseParams& p);

// One column draw N(0, sigma_c^2) shared down each column plus independent
// per-pixel draws N(0, sigma_p(clean)^2). Output is not clamped.
Tensor add_noise(const Tensor& clean, const NoiseParams& p, uint64_t seed);

// Frames of constant `intensity` plus fresh noise; frame i uses substream i.
VacuumSequence synth_vacuum(double intensity, const NoiseParams& p, int n_frames,
                            int H, int W, uint64_t seed, int threads = 1);

NoiseParams calibrate(const std::vector<VacuumSequence>& sequences,
                      CalibrationReport* report = nullptr);

// Ordinary least squares of sigma against intensity (the regression stage of
// calibrate, separable for tests).
std::pair<double, double> fit_sigma_line(const std::vector<double>& intensities,
                                         const std::vector<double>& sigmas);

// JSON round trip ({"slope","intercept","sigma_c"} at full precision).
void write_noise_params(const std::string& path, const NoiseParams& p);
NoiseParams read_noise_params(const std::string& path);

// Calibration input directory: one subdirectory per sequence holding
// sequence.json ({"intensity": <f>}) and one tensor container per frame.
std::vector<VacuumSequence> read_sequences_dir(const std::string& dir);
void write_sequence_dir(const std::string& dir, const VacuumSequence& seq);

void to_json(nlohmann::json& j, const NoiseParams& p);
void from_json(const nlohmann::json& j, NoiseParams& p);

}  // namespace nuc
