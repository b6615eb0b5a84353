#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuc/common.hpp"
#include "nuc/noisemodel.hpp"
#include "nuc/tensor.hpp"

namespace nuc {

struct AtomSet {
  std::vector<std::array<double, 2>> positions;  // (x, y) in pixels
  int width = 0, height = 0;
};

// Scalar distribution: a fixed value or uniform on [a,b].
struct DistSpec {
  enum class Kind { fixed, uniform };
  Kind kind = Kind::fixed;
  double a = 0.0, b = 0.0;

  static DistSpec fixed(double v) { return {Kind::fixed, v, v}; }
  static DistSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  double sample(Rng& rng) const {
    return kind == Kind::fixed ? a : rng.uniform(a, b);
  }
};

// Atom rendering controls. Peak brightness and Gaussian sigma are drawn per
// atom, the background level once per image. Ground-truth rendering pins
// 255 / 0.75 px / 0.
struct RenderParams {
  DistSpec peak_brightness = DistSpec::fixed(255.0);
  DistSpec atom_sigma = DistSpec::fixed(0.75);
  DistSpec background = DistSpec::fixed(0.0);

  static RenderParams ground_truth() { return {}; }
  static RenderParams clean_defaults() {
    RenderParams p;
    p.peak_brightness = DistSpec::uniform(120.0, 220.0);
    p.atom_sigma = DistSpec::uniform(1.0, 1.6);
    p.background = DistSpec::uniform(5.0, 20.0);
    return p;
  }
};

struct GenConfig {
  int width = 256, height = 256;
  double r_min = 4.0;
  int perlin_cell = 64;
  double perlin_threshold = 0.0;
  RenderParams clean_render = RenderParams::clean_defaults();
  NoiseParams noise = NoiseParams::builtin_paper();
  bool clamp_noisy = false;  // raw sensor model by default
};

struct Sample {
  Tensor noisy;  // [1,H,W]
  Tensor gt;     // [1,H,W]
  AtomSet atoms;
  uint64_t seed = 0;
};

// Maximal blue-noise point set with pairwise distance >= r_min (Bridson
// dart throwing, k candidates per active point, grid-accelerated).
AtomSet poisson_disk(int W, int H, double r_min, uint64_t seed, int k = 30);

// Classic gradient-lattice Perlin noise in [-1,1], binarized at `threshold`
// (>= threshold -> 1 = material, else 0 = vacuum). `cell` is the lattice
// spacing in pixels.
Tensor perlin_mask(int W, int H, int cell, double threshold, uint64_t seed);

// Additive 2D Gaussian splats, truncated at 4 sigma, clamped to [0,255].
Tensor render_atoms(const AtomSet& atoms, const RenderParams& p, uint64_t seed);

// Full pipeline: Poisson disk positions, Perlin vacuum carving, ground-truth
// and clean renders, calibrated noise. Pure function of (cfg, seed).
Sample make_sample(const GenConfig& cfg, uint64_t seed);

// Dataset directory: index.json + per-sample noisy/gt containers and
// atoms.json, optional PGM exports of the stored tensors.
void write_dataset(const std::string& dir, const GenConfig& cfg, int count,
                   uint64_t base_seed, bool export_pgm = false, int threads = 1);

struct DatasetEntry {
  std::string id;
  uint64_t seed;
  std::string noisy_path, gt_path, atoms_path;
};

struct DatasetIndex {
  GenConfig config;
  std::vector<DatasetEntry> entries;
};

DatasetIndex read_dataset_index(const std::string& dir);
Sample load_sample(const std::string& dir, const DatasetEntry& e);

// JSON mappings (index.json, resolved.json).
void to_json(nlohmann::json& j, const DistSpec& d);
void from_json(const nlohmann::json& j, DistSpec& d);
void to_json(nlohmann::json& j, const RenderParams& p);
void from_json(const nlohmann::json& j, RenderParams& p);
void to_json(nlohmann::json& j, const GenConfig& cfg);
void from_json(const nlohmann::json& j, GenConfig& cfg);

}  // namespace nuc
