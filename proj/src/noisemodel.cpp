#include "nuc/noisemodel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "nuc/tensor_io.hpp"

namespace fs = std::filesystem;

namespace nuc {

double sigma_p(double intensity, const NoiseParams& p) {
  if (intensity < 0.0)
    throw config_error("sigma_p: negative intensity " + std::to_string(intensity));
  return p.slope * intensity + p.intercept;
}

Tensor add_noise(const Tensor& clean, const NoiseParams& p, uint64_t seed) {
  if (clean.rank() != 3 || clean.dim(0) != 1)
    throw shape_error("add_noise: expected [1,H,W], got " + shape_str(clean.shape()));
  const int H = clean.dim(1), W = clean.dim(2);
  Rng rng(seed);

  // Column draws first, then per-pixel draws in row-major order; the stream
  // layout is part of the determinism contract.
  std::vector<double> column(W);
  for (int x = 0; x < W; ++x) column[x] = p.sigma_c * rng.normal();

  std::vector<float> out(clean.numel());
  const auto& cv = clean.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int64_t i = static_cast<int64_t>(y) * W + x;
      const double c = static_cast<double>(cv[i]);
      const double sp = sigma_p(c, p);
      out[i] = static_cast<float>(c + column[x] + sp * rng.normal());
    }
  }
  return Tensor::from_data(clean.shape(), std::move(out));
}

VacuumSequence synth_vacuum(double intensity, const NoiseParams& p, int n_frames,
                            int H, int W, uint64_t seed, int threads) {
  if (n_frames < 2)
    throw config_error("synth_vacuum: need at least 2 frames, got " +
                       std::to_string(n_frames));
  const Tensor clean = Tensor::filled({1, H, W}, static_cast<float>(intensity));
  VacuumSequence seq;
  seq.intensity = intensity;
  seq.frames.resize(n_frames);
  const Rng base(seed);
  parallel_for(n_frames, threads, [&](int64_t i) {
    seq.frames[i] = add_noise(clean, p, base.fork(static_cast<uint64_t>(i)).seed());
  });
  return seq;
}

NoiseParams calibrate(const std::vector<VacuumSequence>& sequences,
                      CalibrationReport* report) {
  if (sequences.size() < 2)
    throw fit_error("calibrate: need >=2 intensities (got " +
                    std::to_string(sequences.size()) + " sequence(s))");

  std::vector<double> seq_intensity, seq_sigma_p, seq_sigma_c;
  for (const auto& seq : sequences) {
    const int F = static_cast<int>(seq.frames.size());
    if (F < 2) throw fit_error("calibrate: every sequence needs >=2 frames");
    const int H = seq.frames[0].dim(1), W = seq.frames[0].dim(2);
    for (const auto& f : seq.frames)
      if (f.dim(1) != H || f.dim(2) != W)
        throw shape_error("calibrate: inconsistent frame shapes within a sequence");

    // Temporal per-pixel mean.
    std::vector<double> mean(static_cast<size_t>(H) * W, 0.0);
    double intensity_acc = 0.0;
    for (const auto& f : seq.frames) {
      const auto& v = f.data();
      for (size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    for (auto& m : mean) m /= F;
    for (double m : mean) intensity_acc += m;
    const double mean_intensity = intensity_acc / static_cast<double>(mean.size());

    // Per frame: column estimate = row-mean of the residual per column;
    // pointwise residual = residual - column estimate.
    double sum_p2 = 0.0, sum_c = 0.0, sum_c2 = 0.0;
    int64_t n_p = 0, n_c = 0;
    std::vector<double> col(W);
    for (const auto& f : seq.frames) {
      const auto& v = f.data();
      std::fill(col.begin(), col.end(), 0.0);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          col[x] += v[static_cast<int64_t>(y) * W + x] - mean[static_cast<int64_t>(y) * W + x];
      for (auto& c : col) c /= H;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double r =
              v[static_cast<int64_t>(y) * W + x] - mean[static_cast<int64_t>(y) * W + x] - col[x];
          sum_p2 += r * r;
          ++n_p;
        }
      for (double c : col) {
        sum_c += c;
        sum_c2 += c * c;
        ++n_c;
      }
    }

    // Removing the per-column row-mean shrinks pointwise variance by
    // (H-1)/H; the column estimate carries sigma_p^2/H of pointwise leakage.
    const double var_p_raw = sum_p2 / static_cast<double>(n_p);
    const double var_p = var_p_raw * static_cast<double>(H) / (H - 1);
    const double mean_c = sum_c / static_cast<double>(n_c);
    const double var_c_raw = sum_c2 / static_cast<double>(n_c) - mean_c * mean_c;
    const double var_c = std::max(0.0, var_c_raw - var_p / H);

    seq_intensity.push_back(mean_intensity);
    seq_sigma_p.push_back(std::sqrt(var_p));
    seq_sigma_c.push_back(std::sqrt(var_c));
  }

  auto [slope, intercept] = fit_sigma_line(seq_intensity, seq_sigma_p);

  NoiseParams out;
  out.slope = slope;
  out.intercept = intercept;
  out.sigma_c = 0.0;
  for (double s : seq_sigma_c) out.sigma_c += s;
  out.sigma_c /= static_cast<double>(seq_sigma_c.size());

  if (report) {
    report->intensities = seq_intensity;
    report->sigma_p = seq_sigma_p;
    report->sigma_c = seq_sigma_c;
    report->fit_residuals.clear();
    for (size_t i = 0; i < seq_intensity.size(); ++i)
      report->fit_residuals.push_back(seq_sigma_p[i] -
                                      (slope * seq_intensity[i] + intercept));
  }
  return out;
}

std::pair<double, double> fit_sigma_line(const std::vector<double>& intensities,
                                         const std::vector<double>& sigmas) {
  if (intensities.size() != sigmas.size() || intensities.size() < 2)
    throw fit_error("fit_sigma_line: need >=2 (intensity, sigma) points");
  const double n = static_cast<double>(intensities.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < intensities.size(); ++i) {
    mx += intensities[i];
    my += sigmas[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < intensities.size(); ++i) {
    sxx += (intensities[i] - mx) * (intensities[i] - mx);
    sxy += (intensities[i] - mx) * (sigmas[i] - my);
  }
  if (sxx <= 1e-12 * (mx * mx + 1.0))
    throw fit_error("fit_sigma_line: need >=2 distinct intensities (singular regression)");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

void to_json(nlohmann::json& j, const NoiseParams& p) {
  j = nlohmann::json{{"slope", p.slope}, {"intercept", p.intercept}, {"sigma_c", p.sigma_c}};
}

void from_json(const nlohmann::json& j, NoiseParams& p) {
  j.at("slope").get_to(p.slope);
  j.at("intercept").get_to(p.intercept);
  j.at("sigma_c").get_to(p.sigma_c);
}

void write_noise_params(const std::string& path, const NoiseParams& p) {
  nlohmann::json j;
  j["slope"] = p.slope;
  j["intercept"] = p.intercept;
  j["sigma_c"] = p.sigma_c;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

NoiseParams read_noise_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || !j.contains("slope") || !j.contains("intercept") ||
      !j.contains("sigma_c"))
    throw io_error("'" + path + "': not a noise-parameter JSON file");
  return {j["slope"].get<double>(), j["intercept"].get<double>(),
          j["sigma_c"].get<double>()};
}

std::vector<VacuumSequence> read_sequences_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw io_error("'" + dir + "' is not a directory");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());

  std::vector<VacuumSequence> out;
  for (const auto& sd : subdirs) {
    const fs::path meta = sd / "sequence.json";
    if (!fs::exists(meta)) continue;
    std::ifstream f(meta);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.contains("intensity"))
      throw io_error("'" + meta.string() + "': missing intensity");
    VacuumSequence seq;
    seq.intensity = j["intensity"].get<double>();
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(sd))
      if (e.path().extension() == ".nt") frames.push_back(e.path());
    std::sort(frames.begin(), frames.end());
    for (const auto& fp : frames) seq.frames.push_back(read_tensor(fp.string()).tensor);
    out.push_back(std::move(seq));
  }
  return out;
}

void write_sequence_dir(const std::string& dir, const VacuumSequence& seq) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["intensity"] = seq.intensity;
  std::ofstream f(fs::path(dir) / "sequence.json", std::ios::trunc);
  f << j.dump(2) << "\n";
  char buf[32];
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "frame_%04zu.nt", i);
    write_tensor((fs::path(dir) / buf).string(), seq.frames[i], "frame");
  }
}

}  // namespace nuc
