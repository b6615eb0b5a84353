#include "nuc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nuc/tensor_io.hpp"

namespace fs = std::filesystem;

namespace nuc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

// Bridson, "Fast Poisson Disk Sampling in Arbitrary Dimensions" (SIGGRAPH
// 2007 sketch): grid of cell size r/sqrt(2) holds at most one sample per
// cell; k annulus candidates are tried per active point.
AtomSet poisson_disk(int W, int H, double r_min, uint64_t seed, int k) {
  if (r_min <= 0.0) throw config_error("poisson_disk: r_min must be positive");
  if (W < 1 || H < 1) throw config_error("poisson_disk: empty domain");
  // A domain smaller than the disk radius degenerates to a single point.

  Rng rng(seed);
  // Positions stay inside the sampled grid (x < W-1, y < H-1) so the whole
  // above-half-peak neighborhood of every atom lands on image pixels.
  const double xmax = W - 1.0, ymax = H - 1.0;
  const double cell = r_min / std::sqrt(2.0);
  const int gw = static_cast<int>(std::ceil(W / cell));
  const int gh = static_cast<int>(std::ceil(H / cell));
  std::vector<int> grid(static_cast<size_t>(gw) * gh, -1);

  std::vector<std::array<double, 2>> points;
  std::vector<int> active;

  auto grid_index = [&](double x, double y) {
    const int gx = std::min(gw - 1, static_cast<int>(x / cell));
    const int gy = std::min(gh - 1, static_cast<int>(y / cell));
    return gy * gw + gx;
  };
  auto far_enough = [&](double x, double y) {
    const int gx = std::min(gw - 1, static_cast<int>(x / cell));
    const int gy = std::min(gh - 1, static_cast<int>(y / cell));
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int nx = gx + dx, ny = gy + dy;
        if (nx < 0 || ny < 0 || nx >= gw || ny >= gh) continue;
        const int idx = grid[static_cast<size_t>(ny) * gw + nx];
        if (idx < 0) continue;
        const double ddx = points[idx][0] - x, ddy = points[idx][1] - y;
        if (ddx * ddx + ddy * ddy < r_min * r_min) return false;
      }
    }
    return true;
  };
  auto push_point = [&](double x, double y) {
    points.push_back({x, y});
    active.push_back(static_cast<int>(points.size()) - 1);
    grid[grid_index(x, y)] = static_cast<int>(points.size()) - 1;
  };

  push_point(rng.uniform(0.0, xmax), rng.uniform(0.0, ymax));

  while (!active.empty()) {
    const int slot = rng.uniform_int(static_cast<int>(active.size()));
    const auto& p = points[active[slot]];
    bool found = false;
    for (int t = 0; t < k; ++t) {
      const double rad = r_min * (1.0 + rng.uniform());
      const double ang = kTwoPi * rng.uniform();
      const double x = p[0] + rad * std::cos(ang);
      const double y = p[1] + rad * std::sin(ang);
      if (x < 0.0 || y < 0.0 || x >= xmax || y >= ymax) continue;
      if (!far_enough(x, y)) continue;
      push_point(x, y);
      found = true;
      break;
    }
    if (!found) {
      active[slot] = active.back();
      active.pop_back();
    }
  }

  AtomSet out;
  out.positions = std::move(points);
  out.width = W;
  out.height = H;
  return out;
}

namespace {

// Unit gradient per lattice point from a seeded permutation table.
struct PerlinLattice {
  std::array<int, 512> perm;
  explicit PerlinLattice(uint64_t seed) {
    std::array<int, 256> p;
    for (int i = 0; i < 256; ++i) p[i] = i;
    Rng rng(seed);
    for (int i = 255; i > 0; --i) std::swap(p[i], p[rng.uniform_int(i + 1)]);
    for (int i = 0; i < 512; ++i) perm[i] = p[i & 255];
  }
  std::array<double, 2> gradient(int ix, int iy) const {
    const int h = perm[(perm[ix & 255] + iy) & 255];
    const double ang = kTwoPi * h / 256.0;
    return {std::cos(ang), std::sin(ang)};
  }
};

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

Tensor perlin_mask(int W, int H, int cell, double threshold, uint64_t seed) {
  if (cell < 2) throw config_error("perlin_mask: cell size must be >= 2 px");
  const PerlinLattice lat(seed);
  // Max magnitude of 2D lattice-gradient Perlin noise is sqrt(2)/2.
  const double norm = std::sqrt(2.0);

  std::vector<float> out(static_cast<size_t>(W) * H);
  for (int y = 0; y < H; ++y) {
    const double gy = static_cast<double>(y) / cell;
    const int iy = static_cast<int>(std::floor(gy));
    const double fy = gy - iy;
    const double sy = smoothstep(fy);
    for (int x = 0; x < W; ++x) {
      const double gx = static_cast<double>(x) / cell;
      const int ix = static_cast<int>(std::floor(gx));
      const double fx = gx - ix;
      const double sx = smoothstep(fx);

      double corner[2][2];
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx) {
          const auto g = lat.gradient(ix + cx, iy + cy);
          corner[cy][cx] = g[0] * (fx - cx) + g[1] * (fy - cy);
        }
      const double top = corner[0][0] + sx * (corner[0][1] - corner[0][0]);
      const double bot = corner[1][0] + sx * (corner[1][1] - corner[1][0]);
      const double value = norm * (top + sy * (bot - top));
      out[static_cast<size_t>(y) * W + x] = value >= threshold ? 1.0f : 0.0f;
    }
  }
  return Tensor::from_data({1, H, W}, std::move(out));
}

Tensor render_atoms(const AtomSet& atoms, const RenderParams& p, uint64_t seed) {
  const int W = atoms.width, H = atoms.height;
  if (W <= 0 || H <= 0) throw config_error("render_atoms: empty image extent");
  Rng rng(seed);
  const double background = p.background.sample(rng);

  std::vector<double> acc(static_cast<size_t>(W) * H, background);
  for (const auto& a : atoms.positions) {
    const double peak = p.peak_brightness.sample(rng);
    const double sigma = p.atom_sigma.sample(rng);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    // 4-sigma truncation; the dropped tail is < 3.4e-4 of the peak.
    const double radius = 4.0 * sigma;
    const int x0 = std::max(0, static_cast<int>(std::ceil(a[0] - radius)));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(a[0] + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(a[1] - radius)));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(a[1] + radius)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - a[1];
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - a[0];
        const double d2 = dx * dx + dy * dy;
        if (d2 > radius * radius) continue;
        acc[static_cast<size_t>(y) * W + x] += peak * std::exp(-d2 * inv2s2);
      }
    }
  }

  std::vector<float> out(acc.size());
  for (size_t i = 0; i < acc.size(); ++i)
    out[i] = static_cast<float>(std::min(255.0, std::max(0.0, acc[i])));
  return Tensor::from_data({1, H, W}, std::move(out));
}

Sample make_sample(const GenConfig& cfg, uint64_t seed) {
  if (cfg.width < 2 || cfg.height < 2)
    throw config_error("make_sample: image size must be >= 2x2");
  const Rng base(seed);

  AtomSet atoms = poisson_disk(cfg.width, cfg.height, cfg.r_min, base.fork(0).seed());
  const Tensor mask = perlin_mask(cfg.width, cfg.height, cfg.perlin_cell,
                                  cfg.perlin_threshold, base.fork(1).seed());

  // Atoms whose nearest mask pixel is vacuum are removed.
  AtomSet kept;
  kept.width = atoms.width;
  kept.height = atoms.height;
  for (const auto& a : atoms.positions) {
    const int x = std::min(cfg.width - 1, std::max(0, static_cast<int>(std::lround(a[0]))));
    const int y = std::min(cfg.height - 1, std::max(0, static_cast<int>(std::lround(a[1]))));
    if (mask.at(0, y, x) > 0.5f) kept.positions.push_back(a);
  }

  Sample s;
  s.atoms = std::move(kept);
  s.seed = seed;
  s.gt = render_atoms(s.atoms, RenderParams::ground_truth(), base.fork(2).seed());
  const Tensor clean = render_atoms(s.atoms, cfg.clean_render, base.fork(3).seed());
  s.noisy = add_noise(clean, cfg.noise, base.fork(4).seed());
  if (cfg.clamp_noisy) s.noisy = clamp_values(s.noisy, 0.0, 255.0);
  return s;
}

// ---- JSON mappings ----

void to_json(nlohmann::json& j, const DistSpec& d) {
  if (d.kind == DistSpec::Kind::fixed)
    j = nlohmann::json{{"kind", "fixed"}, {"value", d.a}};
  else
    j = nlohmann::json{{"kind", "uniform"}, {"lo", d.a}, {"hi", d.b}};
}

void from_json(const nlohmann::json& j, DistSpec& d) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    d = DistSpec::fixed(j.at("value").get<double>());
  } else if (kind == "uniform") {
    d = DistSpec::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
  } else {
    throw config_error("unknown distribution kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const RenderParams& p) {
  j = nlohmann::json{{"peak_brightness", p.peak_brightness},
                     {"atom_sigma", p.atom_sigma},
                     {"background", p.background}};
}

void from_json(const nlohmann::json& j, RenderParams& p) {
  j.at("peak_brightness").get_to(p.peak_brightness);
  j.at("atom_sigma").get_to(p.atom_sigma);
  j.at("background").get_to(p.background);
}

void to_json(nlohmann::json& j, const GenConfig& cfg) {
  j = nlohmann::json{{"width", cfg.width},
                     {"height", cfg.height},
                     {"r_min", cfg.r_min},
                     {"perlin_cell", cfg.perlin_cell},
                     {"perlin_threshold", cfg.perlin_threshold},
                     {"clean_render", cfg.clean_render},
                     {"noise", cfg.noise},
                     {"clamp_noisy", cfg.clamp_noisy}};
}

void from_json(const nlohmann::json& j, GenConfig& cfg) {
  j.at("width").get_to(cfg.width);
  j.at("height").get_to(cfg.height);
  j.at("r_min").get_to(cfg.r_min);
  j.at("perlin_cell").get_to(cfg.perlin_cell);
  j.at("perlin_threshold").get_to(cfg.perlin_threshold);
  j.at("clean_render").get_to(cfg.clean_render);
  j.at("noise").get_to(cfg.noise);
  j.at("clamp_noisy").get_to(cfg.clamp_noisy);
}

// ---- dataset directory ----

void write_dataset(const std::string& dir, const GenConfig& cfg, int count,
                   uint64_t base_seed, bool export_pgm, int threads) {
  if (count < 0) throw config_error("write_dataset: negative sample count");
  fs::create_directories(fs::path(dir) / "samples");
  const Rng base(base_seed);

  nlohmann::json index;
  index["format"] = "nucdataset1";
  index["config"] = cfg;
  index["base_seed"] = base_seed;
  index["samples"] = nlohmann::json::array();

  std::vector<nlohmann::json> entries(count);
  parallel_for(count, threads, [&](int64_t i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%05d", static_cast<int>(i));
    const uint64_t seed = base.fork(static_cast<uint64_t>(i)).seed();
    const Sample s = make_sample(cfg, seed);

    const std::string rel = std::string("samples/") + id;
    write_tensor((fs::path(dir) / (rel + ".noisy.nt")).string(), s.noisy, "noisy");
    write_tensor((fs::path(dir) / (rel + ".gt.nt")).string(), s.gt, "gt");
    nlohmann::json atoms;
    atoms["image_size"] = {s.atoms.width, s.atoms.height};
    atoms["positions"] = s.atoms.positions;
    {
      std::ofstream f(fs::path(dir) / (rel + ".atoms.json"), std::ios::trunc);
      f << atoms.dump(2) << "\n";
    }
    if (export_pgm) {
      write_pgm((fs::path(dir) / (rel + ".noisy.pgm")).string(),
                clamp_values(s.noisy, 0.0, 255.0));
      write_pgm((fs::path(dir) / (rel + ".gt.pgm")).string(), s.gt);
    }
    nlohmann::json e;
    e["id"] = id;
    e["seed"] = seed;
    e["noisy"] = rel + ".noisy.nt";
    e["gt"] = rel + ".gt.nt";
    e["atoms"] = rel + ".atoms.json";
    entries[i] = std::move(e);
  });
  for (auto& e : entries) index["samples"].push_back(std::move(e));

  std::ofstream f(fs::path(dir) / "index.json", std::ios::trunc);
  if (!f) throw io_error("cannot write '" + dir + "/index.json'");
  f << index.dump(2) << "\n";
}

DatasetIndex read_dataset_index(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "index.json");
  if (!f) throw io_error("'" + dir + "': missing index.json");
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "nucdataset1")
    throw io_error("'" + dir + "/index.json': not a dataset index");

  DatasetIndex idx;
  idx.config = j.at("config").get<GenConfig>();
  for (const auto& e : j.at("samples")) {
    DatasetEntry d;
    d.id = e.at("id").get<std::string>();
    d.seed = e.at("seed").get<uint64_t>();
    d.noisy_path = e.at("noisy").get<std::string>();
    d.gt_path = e.at("gt").get<std::string>();
    d.atoms_path = e.at("atoms").get<std::string>();
    idx.entries.push_back(std::move(d));
  }
  return idx;
}

Sample load_sample(const std::string& dir, const DatasetEntry& e) {
  Sample s;
  s.seed = e.seed;
  s.noisy = read_tensor((fs::path(dir) / e.noisy_path).string()).tensor;
  s.gt = read_tensor((fs::path(dir) / e.gt_path).string()).tensor;
  std::ifstream f(fs::path(dir) / e.atoms_path);
  if (f) {
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (!j.is_discarded()) {
      s.atoms.width = j.at("image_size")[0].get<int>();
      s.atoms.height = j.at("image_size")[1].get<int>();
      s.atoms.positions =
          j.at("positions").get<std::vector<std::array<double, 2>>>();
    }
  }
  return s;
}

}  // namespace nuc
