#include "nuc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nuc/baselines.hpp"
#include "nuc/checkpoint.hpp"
#include "nuc/datagen.hpp"
#include "nuc/metrics.hpp"
#include "nuc/noisemodel.hpp"
#include "nuc/tensor_io.hpp"
#include "nuc/trainer.hpp"

namespace fs = std::filesystem;

namespace nuc {

namespace {

// Options may come from a JSON config file; explicit flags win.
void merge_config(CLI::App* cmd, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream f(config_path);
  if (!f) throw io_error("cannot open config '" + config_path + "'");
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw config_error("config '" + config_path + "' is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt)
      throw config_error("config '" + config_path + "': unknown option '" + key + "'");
    if (opt->count() > 0) continue;  // explicit flag wins
    if (value.is_string())
      opt->add_result(value.get<std::string>());
    else
      opt->add_result(value.dump());
    opt->run_callback();
  }
}

void write_resolved(const fs::path& dir, const nlohmann::json& resolved) {
  fs::create_directories(dir);
  std::ofstream f(dir / "resolved.json", std::ios::trunc);
  if (!f) throw io_error("cannot write '" + (dir / "resolved.json").string() + "'");
  f << resolved.dump(2) << "\n";
}

std::pair<int, int> parse_size(const std::string& size) {
  const auto x = size.find('x');
  if (x == std::string::npos)
    throw config_error("size must be HxW, got '" + size + "'");
  const int h = std::stoi(size.substr(0, x));
  const int w = std::stoi(size.substr(x + 1));
  if (h < 2 || w < 2) throw config_error("size must be at least 2x2, got '" + size + "'");
  return {h, w};
}

NoiseParams resolve_noise_params(const std::string& spec) {
  if (spec == "builtin-paper") return NoiseParams::builtin_paper();
  return read_noise_params(spec);
}

void print_report_table(const std::vector<MetricReport>& reports) {
  std::printf("%-12s %10s %8s %8s\n", "method", "PSNR(dB)", "SSIM", "IoU");
  for (const auto& r : reports)
    std::printf("%-12s %10.2f %8.4f %8.4f\n", r.method.c_str(), r.psnr_db, r.ssim,
                r.iou);
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"HRTEM nucleation image denoising toolkit"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "synthesize a noisy/clean dataset");
  struct {
    std::string out, size = "256x256", noise = "builtin-paper", config;
    int count = -1;
    double rmin = 4.0;
    int perlin_cell = 64;
    double perlin_threshold = 0.0;
    double peak_lo = 120.0, peak_hi = 220.0;
    double sigma_lo = 1.0, sigma_hi = 1.6;
    double bg_lo = 5.0, bg_hi = 20.0;
    uint64_t seed = 0;
    int threads = 1;
    bool pgm = false, clamp = false;
  } g;
  gen->add_option("--out", g.out, "output dataset directory")->required();
  gen->add_option("--count", g.count, "number of samples")->required();
  gen->add_option("--size", g.size, "image size HxW (default 256x256)");
  gen->add_option("--rmin", g.rmin, "minimum atom spacing in px");
  gen->add_option("--noise-params", g.noise, "noise parameter JSON file or 'builtin-paper'");
  gen->add_option("--perlin-cell", g.perlin_cell, "vacuum mask lattice cell in px");
  gen->add_option("--perlin-threshold", g.perlin_threshold, "vacuum mask threshold");
  gen->add_option("--peak-lo", g.peak_lo, "clean render: min atom peak");
  gen->add_option("--peak-hi", g.peak_hi, "clean render: max atom peak");
  gen->add_option("--atom-sigma-lo", g.sigma_lo, "clean render: min atom sigma (px)");
  gen->add_option("--atom-sigma-hi", g.sigma_hi, "clean render: max atom sigma (px)");
  gen->add_option("--bg-lo", g.bg_lo, "clean render: min background");
  gen->add_option("--bg-hi", g.bg_hi, "clean render: max background");
  gen->add_option("--seed", g.seed, "RNG seed");
  gen->add_option("--threads", g.threads, "worker threads (0 = auto)");
  gen->add_flag("--pgm", g.pgm, "also export PGM images for viewing");
  gen->add_flag("--clamp", g.clamp, "clamp noisy images to [0,255]");
  gen->add_option("--config", g.config, "JSON config file (flags win)");
  gen->callback([&]() {
    merge_config(gen, g.config);
    if (g.count < 0) throw config_error("generate: --count must be >= 0");
    auto [h, w] = parse_size(g.size);
    GenConfig cfg;
    cfg.height = h;
    cfg.width = w;
    cfg.r_min = g.rmin;
    cfg.perlin_cell = g.perlin_cell;
    cfg.perlin_threshold = g.perlin_threshold;
    cfg.clean_render.peak_brightness = DistSpec::uniform(g.peak_lo, g.peak_hi);
    cfg.clean_render.atom_sigma = DistSpec::uniform(g.sigma_lo, g.sigma_hi);
    cfg.clean_render.background = DistSpec::uniform(g.bg_lo, g.bg_hi);
    cfg.noise = resolve_noise_params(g.noise);
    cfg.clamp_noisy = g.clamp;

    write_dataset(g.out, cfg, g.count, g.seed, g.pgm, g.threads);
    nlohmann::json resolved;
    resolved["subcommand"] = "generate";
    resolved["count"] = g.count;
    resolved["seed"] = g.seed;
    resolved["config"] = cfg;
    write_resolved(g.out, resolved);
  });

  // ---- calibrate ----
  auto* cal = app.add_subcommand("calibrate", "fit noise parameters from vacuum sequences");
  struct {
    std::string in, out, config;
  } c;
  cal->add_option("--in", c.in, "directory of vacuum sequences")->required();
  cal->add_option("--out", c.out, "output parameter JSON path")->required();
  cal->add_option("--config", c.config, "JSON config file (flags win)");
  cal->callback([&]() {
    merge_config(cal, c.config);
    const auto sequences = read_sequences_dir(c.in);
    CalibrationReport rep;
    const NoiseParams fitted = calibrate(sequences, &rep);
    fs::path out(c.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_noise_params(c.out, fitted);

    nlohmann::json jr;
    jr["intensities"] = rep.intensities;
    jr["sigma_p"] = rep.sigma_p;
    jr["sigma_c"] = rep.sigma_c;
    jr["fit_residuals"] = rep.fit_residuals;
    fs::path report_path = out.parent_path() / (out.stem().string() + ".report.json");
    std::ofstream rf(report_path, std::ios::trunc);
    if (!rf) throw io_error("cannot write '" + report_path.string() + "'");
    rf << jr.dump(2) << "\n";

    nlohmann::json resolved;
    resolved["subcommand"] = "calibrate";
    resolved["in"] = c.in;
    resolved["out"] = c.out;
    resolved["fitted"] = fitted;
    write_resolved(out.has_parent_path() ? out.parent_path() : fs::path("."), resolved);
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train the denoising network");
  struct {
    std::string data, out, preset, variant = "full", config, val_data;
    int epochs = -1, batch = -1, n = -1, channels = -1, r = -1;
    double lr = -1.0, beta1 = -1.0, beta2 = -1.0, eps = -1.0, grad_clip = -1.0;
    int checkpoint_every = 0, eval_every = 0;
    uint64_t seed = 0;
    int threads = 1;
  } t;
  tr->add_option("--data", t.data, "training dataset directory")->required();
  tr->add_option("--out", t.out, "output directory (checkpoints, logs)")->required();
  tr->add_option("--preset", t.preset, "recipe preset: desk | paper");
  tr->add_option("--variant", t.variant, "arch variant: full | v1..v5");
  tr->add_option("--epochs", t.epochs, "epoch count");
  tr->add_option("--lr", t.lr, "learning rate");
  tr->add_option("--batch", t.batch, "mini-batch size");
  tr->add_option("--n", t.n, "enhancement block count");
  tr->add_option("--channels", t.channels, "feature channel count C");
  tr->add_option("--r", t.r, "attention reduction ratio");
  tr->add_option("--beta1", t.beta1, "Adam beta1");
  tr->add_option("--beta2", t.beta2, "Adam beta2");
  tr->add_option("--eps", t.eps, "Adam epsilon");
  tr->add_option("--grad-clip", t.grad_clip, "elementwise gradient clip (0 = off)");
  tr->add_option("--checkpoint-every", t.checkpoint_every, "epochs between checkpoints");
  tr->add_option("--val-data", t.val_data, "held-out dataset for periodic evaluation");
  tr->add_option("--eval-every", t.eval_every, "epochs between val evaluations");
  tr->add_option("--seed", t.seed, "RNG seed");
  tr->add_option("--threads", t.threads, "worker threads (0 = auto)");
  tr->add_option("--config", t.config, "JSON config file (flags win)");
  tr->callback([&]() {
    merge_config(tr, t.config);
    TrainConfig cfg;
    if (t.preset == "desk")
      cfg = TrainConfig::desk_preset();
    else if (t.preset == "paper" || t.preset.empty())
      cfg = TrainConfig::paper_preset();
    else
      throw config_error("unknown preset '" + t.preset + "'");
    const int n = t.n > 0 ? t.n : cfg.arch.n;
    const int C = t.channels > 0 ? t.channels : cfg.arch.C;
    const int r = t.r > 0 ? t.r : cfg.arch.r;
    cfg.arch = ArchConfig::variant(t.variant, n, C, r);
    if (t.epochs >= 0) cfg.epochs = t.epochs;
    if (t.lr > 0) cfg.lr = t.lr;
    if (t.batch > 0) cfg.batch_size = t.batch;
    if (t.beta1 >= 0) cfg.beta1 = t.beta1;
    if (t.beta2 >= 0) cfg.beta2 = t.beta2;
    if (t.eps > 0) cfg.adam_eps = t.eps;
    if (t.grad_clip >= 0) cfg.grad_clip = t.grad_clip;
    cfg.checkpoint_every = t.checkpoint_every;
    cfg.dataset_dir = t.data;
    cfg.out_dir = t.out;
    cfg.val_dataset_dir = t.val_data;
    cfg.eval_every = t.eval_every;
    cfg.seed = t.seed;
    cfg.threads = t.threads;

    nlohmann::json resolved;
    resolved["subcommand"] = "train";
    resolved["data"] = t.data;
    resolved["preset"] = t.preset.empty() ? "paper" : t.preset;
    resolved["variant"] = t.variant;
    resolved["arch"] = cfg.arch;
    resolved["epochs"] = cfg.epochs;
    resolved["lr"] = cfg.lr;
    resolved["batch"] = cfg.batch_size;
    resolved["beta1"] = cfg.beta1;
    resolved["beta2"] = cfg.beta2;
    resolved["adam_eps"] = cfg.adam_eps;
    resolved["grad_clip"] = cfg.grad_clip;
    resolved["checkpoint_every"] = cfg.checkpoint_every;
    resolved["seed"] = cfg.seed;
    write_resolved(t.out, resolved);

    train(cfg);
  });

  // ---- denoise ----
  auto* dn = app.add_subcommand("denoise", "denoise one image (model or baseline)");
  struct {
    std::string in, out, model, method = "scgn", config;
    double sigma = 1.5;
    uint64_t seed = 0;
  } d;
  dn->add_option("--in", d.in, "input image (.nt container or .pgm)")->required();
  dn->add_option("--out", d.out, "output image (.nt or .pgm by extension)")->required();
  dn->add_option("--model", d.model, "checkpoint directory (scgn method)");
  dn->add_option("--method", d.method, "scgn | gaussian");
  dn->add_option("--sigma", d.sigma, "gaussian baseline sigma");
  dn->add_option("--seed", d.seed, "RNG seed (unused, accepted for uniformity)");
  dn->add_option("--config", d.config, "JSON config file (flags win)");
  dn->callback([&]() {
    merge_config(dn, d.config);
    const Tensor noisy = read_image_any(d.in);
    Tensor out;
    nlohmann::json resolved;
    resolved["subcommand"] = "denoise";
    resolved["in"] = d.in;
    resolved["out"] = d.out;
    resolved["method"] = d.method;
    if (d.method == "gaussian") {
      out = gaussian_filter(noisy, GaussianFilterSpec::from_sigma(d.sigma));
      resolved["sigma"] = d.sigma;
    } else if (d.method == "scgn") {
      if (d.model.empty()) throw config_error("denoise: --model required for scgn");
      LoadedCheckpoint ck = load_checkpoint(d.model, false);
      out = run_method(EvalMethod::scgn_model(ck.model), noisy, noisy);
      resolved["model"] = d.model;
      resolved["arch"] = ck.meta.arch;
    } else {
      throw config_error("denoise: unknown method '" + d.method + "'");
    }
    const fs::path out_path(d.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    if (out_path.extension() == ".pgm")
      write_pgm(d.out, clamp_values(out, 0.0, 255.0));
    else
      write_tensor(d.out, out, "denoised");
    write_resolved(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   resolved);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate methods on a dataset");
  struct {
    std::string data, model, out, config;
    double gaussian_sigma = 0.0;
    double iou_threshold = 127.5;
    bool debug_identity = false, debug_gt = false;
    int threads = 1;
    uint64_t seed = 0;
  } e;
  ev->add_option("--data", e.data, "dataset directory (with ground truth)")->required();
  ev->add_option("--model", e.model, "checkpoint directory for the scgn row");
  ev->add_option("--gaussian-sigma", e.gaussian_sigma,
                 "add a gaussian baseline row with this sigma");
  ev->add_option("--iou-threshold", e.iou_threshold, "binarization threshold for IoU");
  ev->add_flag("--debug-identity", e.debug_identity, "add a pass-through row");
  ev->add_flag("--debug-gt", e.debug_gt, "add a ground-truth-as-prediction row");
  ev->add_option("--out", e.out, "metric report JSON path")->required();
  ev->add_option("--threads", e.threads, "worker threads (0 = auto)");
  ev->add_option("--seed", e.seed, "RNG seed (unused, accepted for uniformity)");
  ev->add_option("--config", e.config, "JSON config file (flags win)");
  ev->callback([&]() {
    merge_config(ev, e.config);
    std::vector<MetricReport> reports;
    LoadedCheckpoint ck;
    if (e.gaussian_sigma > 0.0)
      reports.push_back(evaluate(EvalMethod::gaussian_baseline(e.gaussian_sigma), e.data,
                                 e.iou_threshold, e.threads));
    if (!e.model.empty()) {
      ck = load_checkpoint(e.model, false);
      reports.push_back(
          evaluate(EvalMethod::scgn_model(ck.model), e.data, e.iou_threshold, e.threads));
    }
    if (e.debug_identity)
      reports.push_back(
          evaluate(EvalMethod::identity(), e.data, e.iou_threshold, e.threads));
    if (e.debug_gt)
      reports.push_back(
          evaluate(EvalMethod::gt_oracle(), e.data, e.iou_threshold, e.threads));
    if (reports.empty())
      throw usage_error("eval: no method selected (--model, --gaussian-sigma, --debug-*)");

    print_report_table(reports);
    const fs::path out_path(e.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r);
    std::ofstream f(e.out, std::ios::trunc);
    if (!f) throw io_error("cannot write '" + e.out + "'");
    f << j.dump(2) << "\n";
    nlohmann::json resolved;
    resolved["subcommand"] = "eval";
    resolved["data"] = e.data;
    resolved["model"] = e.model;
    resolved["gaussian_sigma"] = e.gaussian_sigma;
    resolved["iou_threshold"] = e.iou_threshold;
    write_resolved(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   resolved);
  });

  // ---- localize ----
  auto* lo = app.add_subcommand("localize", "binarize and extract atom centroids");
  struct {
    std::string in, out, config;
    double threshold = 127.5;
    int min_px = 1;
    uint64_t seed = 0;
  } l;
  lo->add_option("--in", l.in, "input image (.nt or .pgm)")->required();
  lo->add_option("--out", l.out, "output directory")->required();
  lo->add_option("--threshold", l.threshold, "binarization threshold in (0,255)");
  lo->add_option("--min-px", l.min_px, "discard components smaller than this");
  lo->add_option("--seed", l.seed, "RNG seed (unused, accepted for uniformity)");
  lo->add_option("--config", l.config, "JSON config file (flags win)");
  lo->callback([&]() {
    merge_config(lo, l.config);
    const Tensor image = read_image_any(l.in);
    const LocalizationResult res = localize(image, l.threshold, l.min_px);
    fs::create_directories(l.out);
    nlohmann::json j;
    j["count"] = res.centroids.size();
    j["centroids"] = res.centroids;
    std::ofstream f(fs::path(l.out) / "centroids.json", std::ios::trunc);
    if (!f) throw io_error("cannot write centroids.json in '" + l.out + "'");
    f << j.dump(2) << "\n";
    Tensor mask255 = detach(res.mask);
    for (auto& v : mask255.data_mut()) v *= 255.0f;
    write_pgm((fs::path(l.out) / "mask.pgm").string(), mask255);

    nlohmann::json resolved;
    resolved["subcommand"] = "localize";
    resolved["in"] = l.in;
    resolved["threshold"] = l.threshold;
    resolved["min_px"] = l.min_px;
    write_resolved(l.out, resolved);
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() != 0) {
      std::cerr << "error: usage: " << err.what() << "\n";
      return 1;
    }
    return app.exit(err);  // --help
  } catch (const shape_error& err) {
    std::cerr << "error: dimension: " << err.what() << "\n";
    return 1;
  } catch (const config_error& err) {
    std::cerr << "error: config: " << err.what() << "\n";
    return 1;
  } catch (const usage_error& err) {
    std::cerr << "error: usage: " << err.what() << "\n";
    return 1;
  } catch (const io_error& err) {
    std::cerr << "error: io: " << err.what() << "\n";
    return 1;
  } catch (const fit_error& err) {
    std::cerr << "error: fit: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: internal: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nuc
