#include "nuc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nuc/checkpoint.hpp"
#include "nuc/datagen.hpp"

namespace fs = std::filesystem;

namespace nuc {

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.epochs = 100;
  c.lr = 2e-4;
  c.batch_size = 6;
  c.arch = ArchConfig{};  // n=8, C=64
  return c;
}

TrainConfig TrainConfig::desk_preset() {
  TrainConfig c;
  c.epochs = 20;
  c.lr = 2e-4;
  c.batch_size = 6;
  c.arch.n = 2;
  c.arch.C = 16;
  c.arch.r = 4;
  return c;
}

void TrainConfig::validate() const {
  validate_arch(arch);
  if (epochs < 0) throw config_error("train: negative epoch count");
  if (lr <= 0.0) throw config_error("train: learning rate must be positive");
  if (batch_size < 1) throw config_error("train: batch size must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw config_error("train: Adam betas must lie in [0,1)");
  if (adam_eps <= 0.0) throw config_error("train: Adam eps must be positive");
}

void adam_step(ModelParams& params, const GradMap& grads, AdamState& state,
               const TrainConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for_each_param(params, [&](const std::string& name, Tensor& p) {
    const auto it = grads.find(name);
    if (it == grads.end())
      throw usage_error("adam: missing gradient for parameter '" + name + "'");
    const auto& g = it->second;
    auto& pv = p.data_mut();
    if (g.size() != pv.size())
      throw shape_error("adam: gradient size mismatch for '" + name + "'");

    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(pv.size(), 0.0f);
    if (v.empty()) v.assign(pv.size(), 0.0f);

    for (size_t i = 0; i < pv.size(); ++i) {
      double gi = static_cast<double>(g[i]);
      if (!std::isfinite(gi))
        throw usage_error("adam: non-finite gradient in '" + name + "' at step " +
                          std::to_string(state.t));
      if (cfg.grad_clip > 0.0)
        gi = std::min(cfg.grad_clip, std::max(-cfg.grad_clip, gi));
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      pv[i] = static_cast<float>(pv[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  });
}

namespace {

struct Pair {
  Tensor noisy_n, gt_n;  // pre-normalized to [0,1]
};

std::vector<Pair> load_pairs(const std::string& dir) {
  const DatasetIndex idx = read_dataset_index(dir);
  std::vector<Pair> out;
  out.reserve(idx.entries.size());
  for (const auto& e : idx.entries) {
    Sample s = load_sample(dir, e);
    out.push_back({Tensor::from_data(s.noisy.shape(), s.noisy.data()),
                   Tensor::from_data(s.gt.shape(), s.gt.data())});
    for (auto& v : out.back().noisy_n.data_mut()) v /= 255.0f;
    for (auto& v : out.back().gt_n.data_mut()) v /= 255.0f;
  }
  return out;
}

// Forward + backward for one sample on a private parameter clone; gradients
// are merged across the batch in sample-index order afterwards.
struct SampleGrad {
  GradMap grads;
  double loss = 0.0;
};

SampleGrad sample_pass(const ModelParams& master, const Pair& pair, double loss_scale) {
  ModelParams local = clone_params(master);
  TensorT<float> pred = scgn_forward(pair.noisy_n, local);
  TensorT<float> loss = l1_loss(pred, pair.gt_n);
  const double raw = static_cast<double>(loss.item());
  if (!std::isfinite(raw)) throw usage_error("train: non-finite loss");
  backward(mul_scalar(loss, loss_scale));

  SampleGrad out;
  out.loss = raw;
  for_each_param(local, [&](const std::string& name, Tensor& t) {
    out.grads.emplace(name, t.has_grad() ? t.grad() : std::vector<float>(t.numel(), 0.0f));
  });
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  TrainResult res;
  res.model = init_model(cfg.arch, cfg.seed);

  if (cfg.epochs == 0) {
    if (!cfg.out_dir.empty()) {
      fs::create_directories(cfg.out_dir);
      CheckpointMeta meta{cfg.arch, cfg.seed, 0, {}};
      save_checkpoint((fs::path(cfg.out_dir) / "model").string(), res.model, meta);
      std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl", std::ios::trunc);
    }
    return res;
  }

  std::vector<Pair> pairs = load_pairs(cfg.dataset_dir);
  if (pairs.empty()) throw config_error("train: dataset '" + cfg.dataset_dir + "' is empty");
  if (pairs[0].noisy_n.dim(1) < 2 || pairs[0].noisy_n.dim(2) < 2)
    throw config_error("train: images must be at least 2x2");

  std::ofstream log_file;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    log_file.open(fs::path(cfg.out_dir) / "train_log.jsonl", std::ios::trunc);
  }

  AdamState adam;
  Rng rng(cfg.seed);
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Seeded Fisher-Yates, independent of drawing history.
    Rng shuffle_rng = rng.fork(static_cast<uint64_t>(epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const int bsz = static_cast<int>(end - start);
      std::vector<SampleGrad> sg(bsz);
      parallel_for(bsz, cfg.threads, [&](int64_t bi) {
        sg[bi] = sample_pass(res.model, pairs[order[start + bi]], 1.0 / bsz);
      });

      GradMap total;
      for (int bi = 0; bi < bsz; ++bi) {
        loss_sum += sg[bi].loss;
        for (auto& [name, g] : sg[bi].grads) {
          auto& acc = total.try_emplace(name, g.size(), 0.0f).first->second;
          for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        }
      }
      adam_step(res.model, total, adam, cfg);
    }

    const double epoch_mean = loss_sum / static_cast<double>(order.size());
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.epoch_loss.push_back(epoch_mean);
    res.log.wall_s.push_back(wall);

    nlohmann::json line;
    line["epoch"] = epoch;
    line["mean_l1"] = epoch_mean;
    line["wall_s"] = wall;
    if (cfg.eval_every > 0 && !cfg.val_dataset_dir.empty() &&
        epoch % cfg.eval_every == 0) {
      MetricReport rep = evaluate(EvalMethod::scgn_model(res.model),
                                  cfg.val_dataset_dir, 127.5, cfg.threads);
      res.log.evals.emplace_back(epoch, rep);
      line["val_psnr_db"] = rep.psnr_db;
      line["val_ssim"] = rep.ssim;
      line["val_iou"] = rep.iou;
    }
    if (log_file) {
      log_file << line.dump() << "\n";
      log_file.flush();
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs) {
      char name[40];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d", epoch);
      CheckpointMeta meta{cfg.arch, cfg.seed, epoch, res.log.epoch_loss};
      save_checkpoint((fs::path(cfg.out_dir) / name).string(), res.model, meta);
    }
  }

  if (!cfg.out_dir.empty()) {
    CheckpointMeta meta{cfg.arch, cfg.seed, cfg.epochs, res.log.epoch_loss};
    save_checkpoint((fs::path(cfg.out_dir) / "model").string(), res.model, meta);
  }
  return res;
}

Tensor run_method(const EvalMethod& method, const Tensor& noisy, const Tensor& gt) {
  switch (method.kind) {
    case EvalMethod::Kind::scgn: {
      if (!method.model) throw usage_error("evaluate: scgn method without a model");
      Tensor in = Tensor::from_data(noisy.shape(), noisy.data());
      for (auto& v : in.data_mut()) v /= 255.0f;
      Tensor out = scgn_forward(in, *method.model);
      Tensor scaled = detach(out);
      for (auto& v : scaled.data_mut()) v *= 255.0f;
      return scaled;
    }
    case EvalMethod::Kind::gaussian:
      return gaussian_filter(noisy, method.gaussian);
    case EvalMethod::Kind::identity:
      return detach(noisy);
    case EvalMethod::Kind::gt_oracle:
      return detach(gt);
  }
  throw usage_error("evaluate: unknown method");
}

MetricReport evaluate(const EvalMethod& method, const std::string& dataset_dir,
                      double iou_threshold, int threads) {
  const DatasetIndex idx = read_dataset_index(dataset_dir);
  if (idx.entries.empty())
    throw usage_error("evaluate: dataset '" + dataset_dir + "' has no samples");

  // Evaluation never needs gradients.
  ModelParams frozen;
  EvalMethod local = method;
  if (method.kind == EvalMethod::Kind::scgn) {
    frozen = clone_params(*method.model);
    for_each_param(frozen, [](const std::string&, Tensor& t) { t.set_requires_grad(false); });
    local.model = &frozen;
  }

  MetricReport report;
  switch (method.kind) {
    case EvalMethod::Kind::scgn: {
      report.method = "scgn";
      const auto& a = frozen.arch;
      report.params = "n=" + std::to_string(a.n) + ",C=" + std::to_string(a.C);
      break;
    }
    case EvalMethod::Kind::gaussian:
      report.method = "gaussian";
      report.params = "sigma=" + std::to_string(method.gaussian.sigma);
      break;
    case EvalMethod::Kind::identity:
      report.method = "identity";
      break;
    case EvalMethod::Kind::gt_oracle:
      report.method = "gt-oracle";
      break;
  }
  report.dataset_id = dataset_dir;
  report.per_sample.resize(idx.entries.size());

  std::vector<int> both_empty(idx.entries.size(), 0);
  parallel_for(static_cast<int64_t>(idx.entries.size()), threads, [&](int64_t i) {
    const Sample s = load_sample(dataset_dir, idx.entries[i]);
    const Tensor pred = clamp_values(run_method(local, s.noisy, s.gt), 0.0, 255.0);
    SampleMetrics m;
    m.psnr_db = psnr(pred, s.gt);
    m.ssim = ssim(pred, s.gt);
    const Tensor pm = binarize(pred, iou_threshold);
    const Tensor gm = binarize(s.gt, iou_threshold);
    m.iou = iou(pm, gm);
    bool pe = true, ge = true;
    for (float v : pm.data())
      if (v > 0.5f) { pe = false; break; }
    for (float v : gm.data())
      if (v > 0.5f) { ge = false; break; }
    both_empty[i] = (pe && ge) ? 1 : 0;
    report.per_sample[i] = m;
  });
  for (int b : both_empty) report.iou_both_empty += b;
  finalize_report(report);
  return report;
}

}  // namespace nuc
