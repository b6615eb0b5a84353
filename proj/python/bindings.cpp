#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nuc/baselines.hpp"
#include "nuc/checkpoint.hpp"
#include "nuc/datagen.hpp"
#include "nuc/metrics.hpp"
#include "nuc/noisemodel.hpp"
#include "nuc/scgn.hpp"
#include "nuc/tensor_io.hpp"
#include "nuc/trainer.hpp"

namespace py = pybind11;
using namespace nuc;

namespace {

// numpy [H,W] or [C,H,W] float array -> Tensor (copies).
Tensor tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  std::vector<int> shape;
  if (arr.ndim() == 2) {
    shape = {1, static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1))};
  } else if (arr.ndim() == 3) {
    shape = {static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
             static_cast<int>(arr.shape(2))};
  } else {
    throw shape_error("expected a 2-d [H,W] or 3-d [C,H,W] array");
  }
  std::vector<float> data(arr.data(), arr.data() + arr.size());
  return Tensor::from_data(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  // Single-channel images come back as [H,W].
  if (shape.size() == 3 && shape[0] == 1) shape.erase(shape.begin());
  py::array_t<float> arr(shape);
  std::copy(t.data().begin(), t.data().end(), arr.mutable_data());
  return arr;
}

NoiseParams noise_from_dict(double slope, double intercept, double sigma_c) {
  return {slope, intercept, sigma_c};
}

// In-memory model handle for forward passes from python.
struct Model {
  ModelParams params;

  static Model init(int n, int C, int r, uint64_t seed, const std::string& variant) {
    Model m;
    m.params = init_model(ArchConfig::variant(variant, n, C, r), seed);
    for_each_param(m.params, [](const std::string&, Tensor& t) {
      t.set_requires_grad(false);
    });
    return m;
  }

  static Model load(const std::string& dir) {
    Model m;
    m.params = load_checkpoint(dir, false).model;
    return m;
  }

  void save(const std::string& dir) {
    CheckpointMeta meta{params.arch, 0, 0, {}};
    save_checkpoint(dir, params, meta);
  }

  // 0..255 image in, 0..255 image out (unclamped).
  py::array_t<float> forward(const py::array_t<float, py::array::c_style | py::array::forcecast>& image) {
    Tensor in = tensor_from_array(image);
    for (auto& v : in.data_mut()) v /= 255.0f;
    Tensor out = scgn_forward(in, params);
    Tensor scaled = detach(out);
    for (auto& v : scaled.data_mut()) v *= 255.0f;
    return array_from_tensor(scaled);
  }

  int64_t param_count() { return nuc::param_count(params); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HRTEM nucleation image denoising toolkit (native core)";

  py::register_exception<shape_error>(m, "ShapeError");
  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<usage_error>(m, "UsageError");
  py::register_exception<io_error>(m, "IoError");
  py::register_exception<fit_error>(m, "FitError");

  m.def(
      "poisson_disk",
      [](int w, int h, double r_min, uint64_t seed) {
        const AtomSet a = poisson_disk(w, h, r_min, seed);
        py::array_t<double> out({static_cast<py::ssize_t>(a.positions.size()),
                                 static_cast<py::ssize_t>(2)});
        auto view = out.mutable_unchecked<2>();
        for (size_t i = 0; i < a.positions.size(); ++i) {
          view(i, 0) = a.positions[i][0];
          view(i, 1) = a.positions[i][1];
        }
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("r_min") = 4.0, py::arg("seed") = 0,
      "Blue-noise atom positions with pairwise distance >= r_min, as an (N,2) array");

  m.def(
      "perlin_mask",
      [](int w, int h, int cell, double threshold, uint64_t seed) {
        return array_from_tensor(perlin_mask(w, h, cell, threshold, seed));
      },
      py::arg("width"), py::arg("height"), py::arg("cell") = 64,
      py::arg("threshold") = 0.0, py::arg("seed") = 0,
      "Binarized gradient-lattice noise mask (1 = material, 0 = vacuum)");

  m.def(
      "render_ground_truth",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& positions,
         int w, int h) {
        AtomSet atoms;
        atoms.width = w;
        atoms.height = h;
        auto view = positions.unchecked<2>();
        for (py::ssize_t i = 0; i < view.shape(0); ++i)
          atoms.positions.push_back({view(i, 0), view(i, 1)});
        return array_from_tensor(render_atoms(atoms, RenderParams::ground_truth(), 0));
      },
      py::arg("positions"), py::arg("width"), py::arg("height"),
      "Render atoms as peak-255 sigma-0.75 Gaussians on a black background");

  m.def(
      "make_sample",
      [](int size, double r_min, uint64_t seed) {
        GenConfig cfg;
        cfg.width = cfg.height = size;
        cfg.r_min = r_min;
        Sample s = make_sample(cfg, seed);
        py::dict out;
        out["noisy"] = array_from_tensor(s.noisy);
        out["gt"] = array_from_tensor(s.gt);
        py::array_t<double> atoms({static_cast<py::ssize_t>(s.atoms.positions.size()),
                                   static_cast<py::ssize_t>(2)});
        auto view = atoms.mutable_unchecked<2>();
        for (size_t i = 0; i < s.atoms.positions.size(); ++i) {
          view(i, 0) = s.atoms.positions[i][0];
          view(i, 1) = s.atoms.positions[i][1];
        }
        out["atoms"] = atoms;
        return out;
      },
      py::arg("size") = 256, py::arg("r_min") = 4.0, py::arg("seed") = 0,
      "One (noisy, gt, atoms) sample with default generation settings");

  m.def(
      "sigma_p",
      [](double intensity, double slope, double intercept, double sigma_c) {
        return sigma_p(intensity, noise_from_dict(slope, intercept, sigma_c));
      },
      py::arg("intensity"), py::arg("slope") = 0.03583, py::arg("intercept") = 1.379,
      py::arg("sigma_c") = 0.6641, "Pointwise noise sigma at a clean intensity");

  m.def(
      "add_noise",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& clean,
         double slope, double intercept, double sigma_c, uint64_t seed) {
        return array_from_tensor(
            add_noise(tensor_from_array(clean), noise_from_dict(slope, intercept, sigma_c), seed));
      },
      py::arg("clean"), py::arg("slope") = 0.03583, py::arg("intercept") = 1.379,
      py::arg("sigma_c") = 0.6641, py::arg("seed") = 0,
      "Column noise plus signal-dependent pointwise noise (unclamped)");

  m.def(
      "calibrate",
      [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>&
             sequences) {
        std::vector<VacuumSequence> seqs;
        for (const auto& frames : sequences) {
          if (frames.ndim() != 3)
            throw shape_error("each sequence must be a [F,H,W] array");
          VacuumSequence seq;
          double mean = 0.0;
          const int F = static_cast<int>(frames.shape(0));
          const int H = static_cast<int>(frames.shape(1));
          const int W = static_cast<int>(frames.shape(2));
          for (int f = 0; f < F; ++f) {
            std::vector<float> data(static_cast<size_t>(H) * W);
            std::copy(frames.data() + static_cast<size_t>(f) * H * W,
                      frames.data() + static_cast<size_t>(f + 1) * H * W, data.begin());
            seq.frames.push_back(Tensor::from_data({1, H, W}, std::move(data)));
          }
          for (py::ssize_t i = 0; i < frames.size(); ++i) mean += frames.data()[i];
          seq.intensity = mean / static_cast<double>(frames.size());
          seqs.push_back(std::move(seq));
        }
        const NoiseParams p = calibrate(seqs);
        py::dict out;
        out["slope"] = p.slope;
        out["intercept"] = p.intercept;
        out["sigma_c"] = p.sigma_c;
        return out;
      },
      py::arg("sequences"),
      "Fit (slope, intercept, sigma_c) from a list of [F,H,W] vacuum stacks");

  m.def(
      "local_sd",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img) {
        return array_from_tensor(local_sd(tensor_from_array(img)));
      },
      py::arg("image"), "3x3 mirror-padded windowed standard deviation");

  m.def(
      "gaussian_filter",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img,
         double sigma) {
        return array_from_tensor(
            gaussian_filter(tensor_from_array(img), GaussianFilterSpec::from_sigma(sigma)));
      },
      py::arg("image"), py::arg("sigma") = 1.5, "Separable Gaussian smoothing baseline");

  m.def(
      "psnr",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& gt,
         double peak) { return psnr(tensor_from_array(pred), tensor_from_array(gt), peak); },
      py::arg("pred"), py::arg("gt"), py::arg("peak") = 255.0);

  m.def(
      "ssim",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& gt) {
        return ssim(tensor_from_array(pred), tensor_from_array(gt));
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "iou",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return iou(tensor_from_array(a), tensor_from_array(b));
      },
      py::arg("mask_a"), py::arg("mask_b"));

  m.def(
      "localize",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img,
         double threshold, int min_px) {
        const LocalizationResult res = localize(tensor_from_array(img), threshold, min_px);
        py::array_t<double> centroids({static_cast<py::ssize_t>(res.centroids.size()),
                                       static_cast<py::ssize_t>(2)});
        auto view = centroids.mutable_unchecked<2>();
        for (size_t i = 0; i < res.centroids.size(); ++i) {
          view(i, 0) = res.centroids[i][0];
          view(i, 1) = res.centroids[i][1];
        }
        py::dict out;
        out["mask"] = array_from_tensor(res.mask);
        out["centroids"] = centroids;
        return out;
      },
      py::arg("image"), py::arg("threshold") = 127.5, py::arg("min_px") = 1,
      "Threshold, 8-connected components, intensity-weighted centroids");

  m.def(
      "read_tensor",
      [](const std::string& path) { return array_from_tensor(read_tensor(path).tensor); },
      py::arg("path"), "Read a tensor container file");
  m.def(
      "write_tensor",
      [](const std::string& path,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         const std::string& name) { write_tensor(path, tensor_from_array(arr), name); },
      py::arg("path"), py::arg("array"), py::arg("name") = "");

  m.def(
      "train",
      [](const std::string& data_dir, const std::string& out_dir, int n, int C, int r,
         const std::string& variant, int epochs, double lr, int batch, uint64_t seed,
         int threads) {
        TrainConfig cfg;
        cfg.arch = ArchConfig::variant(variant, n, C, r);
        cfg.dataset_dir = data_dir;
        cfg.out_dir = out_dir;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.batch_size = batch;
        cfg.seed = seed;
        cfg.threads = threads;
        TrainResult res = train(cfg);
        return res.log.epoch_loss;
      },
      py::arg("data_dir"), py::arg("out_dir"), py::arg("n") = 2, py::arg("C") = 16,
      py::arg("r") = 4, py::arg("variant") = "full", py::arg("epochs") = 20,
      py::arg("lr") = 2e-4, py::arg("batch") = 6, py::arg("seed") = 0,
      py::arg("threads") = 1,
      "Train on a generated dataset directory; returns per-epoch mean L1");

  m.def(
      "generate_dataset",
      [](const std::string& out_dir, int count, int size, double r_min, uint64_t seed,
         int threads) {
        GenConfig cfg;
        cfg.width = cfg.height = size;
        cfg.r_min = r_min;
        write_dataset(out_dir, cfg, count, seed, false, threads);
      },
      py::arg("out_dir"), py::arg("count"), py::arg("size") = 256, py::arg("r_min") = 4.0,
      py::arg("seed") = 0, py::arg("threads") = 1,
      "Write a dataset directory with default generation settings");

  py::class_<Model>(m, "Model")
      .def_static("init", &Model::init, py::arg("n") = 8, py::arg("C") = 64,
                  py::arg("r") = 4, py::arg("seed") = 0, py::arg("variant") = "full")
      .def_static("load", &Model::load, py::arg("checkpoint_dir"))
      .def("save", &Model::save, py::arg("checkpoint_dir"))
      .def("forward", &Model::forward, py::arg("image"),
           "Denoise a 0..255 image; returns the unclamped 0..255-scale output")
      .def("param_count", &Model::param_count);
}
