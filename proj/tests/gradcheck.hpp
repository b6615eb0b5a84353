#pragma once

#include <vector>

#include "nuc/tensor.hpp"

// Central-difference gradient checking on the f64 shadow path. Reverse-mode
// gradients are compared against (f(x+h)-f(x-h))/(2h) element by element;
// the reported error is |fd-g| / max(|fd|, |g|, tau).
namespace nuctest {

using DTensor = nuc::TensorT<double>;

inline DTensor random_dtensor(std::vector<int> shape, nuc::Rng& rng, double lo = -1.0,
                              double hi = 1.0, bool tracked = true) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return tracked ? DTensor::param(std::move(shape), std::move(data))
                 : DTensor::from_data(std::move(shape), std::move(data));
}

// Random values pushed away from zero (for ops with kinks at 0).
inline DTensor random_dtensor_offzero(std::vector<int> shape, nuc::Rng& rng,
                                      double min_mag = 0.05, bool tracked = true) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) {
    const double mag = min_mag + rng.uniform();
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return tracked ? DTensor::param(std::move(shape), std::move(data))
                 : DTensor::from_data(std::move(shape), std::move(data));
}

// Central differences at step h resolve gradients only to ~h^2 * f'''
// absolute, so elements far below a tensor's gradient scale cannot be
// ratio-compared; the denominator is floored at 2% of that tensor's max
// gradient magnitude. A wrong backward formula errs at the gradient scale
// and still trips the check.
template <typename LossFn>
double max_fd_rel_err(std::vector<DTensor*> wrt, LossFn&& loss_fn, double h = 1e-3,
                      double tau = 1e-6) {
  for (auto* t : wrt) t->zero_grad();
  DTensor loss = loss_fn();
  nuc::backward(loss);
  std::vector<std::vector<double>> grads;
  grads.reserve(wrt.size());
  for (auto* t : wrt)
    grads.push_back(t->has_grad() ? t->grad() : std::vector<double>(t->numel(), 0.0));

  double max_rel = 0.0;
  for (size_t k = 0; k < wrt.size(); ++k) {
    double gmax = 0.0;
    for (double g : grads[k]) gmax = std::max(gmax, std::abs(g));
    const double floor = std::max(tau, 0.02 * gmax);
    auto& data = wrt[k]->data_mut();
    for (size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double lp = loss_fn().item();
      data[i] = orig - h;
      const double lm = loss_fn().item();
      data[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = grads[k][i];
      const double denom = std::max({std::abs(fd), std::abs(g), floor});
      max_rel = std::max(max_rel, std::abs(fd - g) / denom);
    }
  }
  for (auto* t : wrt) t->zero_grad();
  return max_rel;
}

// Scalar loss from a tensor: sum(out * w) with fixed random weights, so every
// output position contributes.
inline DTensor project_to_scalar(const DTensor& out, const DTensor& weights) {
  return nuc::sum_all(nuc::mul(out, weights));
}

}  // namespace nuctest
