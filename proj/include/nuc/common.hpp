#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nuc {

// Error taxonomy shared by all modules. The CLI maps these to one-line
// machine-parsable stderr messages and a nonzero exit code.
class shape_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic RNG: std::mt19937_64 (standardized engine) with hand-rolled
// uniform/normal transforms, so streams are identical across platforms and
// standard libraries. std::*_distribution is implementation-defined and is
// deliberately not used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n).
  int uniform_int(int n) {
    return static_cast<int>(gen_() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent substream. Depends only on the original seed and `stream`,
  // never on how many values were drawn from this instance.
  Rng fork(uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(0xA02BDBF7BB3C0A7ull + stream)));
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Chunked parallel map over [0,n). Results must only depend on the index, so
// output is identical for any thread count.
inline void parallel_for(int64_t n, int threads,
                         const std::function<void(int64_t)>& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace nuc
