#include <doctest.h>

#include "gradcheck.hpp"
#include "nuc/pool.hpp"

using namespace nuc;
using nuctest::DTensor;

TEST_CASE("global pool of a constant channel returns the constant") {
  Tensor x = Tensor::filled({3, 4, 5}, -2.25f);
  Tensor a = global_pool(x, PoolMode::avg);
  Tensor m = global_pool(x, PoolMode::max);
  REQUIRE(a.shape() == std::vector<int>{3, 1, 1});
  for (int c = 0; c < 3; ++c) {
    CHECK(a.at(c, 0, 0) == doctest::Approx(-2.25).epsilon(1e-7));
    CHECK(m.at(c, 0, 0) == -2.25f);
  }
}

TEST_CASE("avg and max of [1,2;3,4]") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  CHECK(global_pool(x, PoolMode::avg).item() == doctest::Approx(2.5));
  CHECK(global_pool(x, PoolMode::max).item() == 4.0f);
}

TEST_CASE("max pool gradient is one-hot at the argmax") {
  Tensor x = Tensor::param({1, 2, 2}, {1, 7, 3, 4});
  backward(sum_all(global_pool(x, PoolMode::max)));
  CHECK(x.grad() == std::vector<float>{0, 1, 0, 0});
}

TEST_CASE("max pool ties route the gradient to the first element in row-major order") {
  Tensor x = Tensor::param({1, 2, 2}, {2, 5, 5, 1});
  backward(sum_all(global_pool(x, PoolMode::max)));
  CHECK(x.grad() == std::vector<float>{0, 1, 0, 0});
}

TEST_CASE("pool gradients match finite differences") {
  Rng rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    // Distinct values keep the argmax stable under the FD step.
    std::vector<double> vals(3 * 3 * 3);
    for (size_t i = 0; i < vals.size(); ++i)
      vals[i] = static_cast<double>(i) * 0.11 + rng.uniform(0.0, 0.05);
    for (int i = static_cast<int>(vals.size()) - 1; i > 0; --i)
      std::swap(vals[i], vals[rng.uniform_int(i + 1)]);
    DTensor x = DTensor::param({3, 3, 3}, vals);
    DTensor proj = nuctest::random_dtensor({3, 1, 1}, rng, -1, 1, false);
    for (PoolMode mode : {PoolMode::avg, PoolMode::max}) {
      auto loss = [&]() {
        return nuctest::project_to_scalar(global_pool(x, mode), proj);
      };
      CHECK(nuctest::max_fd_rel_err({&x}, loss) < 1e-4);
    }
  }
}
