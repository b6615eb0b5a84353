#include <doctest.h>

#include <vector>

#include "gradcheck.hpp"
#include "nuc/conv.hpp"

using namespace nuc;
using nuctest::DTensor;

namespace {

// Brute-force sliding-window oracle: explicit padding, then a direct
// quadruple loop in double.
template <typename S>
std::vector<double> conv_oracle(const TensorT<S>& input, const TensorT<S>& kernel,
                                const TensorT<S>& bias, Pad pad) {
  const int Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int Cout = kernel.dim(0), k = kernel.dim(2);
  const int p = k == 3 ? 1 : 0;
  auto padded_at = [&](int ci, int y, int x) -> double {
    if (y >= 0 && y < H && x >= 0 && x < W) return input.at(ci, y, x);
    if (pad == Pad::mirror1) {
      const int my = y < 0 ? -y : (y >= H ? 2 * H - 2 - y : y);
      const int mx = x < 0 ? -x : (x >= W ? 2 * W - 2 - x : x);
      return input.at(ci, my, mx);
    }
    return 0.0;
  };
  std::vector<double> out(static_cast<size_t>(Cout) * H * W);
  for (int co = 0; co < Cout; ++co)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = bias.data()[co];
        for (int ci = 0; ci < Cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              acc += padded_at(ci, y + ky - p, x + kx - p) *
                     static_cast<double>(
                         kernel.data()[((static_cast<size_t>(co) * Cin + ci) * k + ky) * k + kx]);
        out[(static_cast<size_t>(co) * H + y) * W + x] = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d on all-zero input returns the bias per channel") {
  Rng rng(3);
  Tensor x = Tensor::zeros({1, 5, 5});
  std::vector<float> kv(2 * 1 * 3 * 3);
  for (auto& v : kv) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor k = Tensor::from_data({2, 1, 3, 3}, kv);
  Tensor b = Tensor::from_data({2}, {0.7f, -1.3f});
  Tensor out = conv2d(x, k, b, Pad::zero1);
  for (int y = 0; y < 5; ++y)
    for (int xx = 0; xx < 5; ++xx) {
      CHECK(out.at(0, y, xx) == 0.7f);
      CHECK(out.at(1, y, xx) == -1.3f);
    }
}

TEST_CASE("identity 1x1 kernel reproduces the input exactly") {
  Rng rng(4);
  std::vector<float> xv(3 * 4 * 4);
  for (auto& v : xv) v = static_cast<float>(rng.uniform(-5, 5));
  Tensor x = Tensor::from_data({3, 4, 4}, xv);
  // One output channel per input channel, weight 1 on the diagonal.
  std::vector<float> kv(9, 0.0f);
  kv[0] = kv[4] = kv[8] = 1.0f;
  Tensor k = Tensor::from_data({3, 3, 1, 1}, kv);
  Tensor b = Tensor::zeros({3});
  Tensor out = conv2d(x, k, b, Pad::none);
  for (size_t i = 0; i < xv.size(); ++i) CHECK(out.data()[i] == xv[i]);
}

TEST_CASE("3x3 averaging kernel on a ramp matches the sliding-window oracle") {
  std::vector<float> xv(16);
  for (int i = 0; i < 16; ++i) xv[i] = static_cast<float>(i);
  Tensor x = Tensor::from_data({1, 4, 4}, xv);
  Tensor k = Tensor::filled({1, 1, 3, 3}, 1.0f / 9.0f);
  Tensor b = Tensor::zeros({1});
  Tensor out = conv2d(x, k, b, Pad::mirror1);
  const auto oracle = conv_oracle(x, k, b, Pad::mirror1);
  for (size_t i = 0; i < oracle.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-6));
}

TEST_CASE("conv2d matches the oracle on random instances, both paddings") {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const int Cin = 1 + rng.uniform_int(3), Cout = 1 + rng.uniform_int(3);
    const int H = 2 + rng.uniform_int(5), W = 2 + rng.uniform_int(5);
    std::vector<float> xv(static_cast<size_t>(Cin) * H * W);
    for (auto& v : xv) v = static_cast<float>(rng.uniform(-2, 2));
    std::vector<float> kv(static_cast<size_t>(Cout) * Cin * 9);
    for (auto& v : kv) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<float> bv(Cout);
    for (auto& v : bv) v = static_cast<float>(rng.uniform(-1, 1));
    Tensor x = Tensor::from_data({Cin, H, W}, xv);
    Tensor k = Tensor::from_data({Cout, Cin, 3, 3}, kv);
    Tensor b = Tensor::from_data({Cout}, bv);
    for (Pad pad : {Pad::zero1, Pad::mirror1}) {
      Tensor out = conv2d(x, k, b, pad);
      const auto oracle = conv_oracle(x, k, b, pad);
      for (size_t i = 0; i < oracle.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("mirror conv equals zero-pad conv on an explicitly mirrored input, cropped") {
  Rng rng(22);
  std::vector<float> xv(2 * 6 * 5);
  for (auto& v : xv) v = static_cast<float>(rng.uniform(-2, 2));
  std::vector<float> kv(3 * 2 * 9);
  for (auto& v : kv) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor x = Tensor::from_data({2, 6, 5}, xv);
  Tensor k = Tensor::from_data({3, 2, 3, 3}, kv);
  Tensor b = Tensor::from_data({3}, {0.1f, -0.2f, 0.3f});

  Tensor direct = conv2d(x, k, b, Pad::mirror1);
  Tensor padded = mirror_pad1_values(x);
  Tensor big = conv2d(padded, k, b, Pad::zero1);
  for (int co = 0; co < 3; ++co)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 5; ++xx)
        CHECK(direct.at(co, y, xx) == big.at(co, y + 1, xx + 1));
}

TEST_CASE("conv2d shape and config errors") {
  Tensor x = Tensor::zeros({2, 4, 4});
  Tensor k33 = Tensor::zeros({1, 2, 3, 3});
  Tensor k11 = Tensor::zeros({1, 2, 1, 1});
  Tensor b = Tensor::zeros({1});
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 3, 3, 3}), b, Pad::zero1), shape_error);
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 5, 5}), b, Pad::zero1), config_error);
  CHECK_THROWS_AS(conv2d(x, k33, Tensor::zeros({2}), Pad::zero1), shape_error);
  CHECK_THROWS_AS(conv2d(x, k33, b, Pad::none), config_error);
  CHECK_THROWS_AS(conv2d(x, k11, b, Pad::zero1), config_error);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({2, 1, 4}), k33, b, Pad::mirror1), shape_error);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(23);
  for (int rep = 0; rep < 8; ++rep) {
    DTensor x = nuctest::random_dtensor({2, 4, 5}, rng);
    DTensor k = nuctest::random_dtensor({2, 2, 3, 3}, rng);
    DTensor b = nuctest::random_dtensor({2}, rng);
    DTensor proj = nuctest::random_dtensor({2, 4, 5}, rng, -1, 1, false);
    const Pad pad = rep % 2 ? Pad::zero1 : Pad::mirror1;
    auto loss = [&]() {
      return nuctest::project_to_scalar(conv2d(x, k, b, pad), proj);
    };
    CHECK(nuctest::max_fd_rel_err({&x, &k, &b}, loss) < 1e-4);
  }
  for (int rep = 0; rep < 4; ++rep) {
    DTensor x = nuctest::random_dtensor({3, 3, 4}, rng);
    DTensor k = nuctest::random_dtensor({2, 3, 1, 1}, rng);
    DTensor b = nuctest::random_dtensor({2}, rng);
    DTensor proj = nuctest::random_dtensor({2, 3, 4}, rng, -1, 1, false);
    auto loss = [&]() {
      return nuctest::project_to_scalar(conv2d(x, k, b, Pad::none), proj);
    };
    CHECK(nuctest::max_fd_rel_err({&x, &k, &b}, loss) < 1e-4);
  }
}

TEST_CASE("window_mean3x3 is exact on constants and matches the oracle") {
  Tensor c = Tensor::filled({2, 4, 6}, 3.7f);
  Tensor m = window_mean3x3(c);
  for (float v : m.data()) CHECK(v == 3.7f);

  Rng rng(24);
  std::vector<float> xv(5 * 5);
  for (auto& v : xv) v = static_cast<float>(rng.uniform(0, 1));
  Tensor x = Tensor::from_data({1, 5, 5}, xv);
  Tensor k = Tensor::filled({1, 1, 3, 3}, 1.0f / 9.0f);
  Tensor b = Tensor::zeros({1});
  const auto oracle = conv_oracle(x, k, b, Pad::mirror1);
  Tensor got = window_mean3x3(x);
  for (size_t i = 0; i < oracle.size(); ++i)
    CHECK(got.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-6));
}

TEST_CASE("window_mean3x3 gradients match finite differences") {
  Rng rng(25);
  for (int rep = 0; rep < 5; ++rep) {
    DTensor x = nuctest::random_dtensor({2, 4, 4}, rng);
    DTensor proj = nuctest::random_dtensor({2, 4, 4}, rng, -1, 1, false);
    auto loss = [&]() { return nuctest::project_to_scalar(window_mean3x3(x), proj); };
    CHECK(nuctest::max_fd_rel_err({&x}, loss) < 1e-4);
  }
}
