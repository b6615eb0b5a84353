#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "nuc/fft.hpp"

using namespace nuc;
using nuctest::DTensor;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor random_image(int C, int H, int W, Rng& rng) {
  std::vector<float> v(static_cast<size_t>(C) * H * W);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return Tensor::from_data({C, H, W}, v);
}
}  // namespace

TEST_CASE("constant image has a DC-only spectrum equal to c*H*W") {
  const int H = 8, W = 6;
  const float c = 2.5f;
  ComplexTensor f = rfft2(Tensor::filled({1, H, W}, c));
  const int Wr = rfft_width(W);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < Wr; ++v) {
      const double re = f.re.at(0, u, v), im = f.im.at(0, u, v);
      if (u == 0 && v == 0) {
        CHECK(re == doctest::Approx(c * H * W).epsilon(1e-6));
        CHECK(std::abs(im) < 1e-4);
      } else {
        CHECK(std::abs(re) < 1e-4);
        CHECK(std::abs(im) < 1e-4);
      }
    }
}

TEST_CASE("row cosine concentrates energy in bin (u0,0) and its conjugate") {
  const int H = 16, W = 12, u0 = 3;
  std::vector<float> xv(static_cast<size_t>(H) * W);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      xv[static_cast<size_t>(h) * W + w] =
          static_cast<float>(std::cos(kTwoPi * u0 * h / H));
  ComplexTensor f = rfft2(Tensor::from_data({1, H, W}, xv));
  // Closed form: X[u0,0] = X[H-u0,0] = H*W/2, everything else zero.
  const double peak = H * W / 2.0;
  const int Wr = rfft_width(W);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < Wr; ++v) {
      const double mag = std::hypot(f.re.at(0, u, v), f.im.at(0, u, v));
      if ((u == u0 || u == H - u0) && v == 0)
        CHECK(mag == doctest::Approx(peak).epsilon(1e-4));
      else
        CHECK(mag < 1e-4 * peak);
    }
}

TEST_CASE("rfft2/irfft2 round trip for every H,W in 4..32") {
  Rng rng(31);
  for (int H = 4; H <= 32; ++H) {
    for (int W = 4; W <= 32; ++W) {
      Tensor x = random_image(1, H, W, rng);
      Tensor back = irfft2(rfft2(x), W);
      REQUIRE(back.shape() == x.shape());
      double max_err = 0.0;
      for (size_t i = 0; i < x.data().size(); ++i)
        max_err = std::max(max_err,
                           std::abs(double(back.data()[i]) - double(x.data()[i])));
      CHECK(max_err < 1e-5);
    }
  }
}

TEST_CASE("random 1x8x8 round trip below 1e-5") {
  Rng rng(32);
  Tensor x = random_image(1, 8, 8, rng);
  Tensor back = irfft2_stacked(rfft2_stacked(x), 8);
  for (size_t i = 0; i < x.data().size(); ++i)
    CHECK(std::abs(double(back.data()[i]) - double(x.data()[i])) < 1e-5);
}

TEST_CASE("Parseval with Hermitian bins counted twice") {
  Rng rng(33);
  for (int H : {4, 8, 16, 32}) {
    for (int W : {4, 8, 16, 32}) {
      Tensor x = random_image(1, H, W, rng);
      double spatial = 0.0;
      for (float v : x.data()) spatial += double(v) * double(v);

      ComplexTensor f = rfft2(x);
      const int Wr = rfft_width(W);
      double spectral = 0.0;
      for (int u = 0; u < H; ++u)
        for (int v = 0; v < Wr; ++v) {
          const double p = double(f.re.at(0, u, v)) * f.re.at(0, u, v) +
                           double(f.im.at(0, u, v)) * f.im.at(0, u, v);
          const bool self = (v == 0) || (2 * v == W);
          spectral += self ? p : 2.0 * p;
        }
      spectral /= static_cast<double>(H) * W;
      CHECK(std::abs(spectral - spatial) / spatial < 1e-4);
    }
  }
}

TEST_CASE("Parseval holds on non-power-of-two sizes") {
  Rng rng(34);
  for (auto [H, W] : std::vector<std::pair<int, int>>{{6, 10}, {7, 9}, {12, 5}, {31, 17}}) {
    Tensor x = random_image(1, H, W, rng);
    double spatial = 0.0;
    for (float v : x.data()) spatial += double(v) * double(v);
    ComplexTensor f = rfft2(x);
    const int Wr = rfft_width(W);
    double spectral = 0.0;
    for (int u = 0; u < H; ++u)
      for (int v = 0; v < Wr; ++v) {
        const double p = double(f.re.at(0, u, v)) * f.re.at(0, u, v) +
                         double(f.im.at(0, u, v)) * f.im.at(0, u, v);
        const bool self = (v == 0) || (2 * v == W);
        spectral += self ? p : 2.0 * p;
      }
    spectral /= static_cast<double>(H) * W;
    CHECK(std::abs(spectral - spatial) / spatial < 1e-4);
  }
}

TEST_CASE("irfft2 width validation") {
  Rng rng(35);
  Tensor x = random_image(2, 8, 8, rng);
  Tensor spec = rfft2_stacked(x);  // [4,8,5]
  CHECK_THROWS_AS(irfft2_stacked(spec, 12), shape_error);
  CHECK_THROWS_AS(irfft2_stacked(spec, 7), shape_error);
  CHECK_NOTHROW(irfft2_stacked(spec, 8));
  CHECK_THROWS_AS(rfft2_stacked(Tensor::zeros({1, 1, 8})), shape_error);
}

TEST_CASE("fft pair gradients are the adjoint maps (finite differences)") {
  Rng rng(36);
  for (auto [H, W] : std::vector<std::pair<int, int>>{{4, 4}, {6, 8}, {5, 7}}) {
    const int Wr = rfft_width(W);
    DTensor x = nuctest::random_dtensor({2, H, W}, rng);
    DTensor proj_spec = nuctest::random_dtensor({4, H, Wr}, rng, -1, 1, false);
    auto loss_fwd = [&]() {
      return nuctest::project_to_scalar(rfft2_stacked(x), proj_spec);
    };
    CHECK(nuctest::max_fd_rel_err({&x}, loss_fwd) < 1e-4);

    DTensor y = nuctest::random_dtensor({4, H, Wr}, rng);
    DTensor proj_img = nuctest::random_dtensor({2, H, W}, rng, -1, 1, false);
    auto loss_inv = [&]() {
      return nuctest::project_to_scalar(irfft2_stacked(y, W), proj_img);
    };
    CHECK(nuctest::max_fd_rel_err({&y}, loss_inv) < 1e-4);
  }
}

TEST_CASE("round trip through both stacked ops is differentiable end to end") {
  Rng rng(37);
  DTensor x = nuctest::random_dtensor({1, 6, 6}, rng);
  DTensor proj = nuctest::random_dtensor({1, 6, 6}, rng, -1, 1, false);
  auto loss = [&]() {
    return nuctest::project_to_scalar(irfft2_stacked(rfft2_stacked(x), 6), proj);
  };
  CHECK(nuctest::max_fd_rel_err({&x}, loss) < 1e-4);
}
