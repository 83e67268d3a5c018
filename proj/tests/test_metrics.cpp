#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "icelut/metrics.hpp"

using namespace icelut;
using namespace icelut::metrics;
using testing::error_code_of;
using testing::random_image;

namespace {

imaging::ImageU8 uniform_image(int w, int h, std::uint8_t value) {
  auto img = imaging::ImageU8::create(w, h);
  std::fill(img.data.begin(), img.data.end(), value);
  return img;
}

imaging::ImageU8 shifted(const imaging::ImageU8& img, int delta) {
  auto out = img;
  for (auto& v : out.data)
    v = static_cast<std::uint8_t>(
        std::clamp(static_cast<int>(v) + delta, 0, 255));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr of identical images is infinite") {
  auto img = random_image(3, 16, 16);
  CHECK(std::isinf(psnr(img, img)));
  CHECK(psnr(img, img) > 0);
}

TEST_CASE("psnr of a uniform one-step error is 20*log10(255)") {
  auto a = uniform_image(8, 8, 100);
  auto b = uniform_image(8, 8, 101);
  CHECK(psnr(a, b) == doctest::Approx(48.1308036087).epsilon(1e-9));
}

TEST_CASE("psnr falls as the error amplitude grows") {
  auto base = uniform_image(16, 16, 100);
  double previous = std::numeric_limits<double>::infinity();
  for (int amplitude : {1, 2, 4, 8}) {
    const double value = psnr(base, shifted(base, amplitude));
    CHECK(value < previous);
    CHECK(value == doctest::Approx(48.1308036087 -
                                   20.0 * std::log10(amplitude))
                       .epsilon(1e-9));
    previous = value;
  }
}

TEST_CASE("metrics reject dimension mismatches") {
  auto a = uniform_image(8, 8, 10);
  auto b = uniform_image(8, 9, 10);
  CHECK(error_code_of([&] { psnr(a, b); }) == ErrorCode::DimensionMismatch);
  CHECK(error_code_of([&] { ssim(a, b); }) == ErrorCode::DimensionMismatch);
  CHECK(error_code_of([&] { delta_e(a, b); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("ssim of identical images is exactly one") {
  auto img = random_image(5, 20, 14);
  CHECK(ssim(img, img) == 1.0);
}

TEST_CASE("ssim needs a full window") {
  auto a = uniform_image(8, 8, 10);
  CHECK(error_code_of([&] { ssim(a, a); }) == ErrorCode::TooSmall);
  auto b = uniform_image(10, 11, 10);
  CHECK(error_code_of([&] { ssim(b, b); }) == ErrorCode::TooSmall);
  auto c = uniform_image(11, 11, 10);
  CHECK(ssim(c, c) == 1.0);  // one valid window suffices
}

TEST_CASE("ssim punishes structural inversion") {
  auto ramp = imaging::ImageU8::create(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      auto* px = ramp.pixel(x, y);
      px[0] = px[1] = px[2] = static_cast<std::uint8_t>(x * 8);
    }
  auto inverted = ramp;
  for (auto& v : inverted.data) v = static_cast<std::uint8_t>(255 - v);
  CHECK(ssim(ramp, inverted) < 0.5);
  CHECK(ssim(ramp, ramp) == 1.0);
}

TEST_CASE("ssim is symmetric") {
  auto a = random_image(7, 24, 24);
  auto b = random_image(9, 24, 24);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("lab anchors: white is L=100, black is L=0, distance 100") {
  auto white = srgb_to_lab(255, 255, 255);
  CHECK(white.l == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(white.a == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(white.b == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  auto black = srgb_to_lab(0, 0, 0);
  CHECK(black.l == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  const std::uint8_t w[3] = {255, 255, 255};
  const std::uint8_t k[3] = {0, 0, 0};
  CHECK(delta_e_pixel(w, k) == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(delta_e_pixel(k, w) == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(delta_e_pixel(w, w) == 0.0);
}

TEST_CASE("gray axis stays neutral in lab") {
  for (int v : {32, 128, 200}) {
    auto lab = srgb_to_lab(static_cast<std::uint8_t>(v),
                           static_cast<std::uint8_t>(v),
                           static_cast<std::uint8_t>(v));
    CHECK(lab.a == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(lab.b == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  }
}

TEST_CASE("lab conversion round-trips every sampled byte triple") {
  for (int r = 0; r < 256; r += 17)
    for (int g = 0; g < 256; g += 17)
      for (int b = 0; b < 256; b += 17) {
        auto lab = srgb_to_lab(static_cast<std::uint8_t>(r),
                               static_cast<std::uint8_t>(g),
                               static_cast<std::uint8_t>(b));
        std::uint8_t back[3];
        lab_to_srgb(lab, back);
        CHECK(back[0] == r);
        CHECK(back[1] == g);
        CHECK(back[2] == b);
      }
}

TEST_CASE("transfer functions invert each other") {
  CHECK(srgb_to_linear(0) == 0.0);
  CHECK(srgb_to_linear(255) == doctest::Approx(1.0).epsilon(1e-12));
  for (int v : {1, 10, 31, 100, 254}) {
    CHECK(linear_to_srgb(srgb_to_linear(v)) ==
          doctest::Approx(static_cast<double>(v)).epsilon(1e-9));
  }
  CHECK(srgb_to_linear(100) < srgb_to_linear(101));
}

TEST_CASE("mean delta-e averages per-pixel distances") {
  auto a = imaging::ImageU8::from_data(2, 1, {255, 255, 255, 0, 0, 0});
  auto b = imaging::ImageU8::from_data(2, 1, {0, 0, 0, 0, 0, 0});
  // First pixel is white vs black (100), second identical (0).
  CHECK(delta_e(a, b) == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(delta_e(a, a) == 0.0);
}

TEST_CASE("evaluate bundles the three metrics") {
  auto a = random_image(11, 32, 32);
  auto b = shifted(a, 3);
  auto report = evaluate(a, b);
  CHECK(report.psnr == doctest::Approx(psnr(a, b)));
  CHECK(report.ssim == doctest::Approx(ssim(a, b)));
  CHECK(report.delta_e == doctest::Approx(delta_e(a, b)));

  auto tiny = uniform_image(4, 4, 9);
  auto small_report = evaluate(tiny, tiny);
  CHECK(std::isinf(small_report.psnr));
  CHECK(std::isnan(small_report.ssim));
  CHECK(small_report.delta_e == 0.0);
}

}  // TEST_SUITE
