#pragma once

#include <cstdint>

#include "icelut/image.hpp"

namespace icelut::metrics {

// 20*log10(255) - 10*log10(MSE) over all byte samples; +inf when equal.
double psnr(const imaging::ImageU8& a, const imaging::ImageU8& b);

// Single-scale SSIM on BT.601 luma: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 255, mean over valid windows.
// Requires both sides >= 11 pixels.
double ssim(const imaging::ImageU8& a, const imaging::ImageU8& b);

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// sRGB transfer function (D65, piecewise 2.4-gamma), byte domain.
double srgb_to_linear(double byte_value);
double linear_to_srgb(double linear);

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Inverse of srgb_to_lab; out-of-gamut values are clamped to the byte cube.
void lab_to_srgb(const Lab& lab, std::uint8_t rgb[3]);

// Euclidean CIELAB distance of two byte triples (CIE76).
double delta_e_pixel(const std::uint8_t* a, const std::uint8_t* b);

// Mean CIE76 distance over all pixels.
double delta_e(const imaging::ImageU8& a, const imaging::ImageU8& b);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double delta_e = 0.0;
};

// All three metrics at once; ssim is NaN when the images are too small
// for a window (callers that need the error should call ssim directly).
MetricReport evaluate(const imaging::ImageU8& a, const imaging::ImageU8& b);

}  // namespace icelut::metrics
