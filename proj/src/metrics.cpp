#include "icelut/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace icelut::metrics {

using imaging::ImageU8;

namespace {

void require_same_size(const ImageU8& a, const ImageU8& b) {
  if (!a.same_size(b)) {
    raise(ErrorCode::DimensionMismatch, "metric inputs differ in size");
  }
}

}  // namespace

double psnr(const ImageU8& a, const ImageU8& b) {
  require_same_size(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 20.0 * std::log10(255.0) - 10.0 * std::log10(mse);
}

namespace {

constexpr int kWindow = 11;

std::vector<double> luma_plane(const ImageU8& img) {
  std::vector<double> luma(img.pixel_count());
  for (std::size_t p = 0; p < luma.size(); ++p) {
    const std::uint8_t* px = img.data.data() + p * 3;
    luma[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return luma;
}

// separable 11-tap Gaussian, valid mode: out is (w-10) x h for horizontal,
// w x (h-10) -> (w-10) x (h-10) after both passes
std::vector<double> convolve_valid(const std::vector<double>& plane, int w,
                                   int h, const double kernel[kWindow],
                                   int& out_w, int& out_h) {
  out_w = w - kWindow + 1;
  out_h = h - kWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(out_w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) {
        acc += kernel[t] * plane[static_cast<std::size_t>(y) * w + x + t];
      }
      horiz[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) {
        acc += kernel[t] * horiz[static_cast<std::size_t>(y + t) * out_w + x];
      }
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageU8& a, const ImageU8& b) {
  require_same_size(a, b);
  if (a.width < kWindow || a.height < kWindow) {
    raise(ErrorCode::TooSmall, "ssim needs at least 11x11 pixels");
  }

  double kernel[kWindow];
  {
    const double sigma = 1.5;
    double sum = 0.0;
    for (int t = 0; t < kWindow; ++t) {
      const double d = t - (kWindow - 1) / 2.0;
      kernel[t] = std::exp(-(d * d) / (2.0 * sigma * sigma));
      sum += kernel[t];
    }
    for (double& k : kernel) k /= sum;
  }

  const std::vector<double> x = luma_plane(a);
  const std::vector<double> y = luma_plane(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }

  int ow = 0, oh = 0;
  const std::vector<double> mu_x = convolve_valid(x, a.width, a.height, kernel, ow, oh);
  const std::vector<double> mu_y = convolve_valid(y, a.width, a.height, kernel, ow, oh);
  const std::vector<double> e_xx = convolve_valid(xx, a.width, a.height, kernel, ow, oh);
  const std::vector<double> e_yy = convolve_valid(yy, a.width, a.height, kernel, ow, oh);
  const std::vector<double> e_xy = convolve_valid(xy, a.width, a.height, kernel, ow, oh);

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

double srgb_to_linear(double byte_value) {
  const double c = byte_value / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double linear) {
  const double c = linear <= 0.0031308
                       ? linear * 12.92
                       : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
  return c * 255.0;
}

namespace {

// sRGB -> XYZ (D65). The white point is each row's sum so that pure white
// normalizes to exactly (1,1,1).
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta
             ? std::cbrt(t)
             : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

}  // namespace

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double lin[3] = {srgb_to_linear(r), srgb_to_linear(g),
                         srgb_to_linear(b)};
  double f[3];
  for (int row = 0; row < 3; ++row) {
    const double* m = kRgbToXyz[row];
    const double value = m[0] * lin[0] + m[1] * lin[1] + m[2] * lin[2];
    const double white = m[0] + m[1] + m[2];
    f[row] = lab_f(value / white);
  }
  Lab lab;
  lab.l = 116.0 * f[1] - 16.0;
  lab.a = 500.0 * (f[0] - f[1]);
  lab.b = 200.0 * (f[1] - f[2]);
  return lab;
}

void lab_to_srgb(const Lab& lab, std::uint8_t rgb[3]) {
  // Invert the forward matrix once so the round trip cancels exactly
  // instead of relying on separately rounded published constants.
  static const auto kXyzToRgb = [] {
    const auto& m = kRgbToXyz;
    std::array<std::array<double, 3>, 3> inv{};
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const int i1 = (j + 1) % 3, i2 = (j + 2) % 3;
        const int j1 = (i + 1) % 3, j2 = (i + 2) % 3;
        inv[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
      }
    }
    return inv;
  }();

  const double fy = (lab.l + 16.0) / 116.0;
  const double f[3] = {fy + lab.a / 500.0, fy, fy - lab.b / 200.0};
  double xyz[3];
  constexpr double kDelta = 6.0 / 29.0;
  for (int row = 0; row < 3; ++row) {
    const double t = f[row] > kDelta
                         ? f[row] * f[row] * f[row]
                         : 3.0 * kDelta * kDelta * (f[row] - 4.0 / 29.0);
    const double white =
        kRgbToXyz[row][0] + kRgbToXyz[row][1] + kRgbToXyz[row][2];
    xyz[row] = t * white;
  }
  for (int row = 0; row < 3; ++row) {
    const double* m = kXyzToRgb[row].data();
    const double lin = m[0] * xyz[0] + m[1] * xyz[1] + m[2] * xyz[2];
    const double byte_value = linear_to_srgb(lin);
    const long rounded = std::lround(byte_value);
    rgb[row] = static_cast<std::uint8_t>(std::clamp(rounded, 0L, 255L));
  }
}

double delta_e_pixel(const std::uint8_t* a, const std::uint8_t* b) {
  const Lab la = srgb_to_lab(a[0], a[1], a[2]);
  const Lab lb = srgb_to_lab(b[0], b[1], b[2]);
  const double dl = la.l - lb.l;
  const double da = la.a - lb.a;
  const double db = la.b - lb.b;
  return std::sqrt(dl * dl + da * da + db * db);
}

double delta_e(const ImageU8& a, const ImageU8& b) {
  require_same_size(a, b);
  double total = 0.0;
  const std::size_t pixels = a.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    total += delta_e_pixel(a.data.data() + p * 3, b.data.data() + p * 3);
  }
  return total / static_cast<double>(pixels);
}

MetricReport evaluate(const ImageU8& a, const ImageU8& b) {
  MetricReport report;
  report.psnr = psnr(a, b);
  if (a.width >= 11 && a.height >= 11) {
    report.ssim = ssim(a, b);
  } else {
    report.ssim = std::numeric_limits<double>::quiet_NaN();
  }
  report.delta_e = delta_e(a, b);
  return report;
}

}  // namespace icelut::metrics
