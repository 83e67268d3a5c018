#include "icelut/image.hpp"

#include <algorithm>
#include <cmath>

namespace icelut::imaging {

namespace {

void check_dims(int w, int h) {
  if (w < 1 || h < 1) {
    raise(ErrorCode::DimensionMismatch,
          "image dimensions must be >= 1, got " + std::to_string(w) + "x" +
              std::to_string(h));
  }
}

inline std::uint8_t round_byte(double v) {
  double r = std::floor(v + 0.5);  // half-up
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<std::uint8_t>(r);
}

}  // namespace

ImageU8 ImageU8::create(int w, int h) {
  check_dims(w, h);
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.data.assign(static_cast<std::size_t>(w) * h * 3, 0);
  return img;
}

ImageU8 ImageU8::from_data(int w, int h, std::vector<std::uint8_t> bytes) {
  check_dims(w, h);
  if (bytes.size() != static_cast<std::size_t>(w) * h * 3) {
    raise(ErrorCode::DimensionMismatch,
          "pixel buffer size " + std::to_string(bytes.size()) +
              " does not match " + std::to_string(w) + "x" + std::to_string(h));
  }
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.data = std::move(bytes);
  return img;
}

ImageF32 ImageF32::create(int w, int h) {
  check_dims(w, h);
  ImageF32 img;
  img.width = w;
  img.height = h;
  img.data.assign(static_cast<std::size_t>(w) * h * 3, 0.f);
  return img;
}

ImageF32 ImageF32::from_raw(int w, int h, std::vector<float> values) {
  check_dims(w, h);
  if (values.size() != static_cast<std::size_t>(w) * h * 3) {
    raise(ErrorCode::DimensionMismatch, "float buffer size mismatch");
  }
  for (float& v : values) {
    if (!std::isfinite(v) || v < 0.f) {
      v = 0.f;
    } else if (v > 1.f) {
      v = 1.f;
    }
  }
  ImageF32 img;
  img.width = w;
  img.height = h;
  img.data = std::move(values);
  return img;
}

BitPlanePair split_bitplanes(const ImageU8& img) {
  BitPlanePair planes;
  planes.width = img.width;
  planes.height = img.height;
  planes.msb.resize(img.data.size());
  planes.lsb.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    planes.msb[i] = static_cast<std::uint8_t>(img.data[i] >> 4);
    planes.lsb[i] = static_cast<std::uint8_t>(img.data[i] & 0x0f);
  }
  return planes;
}

ImageU8 merge_bitplanes(const BitPlanePair& planes) {
  ImageU8 img = ImageU8::create(planes.width, planes.height);
  if (planes.msb.size() != img.data.size() ||
      planes.lsb.size() != img.data.size()) {
    raise(ErrorCode::DimensionMismatch, "bit plane size mismatch");
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] =
        static_cast<std::uint8_t>(planes.msb[i] * 16 + planes.lsb[i]);
  }
  return img;
}

ImageU8 bilinear_downsample(const ImageU8& img, int out_w, int out_h) {
  check_dims(out_w, out_h);
  ImageU8 out = ImageU8::create(out_w, out_h);

  const double scale_x = static_cast<double>(img.width) / out_w;
  const double scale_y = static_cast<double>(img.height) / out_h;

  for (int y = 0; y < out_h; ++y) {
    double src_y = (y + 0.5) * scale_y - 0.5;
    if (src_y < 0.0) src_y = 0.0;
    if (src_y > img.height - 1) src_y = img.height - 1;
    const int y0 = static_cast<int>(src_y) < img.height - 1
                       ? static_cast<int>(src_y)
                       : img.height - 1;
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = src_y - y0;

    for (int x = 0; x < out_w; ++x) {
      double src_x = (x + 0.5) * scale_x - 0.5;
      if (src_x < 0.0) src_x = 0.0;
      if (src_x > img.width - 1) src_x = img.width - 1;
      const int x0 = static_cast<int>(src_x) < img.width - 1
                         ? static_cast<int>(src_x)
                         : img.width - 1;
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = src_x - x0;

      const std::uint8_t* p00 = img.pixel(x0, y0);
      const std::uint8_t* p10 = img.pixel(x1, y0);
      const std::uint8_t* p01 = img.pixel(x0, y1);
      const std::uint8_t* p11 = img.pixel(x1, y1);
      std::uint8_t* dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        // lerp form keeps constant regions exact
        const double top = p00[c] + (p10[c] - p00[c]) * fx;
        const double bot = p01[c] + (p11[c] - p01[c]) * fx;
        dst[c] = round_byte(top + (bot - top) * fy);
      }
    }
  }
  return out;
}

std::array<std::vector<double>, 3> channel_histogram(const ImageU8& img,
                                                     int bins) {
  if (bins < 1 || 256 % bins != 0) {
    raise(ErrorCode::InvalidBins,
          "bin count must divide 256, got " + std::to_string(bins));
  }
  const int width = 256 / bins;
  std::array<std::vector<double>, 3> hist;
  for (auto& h : hist) h.assign(bins, 0.0);

  const double unit = 1.0 / static_cast<double>(img.pixel_count());
  for (std::size_t i = 0; i < img.data.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      hist[c][img.data[i + c] / width] += unit;
    }
  }
  return hist;
}

double histogram_l1_distance(const std::array<std::vector<double>, 3>& a,
                             const std::array<std::vector<double>, 3>& b) {
  double d = 0.0;
  for (int c = 0; c < 3; ++c) {
    if (a[c].size() != b[c].size()) {
      raise(ErrorCode::DimensionMismatch, "histogram bin counts differ");
    }
    for (std::size_t i = 0; i < a[c].size(); ++i) {
      d += std::abs(a[c][i] - b[c][i]);
    }
  }
  return d;
}

ImageU8 round_to_bytes(const ImageF32& img) {
  ImageU8 out = ImageU8::create(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = round_byte(img.data[i] * 255.0);
  }
  return out;
}

ImageF32 to_normalized(const ImageU8& img) {
  ImageF32 out = ImageF32::create(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<float>(img.data[i] / 255.0);
  }
  return out;
}

}  // namespace icelut::imaging
