#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "icelut/error.hpp"

namespace icelut::imaging {

// Interleaved 8-bit RGB, row-major. data.size() == width*height*3.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static ImageU8 create(int w, int h);
  static ImageU8 from_data(int w, int h, std::vector<std::uint8_t> bytes);

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  std::uint8_t* pixel(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  bool same_size(const ImageU8& other) const {
    return width == other.width && height == other.height;
  }
};

// Normalized float image in [0,1], same layout as ImageU8. Values are
// clamped on creation; non-finite inputs clamp to 0.
struct ImageF32 {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  static ImageF32 create(int w, int h);
  static ImageF32 from_raw(int w, int h, std::vector<float> values);

  std::size_t sample_count() const { return data.size(); }
};

// One 4-bit plane pair per channel: msb = byte >> 4, lsb = byte & 15.
struct BitPlanePair {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> msb;  // interleaved RGB nibbles, values 0..15
  std::vector<std::uint8_t> lsb;
};

BitPlanePair split_bitplanes(const ImageU8& img);
ImageU8 merge_bitplanes(const BitPlanePair& planes);

// Area-agnostic bilinear resample (half-pixel centers, edge clamped),
// results rounded half-up. Handles both down- and upscaling; out == in
// copies exactly.
ImageU8 bilinear_downsample(const ImageU8& img, int out_w, int out_h);

// Per-channel normalized histograms. bins must divide 256 evenly.
std::array<std::vector<double>, 3> channel_histogram(const ImageU8& img,
                                                     int bins);

// Sum of |a-b| over matching bins of two histogram triples.
double histogram_l1_distance(const std::array<std::vector<double>, 3>& a,
                             const std::array<std::vector<double>, 3>& b);

// [0,1] floats -> bytes, round half-up.
ImageU8 round_to_bytes(const ImageF32& img);

ImageF32 to_normalized(const ImageU8& img);

}  // namespace icelut::imaging
