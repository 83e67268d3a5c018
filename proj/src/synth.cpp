#include "icelut/synth.hpp"

#include <cmath>
#include <cstdlib>
#include <string_view>

#include "icelut/rng.hpp"

namespace icelut::synth {

using imaging::ImageU8;

ImageU8 smooth_noise(std::uint64_t seed, int size, int grid_size) {
  if (size < 1 || grid_size < 2) {
    raise(ErrorCode::InvalidConfig, "smooth_noise needs size >= 1, grid >= 2");
  }
  Rng rng(seed);
  ImageU8 grid = ImageU8::create(grid_size, grid_size);
  for (std::uint8_t& v : grid.data) {
    v = rng.byte();
  }
  return imaging::bilinear_downsample(grid, size, size);
}

namespace {

std::uint8_t clamp_byte(double v) {
  const double r = std::floor(v + 0.5);
  if (r < 0.0) return 0;
  if (r > 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

ImageU8 apply_gamma(const ImageU8& input, double g) {
  if (g == 1.0) {
    return input;
  }
  ImageU8 out = ImageU8::create(input.width, input.height);
  std::uint8_t curve[256];
  for (int v = 0; v < 256; ++v) {
    curve[v] = clamp_byte(255.0 * std::pow(v / 255.0, g));
  }
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    out.data[i] = curve[input.data[i]];
  }
  return out;
}

// mild channel coupling; rows sum to 1 so gray stays gray
constexpr double kMixMatrix[3][3] = {
    {0.94, 0.04, 0.02},
    {0.02, 0.94, 0.04},
    {0.03, 0.03, 0.94},
};

ImageU8 apply_channel_mix(const ImageU8& input) {
  ImageU8 out = ImageU8::create(input.width, input.height);
  const std::size_t pixels = input.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* src = input.data.data() + p * 3;
    std::uint8_t* dst = out.data.data() + p * 3;
    for (int c = 0; c < 3; ++c) {
      dst[c] = clamp_byte(kMixMatrix[c][0] * src[0] + kMixMatrix[c][1] * src[1] +
                          kMixMatrix[c][2] * src[2]);
    }
  }
  return out;
}

ImageU8 apply_channel_swap(const ImageU8& input) {
  ImageU8 out = ImageU8::create(input.width, input.height);
  const std::size_t pixels = input.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* src = input.data.data() + p * 3;
    std::uint8_t* dst = out.data.data() + p * 3;
    dst[0] = src[1];
    dst[1] = src[2];
    dst[2] = src[0];
  }
  return out;
}

ImageU8 apply_warm_tone(const ImageU8& input) {
  ImageU8 out = ImageU8::create(input.width, input.height);
  const std::size_t pixels = input.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* src = input.data.data() + p * 3;
    std::uint8_t* dst = out.data.data() + p * 3;
    dst[0] = clamp_byte(src[0] * 1.08);
    dst[1] = clamp_byte(src[1] * 1.02);
    dst[2] = clamp_byte(src[2] * 0.92);
  }
  return out;
}

// exponent tied to the image's own brightness: dark inputs get a strong
// lift, bright inputs a mild darken — so the right curve depends on
// content, not just on a fixed map
ImageU8 apply_adaptive_gamma(const ImageU8& input) {
  double luma = 0.0;
  const std::size_t pixels = input.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* px = input.data.data() + p * 3;
    luma += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  luma /= 255.0 * static_cast<double>(pixels);
  const double g = 1.35 - 0.7 * luma;
  return apply_gamma(input, g);
}

bool parse_stage(std::string_view name, double* gamma_out, int* kind) {
  // kinds: 0 gamma, 1 mix, 2 swap, 3 warm, 4 adaptive
  if (name.rfind("gamma:", 0) == 0) {
    const std::string arg(name.substr(6));
    char* end = nullptr;
    const double g = std::strtod(arg.c_str(), &end);
    if (end == arg.c_str() || *end != '\0' || !std::isfinite(g) || g <= 0.0) {
      return false;
    }
    *gamma_out = g;
    *kind = 0;
    return true;
  }
  if (name == "channel-mix") { *kind = 1; return true; }
  if (name == "channel-swap") { *kind = 2; return true; }
  if (name == "warm-tone") { *kind = 3; return true; }
  if (name == "adaptive-gamma") { *kind = 4; return true; }
  return false;
}

struct Stage {
  int kind = 0;
  double gamma = 1.0;
};

std::vector<Stage> parse_chain(const std::string& name, bool* ok) {
  std::vector<Stage> stages;
  *ok = true;
  std::size_t begin = 0;
  while (begin <= name.size()) {
    std::size_t end = name.find('+', begin);
    if (end == std::string::npos) end = name.size();
    const std::string_view token(name.data() + begin, end - begin);
    Stage stage;
    if (!parse_stage(token, &stage.gamma, &stage.kind)) {
      *ok = false;
      return {};
    }
    stages.push_back(stage);
    begin = end + 1;
    if (end == name.size()) break;
  }
  if (stages.empty()) *ok = false;
  return stages;
}

}  // namespace

bool is_known_transform(const std::string& name) {
  bool ok = false;
  parse_chain(name, &ok);
  return ok;
}

ImageU8 apply_transform(const std::string& name, const ImageU8& input) {
  bool ok = false;
  std::vector<Stage> stages = parse_chain(name, &ok);
  if (!ok) {
    raise(ErrorCode::InvalidConfig, "unknown transform: " + name);
  }
  ImageU8 out = input;
  for (const Stage& stage : stages) {
    switch (stage.kind) {
      case 0: out = apply_gamma(out, stage.gamma); break;
      case 1: out = apply_channel_mix(out); break;
      case 2: out = apply_channel_swap(out); break;
      case 3: out = apply_warm_tone(out); break;
      default: out = apply_adaptive_gamma(out); break;
    }
  }
  return out;
}

std::vector<model::ImagePair> make_dataset(std::uint64_t seed, int count,
                                           int size,
                                           const std::string& transform) {
  if (count < 1) {
    raise(ErrorCode::InvalidConfig, "dataset needs at least one pair");
  }
  if (!is_known_transform(transform)) {
    raise(ErrorCode::InvalidConfig, "unknown transform: " + transform);
  }
  std::vector<model::ImagePair> pairs;
  pairs.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t image_seed =
        seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(i + 1);
    model::ImagePair pair;
    pair.input = smooth_noise(image_seed, size);
    pair.target = apply_transform(transform, pair.input);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace icelut::synth
