#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "icelut/lutgen.hpp"
#include "icelut/model.hpp"

namespace icelut::engine {

// Exact operation tally of the table-driven path. Channel lookups are one
// per pixel per plane; weight lookups one per head group per image.
struct OpCounter {
  std::uint64_t channel_lookups = 0;
  std::uint64_t weight_lookups = 0;
  std::uint64_t adds = 0;
  std::uint64_t multiplies = 0;
  std::uint64_t channel_accum_adds = 0;  // subset of adds
  std::uint64_t interpolation_ops = 0;
};

// Pure table walk: plane split, per-pixel channel-row accumulation (FP32,
// row-major order), quantize, per-group INT8 fetch, integer sum, one scale
// multiply. Touches no network weights.
std::vector<double> lut_weights(const lutgen::LutBundle& bundle,
                                const imaging::ImageU8& working,
                                OpCounter* counter = nullptr);

// Full-resolution retouch: downsample to working_size^2, lut_weights,
// fuse the basis lattices, trilinear-map every pixel, round half-up.
// threads > 1 splits the mapping pass over rows; output is identical for
// any thread count.
imaging::ImageU8 retouch(const lutgen::LutBundle& bundle,
                         const imaging::ImageU8& full, int working_size = 32,
                         OpCounter* counter = nullptr, int threads = 1);

struct EquivalenceReport {
  double max_weight_deviation = 0.0;
  double weight_bound = 0.0;  // groups * scale / 2
  int max_pixel_deviation = 0;  // byte units
  int images = 0;
};

// Compares the table path against the network path with the same
// quantization applied to its pooled features. Reports deviations; never
// throws on a deviation.
EquivalenceReport verify_equivalence(const model::TrainableModel& trained,
                                     const lutgen::LutBundle& bundle,
                                     std::span<const imaging::ImageU8> images,
                                     int working_size = 32);

struct OpCountReport {
  std::uint64_t table_lookups = 0;         // channel-row fetches (2 per pixel)
  std::uint64_t weight_table_lookups = 0;  // group-row fetches
  std::uint64_t adds = 0;                  // weight-stage adds
  std::uint64_t multiplies = 0;            // weight-stage multiplies/divides
  std::uint64_t channel_accum_adds = 0;
  std::uint64_t weight_stage_arithmetic = 0;  // adds + multiplies
  std::uint64_t interpolation_ops = 0;        // mapping-pass arithmetic
};

// Runs the instrumented path on a deterministic synthetic image.
OpCountReport count_ops(const lutgen::LutBundle& bundle, int working_size,
                        int full_w, int full_h);

struct StageStats {
  double median_ms = 0.0;
  double p10_ms = 0.0;
  double p90_ms = 0.0;
};

struct BenchReport {
  StageStats weight_stage;          // per image, table path
  StageStats interpolation_stage;   // per image
  std::optional<StageStats> network_weight_stage;  // per image, if model given
  int images = 0;
  int repeats = 0;
};

// Wall-clock medians over `repeats` passes after one warmup pass.
// Single-threaded. repeats must be >= 3.
BenchReport bench(const lutgen::LutBundle& bundle,
                  std::span<const imaging::ImageU8> images, int repeats,
                  const model::TrainableModel* network = nullptr,
                  int working_size = 32);

}  // namespace icelut::engine
