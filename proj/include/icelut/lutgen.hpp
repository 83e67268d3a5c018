#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icelut/model.hpp"

namespace icelut::lutgen {

// Uniform symmetric quantizer for pooled features:
//   Q(u) = clamp(floor(u * step) / step, -offset, offset - 1/step)
// yielding index_count() = 2 * offset * step distinct values.
struct QuantSpec {
  double sampling_interval = 2.0;  // feature steps per unit
  double offset = 16.0;            // clamp radius

  int index_count() const;
  void validate() const;
};

double quantize_feature(double u, const QuantSpec& spec);
int feature_to_index(double q, const QuantSpec& spec);
double index_to_feature(int index, const QuantSpec& spec);

enum class BranchTag : std::uint8_t { kMsb = 0, kLsb = 1 };

// All 16^3 nibble triples -> branch feature rows, FP32, entry index
// r*256 + g*16 + b, each entry `channels` floats.
struct ChannelLut {
  BranchTag tag = BranchTag::kMsb;
  int channels = 0;
  std::vector<float> values;

  const float* entry(int r, int g, int b) const {
    return values.data() +
           (static_cast<std::size_t>(r) * 256 + g * 16 + b) * channels;
  }
};

// Per-group INT8 tables over quantized feature pairs, one shared scale.
// Layout: ((k*V + i)*V + j)*N + n.
struct WeightLut {
  int groups = 0;       // K
  int outputs = 0;      // N
  int index_count = 0;  // V
  float scale = 1.f;    // s_w
  std::vector<std::int8_t> values;

  const std::int8_t* row(int k, int i, int j) const {
    return values.data() +
           ((static_cast<std::size_t>(k) * index_count + i) * index_count + j) *
               outputs;
  }
};

// Everything inference needs; the network itself stays behind.
struct LutBundle {
  model::ModelConfig config;
  QuantSpec quant;
  ChannelLut msb;
  ChannelLut lsb;
  WeightLut weights;
  int lattice_bins = 0;
  std::vector<std::vector<float>> basis;  // N arrays of M^3*3, RGB-minor

  void validate() const;
};

ChannelLut build_channel_lut(const model::PointwiseBranch& branch,
                             BranchTag tag);

// Requires group_length == 2 (the table is indexed by feature pairs).
WeightLut build_weight_lut(const model::SplitFC& head, const QuantSpec& spec);

LutBundle bake(const model::TrainableModel& model, const QuantSpec& spec);

struct StorageReport {
  std::uint64_t weight_lut_bytes = 0;
  std::uint64_t channel_lut_bytes = 0;
  std::uint64_t basis_bytes = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t total_bytes = 0;
};

StorageReport bundle_storage(const LutBundle& bundle);

// Size of one flat lookup table over every possible input patch:
// 256^(kernel*kernel*channels) bytes, exactly.
struct NaiveLutSize {
  int kernel = 0;
  int channels = 0;
  int exponent_bits = 0;        // table is 2^exponent_bits bytes
  std::string bytes_decimal;    // exact decimal rendering
  double bytes_approx = 0.0;    // 2^exponent_bits as a double
};

NaiveLutSize naive_lut_size(int kernel, int channels);

void export_bundle(const LutBundle& bundle, const std::string& path);
LutBundle import_bundle(const std::string& path);

}  // namespace icelut::lutgen
