#include "icelut/lutgen.hpp"

#include <algorithm>
#include <cmath>

namespace icelut::lutgen {

int QuantSpec::index_count() const {
  return static_cast<int>(std::lround(2.0 * offset * sampling_interval));
}

void QuantSpec::validate() const {
  if (!(sampling_interval > 0.0) || !(offset > 0.0)) {
    raise(ErrorCode::InvalidConfig,
          "sampling interval and offset must be positive");
  }
  const double v = 2.0 * offset * sampling_interval;
  if (std::abs(v - std::round(v)) > 1e-9 || std::round(v) < 1.0) {
    raise(ErrorCode::InvalidConfig,
          "2 * offset * sampling_interval must be a positive integer");
  }
}

double quantize_feature(double u, const QuantSpec& spec) {
  const double step = spec.sampling_interval;
  double q = std::floor(u * step) / step;
  const double lo = -spec.offset;
  const double hi = spec.offset - 1.0 / step;
  if (q < lo) q = lo;
  if (q > hi) q = hi;
  return q;
}

int feature_to_index(double q, const QuantSpec& spec) {
  int i = static_cast<int>(
      std::floor((q + spec.offset) * spec.sampling_interval));
  if (i < 0) i = 0;
  const int v = spec.index_count();
  if (i > v - 1) i = v - 1;
  return i;
}

double index_to_feature(int index, const QuantSpec& spec) {
  return index / spec.sampling_interval - spec.offset;
}

ChannelLut build_channel_lut(const model::PointwiseBranch& branch,
                             BranchTag tag) {
  if (branch.kernel != 1) {
    raise(ErrorCode::InvalidConfig,
          "channel tables require a pointwise first layer");
  }
  ChannelLut lut;
  lut.tag = tag;
  lut.channels = branch.output_width();
  lut.values.resize(static_cast<std::size_t>(4096) * lut.channels);
  for (int r = 0; r < 16; ++r) {
    for (int g = 0; g < 16; ++g) {
      for (int b = 0; b < 16; ++b) {
        const double in[3] = {r / 15.0, g / 15.0, b / 15.0};
        std::vector<double> f = model::branch_features_normalized(branch, in);
        float* dst =
            lut.values.data() +
            (static_cast<std::size_t>(r) * 256 + g * 16 + b) * lut.channels;
        for (int c = 0; c < lut.channels; ++c) {
          dst[c] = static_cast<float>(f[c]);
        }
      }
    }
  }
  return lut;
}

WeightLut build_weight_lut(const model::SplitFC& head, const QuantSpec& spec) {
  spec.validate();
  if (head.group_length != 2) {
    raise(ErrorCode::UnsupportedGroupLength,
          "weight tables are indexed by feature pairs; group_length must be "
          "2, got " +
              std::to_string(head.group_length));
  }
  const int K = head.groups;
  const int N = head.outputs;
  const int V = spec.index_count();

  std::vector<double> raw(static_cast<std::size_t>(K) * V * V * N);
  double max_abs = 0.0;
  for (int k = 0; k < K; ++k) {
    const model::DenseLayer& fc = head.group_fc[k];
    for (int i = 0; i < V; ++i) {
      const double u0 = index_to_feature(i, spec);
      for (int j = 0; j < V; ++j) {
        const double u1 = index_to_feature(j, spec);
        double* dst =
            raw.data() +
            ((static_cast<std::size_t>(k) * V + i) * V + j) * N;
        for (int n = 0; n < N; ++n) {
          // accumulation order mirrors predict_weights exactly
          double acc = fc.b[n];
          acc += fc.w[static_cast<std::size_t>(n) * 2 + 0] * u0;
          acc += fc.w[static_cast<std::size_t>(n) * 2 + 1] * u1;
          dst[n] = acc;
          const double mag = std::abs(acc);
          if (mag > max_abs) max_abs = mag;
        }
      }
    }
  }

  WeightLut lut;
  lut.groups = K;
  lut.outputs = N;
  lut.index_count = V;
  lut.scale = max_abs > 0.0 ? static_cast<float>(max_abs / 127.0) : 1.f;
  lut.values.resize(raw.size());
  const double scale = lut.scale;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    long q = std::lround(raw[i] / scale);
    if (q < -127) q = -127;
    if (q > 127) q = 127;
    lut.values[i] = static_cast<std::int8_t>(q);
  }
  return lut;
}

LutBundle bake(const model::TrainableModel& trained, const QuantSpec& spec) {
  trained.config.validate();
  spec.validate();
  if (trained.config.branch_mode != model::BranchMode::kParallelNibbles) {
    raise(ErrorCode::InvalidConfig,
          "only the two-plane nibble form can be exported to tables");
  }
  if (trained.config.first_layer_kernel != 1) {
    raise(ErrorCode::InvalidConfig,
          "spatial first layers cannot be exported to per-color tables");
  }

  LutBundle bundle;
  bundle.config = trained.config;
  bundle.quant = spec;
  bundle.msb = build_channel_lut(trained.msb_branch, BranchTag::kMsb);
  bundle.lsb = build_channel_lut(trained.lsb_branch, BranchTag::kLsb);
  bundle.weights = build_weight_lut(trained.head, spec);
  bundle.lattice_bins = trained.config.lattice_bins;
  bundle.basis.reserve(trained.basis.size());
  for (const model::Lattice3D& lattice : trained.basis) {
    bundle.basis.emplace_back(lattice.values.begin(), lattice.values.end());
  }
  return bundle;
}

void LutBundle::validate() const {
  config.validate();
  quant.validate();
  const int C = config.channels;
  const int V = quant.index_count();
  const std::size_t lattice_values =
      static_cast<std::size_t>(lattice_bins) * lattice_bins * lattice_bins * 3;
  if (msb.channels != C || lsb.channels != C ||
      msb.values.size() != static_cast<std::size_t>(4096) * C ||
      lsb.values.size() != static_cast<std::size_t>(4096) * C) {
    raise(ErrorCode::DimensionMismatch, "channel table size mismatch");
  }
  if (weights.groups != config.groups || weights.outputs != config.basis_count ||
      weights.index_count != V ||
      weights.values.size() !=
          static_cast<std::size_t>(config.groups) * V * V * config.basis_count) {
    raise(ErrorCode::DimensionMismatch, "weight table size mismatch");
  }
  if (lattice_bins != config.lattice_bins ||
      basis.size() != static_cast<std::size_t>(config.basis_count)) {
    raise(ErrorCode::DimensionMismatch, "basis lattice count mismatch");
  }
  for (const auto& values : basis) {
    if (values.size() != lattice_values) {
      raise(ErrorCode::DimensionMismatch, "basis lattice size mismatch");
    }
  }
}

StorageReport bundle_storage(const LutBundle& bundle) {
  StorageReport report;
  report.weight_lut_bytes = bundle.weights.values.size();
  report.channel_lut_bytes =
      (bundle.msb.values.size() + bundle.lsb.values.size()) * sizeof(float);
  report.basis_bytes = 0;
  for (const auto& values : bundle.basis) {
    report.basis_bytes += values.size() * sizeof(float);
  }
  report.header_bytes = 52;
  report.total_bytes = report.weight_lut_bytes + report.channel_lut_bytes +
                       report.basis_bytes + report.header_bytes;
  return report;
}

NaiveLutSize naive_lut_size(int kernel, int channels) {
  if (kernel < 1 || channels < 1) {
    raise(ErrorCode::InvalidConfig, "kernel and channels must be >= 1");
  }
  NaiveLutSize size;
  size.kernel = kernel;
  size.channels = channels;
  size.exponent_bits = 8 * kernel * kernel * channels;

  // exact decimal of 2^exponent_bits, limbs base 1e9
  std::vector<std::uint32_t> limbs{1};
  for (int bit = 0; bit < size.exponent_bits; ++bit) {
    std::uint32_t carry = 0;
    for (std::uint32_t& limb : limbs) {
      std::uint64_t doubled = std::uint64_t(limb) * 2 + carry;
      limb = static_cast<std::uint32_t>(doubled % 1000000000ull);
      carry = static_cast<std::uint32_t>(doubled / 1000000000ull);
    }
    if (carry) limbs.push_back(carry);
  }
  std::string decimal = std::to_string(limbs.back());
  for (std::size_t i = limbs.size() - 1; i-- > 0;) {
    std::string part = std::to_string(limbs[i]);
    decimal += std::string(9 - part.size(), '0') + part;
  }
  size.bytes_decimal = decimal;
  size.bytes_approx = std::ldexp(1.0, size.exponent_bits);
  return size;
}

}  // namespace icelut::lutgen
