#include <zlib.h>

#include <cstdio>
#include <cstring>

#include "icelut/lutgen.hpp"

namespace icelut::lutgen {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'E', 'L', 'U', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void append(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const std::uint8_t* bytes = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), bytes, bytes + n);
}

template <typename T>
void append_value(std::vector<std::uint8_t>& out, T v) {
  append(out, &v, sizeof(T));
}

}  // namespace

void export_bundle(const LutBundle& bundle, const std::string& path) {
  bundle.validate();

  // payload: msb table, lsb table, weight table, basis lattices
  std::vector<std::uint8_t> payload;
  append(payload, bundle.msb.values.data(),
         bundle.msb.values.size() * sizeof(float));
  append(payload, bundle.lsb.values.data(),
         bundle.lsb.values.size() * sizeof(float));
  append(payload, bundle.weights.values.data(), bundle.weights.values.size());
  for (const auto& values : bundle.basis) {
    append(payload, values.data(), values.size() * sizeof(float));
  }
  const std::uint32_t checksum = static_cast<std::uint32_t>(
      crc32(0L, payload.data(), static_cast<uInt>(payload.size())));

  std::vector<std::uint8_t> out;
  append(out, kMagic, 8);
  append_value(out, kVersion);
  append_value(out, static_cast<std::uint32_t>(bundle.config.channels));
  append_value(out, static_cast<std::uint32_t>(bundle.config.groups));
  append_value(out, static_cast<std::uint32_t>(bundle.config.group_length));
  append_value(out, static_cast<std::uint32_t>(bundle.config.basis_count));
  append_value(out, static_cast<std::uint32_t>(bundle.lattice_bins));
  append_value(out, static_cast<float>(bundle.quant.sampling_interval));
  append_value(out, static_cast<float>(bundle.quant.offset));
  append_value(out, static_cast<std::uint32_t>(bundle.quant.index_count()));
  append_value(out, bundle.weights.scale);
  append_value(out, checksum);
  append(out, payload.data(), payload.size());

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  }
  std::size_t put = std::fwrite(out.data(), 1, out.size(), f);
  if (put != out.size() || std::fclose(f) != 0) {
    raise(ErrorCode::IoFailure, "short write to " + path);
  }
}

LutBundle import_bundle(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path);
  }
  std::fseek(f, 0, SEEK_END);
  long file_size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  if (file_size < 0) {
    std::fclose(f);
    raise(ErrorCode::IoFailure, "cannot stat " + path);
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(file_size));
  std::size_t got = bytes.empty() ? 0 : std::fread(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (got != bytes.size()) {
    raise(ErrorCode::IoFailure, "short read from " + path);
  }

  constexpr std::size_t kHeaderSize = 52;
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    raise(ErrorCode::BadMagic, "not a table bundle: " + path);
  }
  if (bytes.size() < kHeaderSize) {
    raise(ErrorCode::ChecksumMismatch, "truncated header in " + path);
  }

  std::size_t pos = 8;
  auto read_u32 = [&]() {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto read_f32 = [&]() {
    float v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };

  const std::uint32_t version = read_u32();
  if (version != kVersion) {
    raise(ErrorCode::VersionMismatch,
          "bundle version " + std::to_string(version) + " unsupported");
  }

  LutBundle bundle;
  bundle.config.channels = static_cast<int>(read_u32());
  bundle.config.groups = static_cast<int>(read_u32());
  bundle.config.group_length = static_cast<int>(read_u32());
  bundle.config.basis_count = static_cast<int>(read_u32());
  bundle.lattice_bins = static_cast<int>(read_u32());
  bundle.config.lattice_bins = bundle.lattice_bins;
  bundle.quant.sampling_interval = read_f32();
  bundle.quant.offset = read_f32();
  const std::uint32_t v_stored = read_u32();
  const float scale = read_f32();
  const std::uint32_t checksum_stored = read_u32();

  try {
    bundle.config.validate();
    bundle.quant.validate();
  } catch (const Error& e) {
    raise(ErrorCode::ChecksumMismatch,
          std::string("inconsistent bundle header: ") + e.what());
  }
  const int V = bundle.quant.index_count();
  if (v_stored != static_cast<std::uint32_t>(V)) {
    raise(ErrorCode::ChecksumMismatch, "index count disagrees with quantizer");
  }

  const int C = bundle.config.channels;
  const int K = bundle.config.groups;
  const int N = bundle.config.basis_count;
  const int M = bundle.lattice_bins;
  const std::size_t channel_count = static_cast<std::size_t>(4096) * C;
  const std::size_t weight_count = static_cast<std::size_t>(K) * V * V * N;
  const std::size_t lattice_count =
      static_cast<std::size_t>(M) * M * M * 3;
  const std::size_t payload_size = channel_count * 4 * 2 + weight_count +
                                   static_cast<std::size_t>(N) * lattice_count * 4;
  if (bytes.size() != kHeaderSize + payload_size) {
    raise(ErrorCode::ChecksumMismatch,
          "payload size mismatch in " + path + " (expected " +
              std::to_string(kHeaderSize + payload_size) + " bytes, file has " +
              std::to_string(bytes.size()) + ")");
  }

  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  const std::uint32_t checksum_got = static_cast<std::uint32_t>(
      crc32(0L, payload, static_cast<uInt>(payload_size)));
  if (checksum_got != checksum_stored) {
    raise(ErrorCode::ChecksumMismatch, "payload checksum mismatch in " + path);
  }

  bundle.msb.tag = BranchTag::kMsb;
  bundle.msb.channels = C;
  bundle.msb.values.resize(channel_count);
  std::memcpy(bundle.msb.values.data(), payload, channel_count * 4);
  payload += channel_count * 4;

  bundle.lsb.tag = BranchTag::kLsb;
  bundle.lsb.channels = C;
  bundle.lsb.values.resize(channel_count);
  std::memcpy(bundle.lsb.values.data(), payload, channel_count * 4);
  payload += channel_count * 4;

  bundle.weights.groups = K;
  bundle.weights.outputs = N;
  bundle.weights.index_count = V;
  bundle.weights.scale = scale;
  bundle.weights.values.resize(weight_count);
  std::memcpy(bundle.weights.values.data(), payload, weight_count);
  payload += weight_count;

  bundle.basis.resize(N);
  for (int n = 0; n < N; ++n) {
    bundle.basis[n].resize(lattice_count);
    std::memcpy(bundle.basis[n].data(), payload, lattice_count * 4);
    payload += lattice_count * 4;
  }

  bundle.validate();
  return bundle;
}

}  // namespace icelut::lutgen
