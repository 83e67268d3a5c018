#include <cstdio>
#include <cstring>
#include <vector>

#include "icelut/model.hpp"

namespace icelut::model {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'E', 'M', 'D', 'L', '0', '1'};

struct Writer {
  std::FILE* f;
  const std::string& path;

  void bytes(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f) != n) {
      std::fclose(f);
      raise(ErrorCode::IoFailure, "short write to " + path);
    }
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void tensor(const std::vector<double>& values) {
    u64(values.size());
    std::vector<float> f32(values.begin(), values.end());
    bytes(f32.data(), f32.size() * 4);
  }
};

struct Reader {
  std::FILE* f;
  const std::string& path;

  void bytes(void* p, std::size_t n) {
    if (std::fread(p, 1, n, f) != n) {
      std::fclose(f);
      raise(ErrorCode::CorruptFile, "unexpected end of " + path);
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  void tensor(std::vector<double>& values, std::size_t expect) {
    std::uint64_t count = u64();
    if (count != expect) {
      std::fclose(f);
      raise(ErrorCode::CorruptFile,
            "tensor length " + std::to_string(count) + " != expected " +
                std::to_string(expect) + " in " + path);
    }
    std::vector<float> f32(count);
    bytes(f32.data(), f32.size() * 4);
    values.assign(f32.begin(), f32.end());
  }
};

void write_branch(Writer& w, const PointwiseBranch& branch) {
  for (const DenseLayer& layer : branch.layers) {
    w.tensor(layer.w);
    w.tensor(layer.b);
  }
}

void read_branch(Reader& r, PointwiseBranch& branch) {
  for (DenseLayer& layer : branch.layers) {
    r.tensor(layer.w, layer.w.size());
    r.tensor(layer.b, layer.b.size());
  }
}

}  // namespace

void save_checkpoint(const TrainableModel& model, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  }
  Writer w{f, path};
  w.bytes(kMagic, 8);
  const ModelConfig& c = model.config;
  w.u32(static_cast<std::uint32_t>(c.channels));
  w.u32(static_cast<std::uint32_t>(c.groups));
  w.u32(static_cast<std::uint32_t>(c.group_length));
  w.u32(static_cast<std::uint32_t>(c.basis_count));
  w.u32(static_cast<std::uint32_t>(c.lattice_bins));
  w.u32(static_cast<std::uint32_t>(c.train_resolution));
  w.u32(static_cast<std::uint32_t>(c.first_layer_kernel));
  w.u32(c.branch_mode == BranchMode::kParallelNibbles ? 0u : 1u);
  w.u32(c.coupling == LatticeCoupling::kFull ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(c.layer_widths.size()));
  for (int width : c.layer_widths) {
    w.u32(static_cast<std::uint32_t>(width));
  }
  write_branch(w, model.msb_branch);
  write_branch(w, model.lsb_branch);
  for (const DenseLayer& fc : model.head.group_fc) {
    w.tensor(fc.w);
    w.tensor(fc.b);
  }
  for (const Lattice3D& lattice : model.basis) {
    w.tensor(lattice.values);
  }
  if (std::fclose(f) != 0) {
    raise(ErrorCode::IoFailure, "cannot finish writing " + path);
  }
}

TrainableModel load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path);
  }
  Reader r{f, path};

  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    std::fclose(f);
    raise(ErrorCode::BadMagic, "not a model checkpoint: " + path);
  }

  ModelConfig config;
  config.channels = static_cast<int>(r.u32());
  config.groups = static_cast<int>(r.u32());
  config.group_length = static_cast<int>(r.u32());
  config.basis_count = static_cast<int>(r.u32());
  config.lattice_bins = static_cast<int>(r.u32());
  config.train_resolution = static_cast<int>(r.u32());
  config.first_layer_kernel = static_cast<int>(r.u32());
  config.branch_mode = r.u32() == 0 ? BranchMode::kParallelNibbles
                                    : BranchMode::kSingleByte;
  config.coupling =
      r.u32() == 0 ? LatticeCoupling::kFull : LatticeCoupling::kPerChannel;
  std::uint32_t width_count = r.u32();
  if (width_count > 64) {
    std::fclose(f);
    raise(ErrorCode::CorruptFile, "implausible layer count in " + path);
  }
  config.layer_widths.clear();
  for (std::uint32_t i = 0; i < width_count; ++i) {
    config.layer_widths.push_back(static_cast<int>(r.u32()));
  }
  try {
    config.validate();
  } catch (const Error& e) {
    std::fclose(f);
    raise(ErrorCode::CorruptFile,
          std::string("invalid checkpoint config: ") + e.what());
  }

  // build the right shapes, then fill them from the file
  TrainableModel model = make_model(config, 0);
  read_branch(r, model.msb_branch);
  read_branch(r, model.lsb_branch);
  for (DenseLayer& fc : model.head.group_fc) {
    r.tensor(fc.w, fc.w.size());
    r.tensor(fc.b, fc.b.size());
  }
  for (Lattice3D& lattice : model.basis) {
    r.tensor(lattice.values, lattice.values.size());
  }

  // exactly at EOF?
  std::uint8_t extra;
  if (std::fread(&extra, 1, 1, f) == 1) {
    std::fclose(f);
    raise(ErrorCode::CorruptFile, "trailing bytes in " + path);
  }
  std::fclose(f);
  return model;
}

}  // namespace icelut::model
