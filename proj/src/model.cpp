#include "icelut/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

#include "model_detail.hpp"

namespace icelut::model {

namespace {

std::atomic<std::uint64_t> g_network_evals{0};

void note_network_evals(std::uint64_t n) {
  g_network_evals.fetch_add(n, std::memory_order_relaxed);
}

}  // namespace

std::uint64_t network_eval_count() {
  return g_network_evals.load(std::memory_order_relaxed);
}

void reset_network_eval_count() {
  g_network_evals.store(0, std::memory_order_relaxed);
}

void ModelConfig::validate() const {
  if (channels < 1 || groups < 1 || group_length < 1) {
    raise(ErrorCode::InvalidConfig, "channels/groups/group_length must be >= 1");
  }
  if (channels != groups * group_length) {
    raise(ErrorCode::InvalidConfig,
          "channels (" + std::to_string(channels) +
              ") must equal groups*group_length (" +
              std::to_string(groups * group_length) + ")");
  }
  if (basis_count < 1) {
    raise(ErrorCode::InvalidConfig, "basis_count must be >= 1");
  }
  if (lattice_bins < 2) {
    raise(ErrorCode::InvalidConfig, "lattice_bins must be >= 2");
  }
  if (train_resolution < 1) {
    raise(ErrorCode::InvalidConfig, "train_resolution must be >= 1");
  }
  if (first_layer_kernel != 1 && first_layer_kernel != 3) {
    raise(ErrorCode::InvalidConfig, "first_layer_kernel must be 1 or 3");
  }
  for (int w : layer_widths) {
    if (w < 1) {
      raise(ErrorCode::InvalidConfig, "layer widths must be >= 1");
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) {
    raise(ErrorCode::InvalidConfig, "epochs must be >= 1");
  }
  if (batch_size < 1) {
    raise(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    raise(ErrorCode::InvalidConfig, "learning_rate must be positive");
  }
  if (max_steps < 0) {
    raise(ErrorCode::InvalidConfig, "max_steps must be >= 0");
  }
}

DenseLayer DenseLayer::zeros(int in, int out) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.w.assign(static_cast<std::size_t>(in) * out, 0.0);
  layer.b.assign(out, 0.0);
  return layer;
}

Lattice3D Lattice3D::identity(int bins) {
  Lattice3D lattice = zeros(bins);
  const double denom = bins - 1;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      for (int k = 0; k < bins; ++k) {
        lattice.at(i, j, k, 0) = i / denom;
        lattice.at(i, j, k, 1) = j / denom;
        lattice.at(i, j, k, 2) = k / denom;
      }
    }
  }
  return lattice;
}

Lattice3D Lattice3D::zeros(int bins) {
  Lattice3D lattice;
  lattice.bins = bins;
  lattice.values.assign(static_cast<std::size_t>(bins) * bins * bins * 3, 0.0);
  return lattice;
}

namespace {

PointwiseBranch make_branch(const ModelConfig& config, Rng rng) {
  PointwiseBranch branch;
  branch.kernel = config.first_layer_kernel;
  std::vector<int> widths;
  widths.push_back(3 * branch.kernel * branch.kernel);
  widths.insert(widths.end(), config.layer_widths.begin(),
                config.layer_widths.end());
  widths.push_back(config.channels);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer = DenseLayer::zeros(widths[l], widths[l + 1]);
    const double scale = std::sqrt(2.0 / layer.in);
    for (double& w : layer.w) w = rng.normal() * scale;
    branch.layers.push_back(std::move(layer));
  }
  return branch;
}

}  // namespace

TrainableModel make_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  TrainableModel model;
  model.config = config;
  model.msb_branch = make_branch(config, rng.fork(1));
  if (config.branch_mode == BranchMode::kParallelNibbles) {
    model.lsb_branch = make_branch(config, rng.fork(2));
  }

  model.head.groups = config.groups;
  model.head.group_length = config.group_length;
  model.head.outputs = config.basis_count;
  for (int k = 0; k < config.groups; ++k) {
    DenseLayer fc = DenseLayer::zeros(config.group_length, config.basis_count);
    // biases sum to e_0 across groups; weights start at zero so the
    // freshly built model is exactly the identity transform
    fc.b[0] = 1.0 / config.groups;
    model.head.group_fc.push_back(std::move(fc));
  }

  model.basis.reserve(config.basis_count);
  model.basis.push_back(Lattice3D::identity(config.lattice_bins));
  for (int n = 1; n < config.basis_count; ++n) {
    model.basis.push_back(Lattice3D::zeros(config.lattice_bins));
  }

  if (config.coupling == LatticeCoupling::kPerChannel) {
    project_lattices_per_channel(model);
  }
  return model;
}

namespace detail {

Plane plane_from_nibbles(std::span<const std::uint8_t> nibbles, int w, int h) {
  Plane plane;
  plane.width = w;
  plane.height = h;
  plane.channels = 3;
  plane.values.resize(nibbles.size());
  for (std::size_t i = 0; i < nibbles.size(); ++i) {
    plane.values[i] = nibbles[i] / 15.0;
  }
  return plane;
}

Plane plane_from_bytes(const imaging::ImageU8& img) {
  Plane plane;
  plane.width = img.width;
  plane.height = img.height;
  plane.channels = 3;
  plane.values.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    plane.values[i] = img.data[i] / 255.0;
  }
  return plane;
}

namespace {

// y = W x + b for one pixel
inline void dense_apply(const DenseLayer& layer, const double* x, double* y) {
  const double* w = layer.w.data();
  for (int o = 0; o < layer.out; ++o) {
    double acc = layer.b[o];
    const double* row = w + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) {
      acc += row[i] * x[i];
    }
    y[o] = acc;
  }
}

// Zero-padded 3x3 neighborhood of pixel (x,y), tap-major then channel.
inline void gather3x3(const Plane& input, int x, int y, double* out) {
  int t = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx, ++t) {
      const int sx = x + dx, sy = y + dy;
      double* dst = out + t * 3;
      if (sx < 0 || sy < 0 || sx >= input.width || sy >= input.height) {
        dst[0] = dst[1] = dst[2] = 0.0;
      } else {
        const double* src =
            input.at(static_cast<std::size_t>(sy) * input.width + sx);
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
      }
    }
  }
}

}  // namespace

Plane branch_forward_plane(const PointwiseBranch& branch, const Plane& input,
                           BranchStash* stash) {
  const std::size_t pixels = input.pixels();
  note_network_evals(pixels);
  if (stash) {
    stash->acts.clear();
    stash->acts.reserve(branch.layers.size());
  }

  // first layer (may gather a neighborhood)
  Plane cur;
  {
    const DenseLayer& layer = branch.layers.front();
    cur.width = input.width;
    cur.height = input.height;
    cur.channels = layer.out;
    cur.values.resize(pixels * layer.out);
    if (branch.kernel == 1) {
      for (std::size_t p = 0; p < pixels; ++p) {
        dense_apply(layer, input.at(p), cur.at(p));
      }
    } else {
      double patch[27];
      for (int y = 0; y < input.height; ++y) {
        for (int x = 0; x < input.width; ++x) {
          gather3x3(input, x, y, patch);
          dense_apply(layer, patch,
                      cur.at(static_cast<std::size_t>(y) * input.width + x));
        }
      }
    }
    if (branch.layers.size() > 1) {
      for (double& v : cur.values) v = v > 0.0 ? v : 0.0;
    }
    if (stash) stash->acts.push_back(cur);
  }

  for (std::size_t l = 1; l < branch.layers.size(); ++l) {
    const DenseLayer& layer = branch.layers[l];
    Plane next;
    next.width = cur.width;
    next.height = cur.height;
    next.channels = layer.out;
    next.values.resize(pixels * layer.out);
    for (std::size_t p = 0; p < pixels; ++p) {
      dense_apply(layer, cur.at(p), next.at(p));
    }
    if (l + 1 < branch.layers.size()) {
      for (double& v : next.values) v = v > 0.0 ? v : 0.0;
    }
    if (stash) stash->acts.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

void branch_backward_plane(const PointwiseBranch& branch, const Plane& input,
                           const BranchStash& stash,
                           std::span<const double> upstream_per_pixel,
                           BranchGradients& grads) {
  const std::size_t pixels = input.pixels();
  const std::size_t n_layers = branch.layers.size();

  std::vector<double> g;
  std::vector<double> g_prev;
  double patch[27];

  for (std::size_t p = 0; p < pixels; ++p) {
    // assign, not copy: the swap chain below leaves g sized for an inner
    // layer, which can be narrower than the upstream signal
    g.assign(upstream_per_pixel.begin(), upstream_per_pixel.end());
    for (std::size_t l = n_layers; l-- > 0;) {
      const DenseLayer& layer = branch.layers[l];
      DenseLayer& grad = grads.layers[l];
      const double* x;
      if (l == 0) {
        if (branch.kernel == 1) {
          x = input.at(p);
        } else {
          gather3x3(input, static_cast<int>(p % input.width),
                    static_cast<int>(p / input.width), patch);
          x = patch;
        }
      } else {
        x = stash.acts[l - 1].at(p);
      }

      for (int o = 0; o < layer.out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        double* wrow = grad.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) {
          wrow[i] += go * x[i];
        }
        grad.b[o] += go;
      }

      if (l == 0) break;
      // propagate through the weights, then mask by this layer's ReLU
      g_prev.assign(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        const double* wrow =
            layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) {
          g_prev[i] += go * wrow[i];
        }
      }
      const double* act = stash.acts[l - 1].at(p);
      for (int i = 0; i < layer.in; ++i) {
        if (act[i] <= 0.0) g_prev[i] = 0.0;  // subgradient 0 at the kink
      }
      g.swap(g_prev);
    }
  }
}

}  // namespace detail

std::vector<double> branch_features_normalized(const PointwiseBranch& branch,
                                               const double in[3]) {
  if (branch.kernel != 1) {
    raise(ErrorCode::InvalidConfig,
          "per-pixel features require a pointwise first layer");
  }
  note_network_evals(1);
  std::vector<double> cur(in, in + 3);
  std::vector<double> next;
  for (std::size_t l = 0; l < branch.layers.size(); ++l) {
    const DenseLayer& layer = branch.layers[l];
    next.assign(layer.out, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) acc += row[i] * cur[i];
      next[o] = acc;
    }
    if (l + 1 < branch.layers.size()) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<double> branch_pixel_features(const PointwiseBranch& branch,
                                          const std::array<int, 3>& nibble) {
  for (int v : nibble) {
    if (v < 0 || v > 15) {
      raise(ErrorCode::InvalidConfig, "nibble values must be in 0..15");
    }
  }
  const double in[3] = {nibble[0] / 15.0, nibble[1] / 15.0, nibble[2] / 15.0};
  return branch_features_normalized(branch, in);
}

namespace {

std::vector<double> mean_features(const detail::Plane& feats) {
  std::vector<double> mean(feats.channels, 0.0);
  const std::size_t pixels = feats.pixels();
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* row = feats.at(p);
    for (int c = 0; c < feats.channels; ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(pixels);
  for (double& v : mean) v *= inv;
  return mean;
}

}  // namespace

std::vector<double> pooled_features(const TrainableModel& model,
                                    const imaging::ImageU8& working) {
  using namespace detail;
  if (model.config.branch_mode == BranchMode::kParallelNibbles) {
    imaging::BitPlanePair planes = imaging::split_bitplanes(working);
    Plane msb = plane_from_nibbles(planes.msb, working.width, working.height);
    Plane lsb = plane_from_nibbles(planes.lsb, working.width, working.height);
    std::vector<double> u =
        mean_features(branch_forward_plane(model.msb_branch, msb, nullptr));
    std::vector<double> u_low =
        mean_features(branch_forward_plane(model.lsb_branch, lsb, nullptr));
    for (std::size_t c = 0; c < u.size(); ++c) u[c] += u_low[c];
    return u;
  }
  Plane bytes = plane_from_bytes(working);
  return mean_features(branch_forward_plane(model.msb_branch, bytes, nullptr));
}

std::vector<double> predict_weights(const SplitFC& head,
                                    std::span<const double> pooled) {
  if (static_cast<int>(pooled.size()) != head.groups * head.group_length) {
    raise(ErrorCode::DimensionMismatch,
          "pooled feature width " + std::to_string(pooled.size()) +
              " does not match head expecting " +
              std::to_string(head.groups * head.group_length));
  }
  note_network_evals(1);
  std::vector<double> weights(head.outputs, 0.0);
  for (int k = 0; k < head.groups; ++k) {
    const DenseLayer& fc = head.group_fc[k];
    const double* u = pooled.data() + static_cast<std::size_t>(k) * head.group_length;
    for (int n = 0; n < head.outputs; ++n) {
      double acc = fc.b[n];
      const double* row = fc.w.data() + static_cast<std::size_t>(n) * fc.in;
      for (int l = 0; l < head.group_length; ++l) acc += row[l] * u[l];
      weights[n] += acc;
    }
  }
  return weights;
}

Lattice3D fuse_luts(std::span<const Lattice3D> basis,
                    std::span<const double> weights) {
  if (basis.empty() || basis.size() != weights.size()) {
    raise(ErrorCode::DimensionMismatch,
          "basis count " + std::to_string(basis.size()) +
              " does not match weight count " + std::to_string(weights.size()));
  }
  const int bins = basis.front().bins;
  Lattice3D fused = Lattice3D::zeros(bins);
  for (std::size_t n = 0; n < basis.size(); ++n) {
    if (basis[n].bins != bins) {
      raise(ErrorCode::DimensionMismatch, "basis lattices disagree on bins");
    }
    const double wn = weights[n];
    if (wn == 0.0) continue;
    const double* src = basis[n].values.data();
    double* dst = fused.values.data();
    for (std::size_t i = 0; i < fused.values.size(); ++i) {
      dst[i] += wn * src[i];
    }
  }
  return fused;
}

imaging::ImageF32 trilinear_apply(const Lattice3D& lattice,
                                  const imaging::ImageU8& img) {
  using namespace detail;
  std::vector<float> out(img.data.size());
  const double* values = lattice.values.data();
  const std::size_t pixels = img.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* px = img.data.data() + p * 3;
    Cell cell = cell_of(lattice.bins, px[0], px[1], px[2]);
    double w[8];
    std::size_t off[8];
    corner_weights(cell, w);
    corner_offsets(cell, lattice.bins, off);
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) {
        acc += w[v] * values[off[v] + c];
      }
      out[p * 3 + c] = static_cast<float>(acc);
    }
  }
  return imaging::ImageF32::from_raw(img.width, img.height, std::move(out));
}

ForwardResult forward(const TrainableModel& model, const imaging::ImageU8& full,
                      const imaging::ImageU8& working) {
  ForwardResult result;
  result.pooled = pooled_features(model, working);
  result.weights = predict_weights(model.head, result.pooled);
  Lattice3D fused = fuse_luts(model.basis, result.weights);
  result.output = trilinear_apply(fused, full);
  return result;
}

double l1_loss(const imaging::ImageF32& prediction,
               const imaging::ImageF32& target) {
  if (prediction.width != target.width || prediction.height != target.height) {
    raise(ErrorCode::DimensionMismatch, "loss operands differ in size");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.data.size(); ++i) {
    acc += std::abs(static_cast<double>(prediction.data[i]) - target.data[i]);
  }
  return acc / static_cast<double>(prediction.data.size());
}

void project_lattices_per_channel(TrainableModel& model) {
  const int M = model.config.lattice_bins;
  const double inv = 1.0 / (static_cast<double>(M) * M);
  for (Lattice3D& lattice : model.basis) {
    for (int c = 0; c < 3; ++c) {
      // mean over the two axes the channel must not depend on
      std::vector<double> curve(M, 0.0);
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
          for (int k = 0; k < M; ++k) {
            const int own = c == 0 ? i : (c == 1 ? j : k);
            curve[own] += lattice.at(i, j, k, c);
          }
        }
      }
      for (double& v : curve) v *= inv;
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
          for (int k = 0; k < M; ++k) {
            const int own = c == 0 ? i : (c == 1 ? j : k);
            lattice.at(i, j, k, c) = curve[own];
          }
        }
      }
    }
  }
}

}  // namespace icelut::model
