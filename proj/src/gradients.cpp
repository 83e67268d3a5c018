#include <cmath>

#include "icelut/model.hpp"
#include "model_detail.hpp"

namespace icelut::model {

namespace {

BranchGradients zero_branch_gradients(const PointwiseBranch& branch) {
  BranchGradients grads;
  for (const DenseLayer& layer : branch.layers) {
    grads.layers.push_back(DenseLayer::zeros(layer.in, layer.out));
  }
  return grads;
}

}  // namespace

ModelGradients zero_gradients(const TrainableModel& model) {
  ModelGradients grads;
  grads.msb = zero_branch_gradients(model.msb_branch);
  grads.lsb = zero_branch_gradients(model.lsb_branch);
  for (const DenseLayer& fc : model.head.group_fc) {
    grads.head.push_back(DenseLayer::zeros(fc.in, fc.out));
  }
  for (const Lattice3D& lattice : model.basis) {
    grads.basis.emplace_back(lattice.values.size(), 0.0);
  }
  return grads;
}

LossAndGradients compute_gradients(const TrainableModel& model,
                                   const imaging::ImageU8& full,
                                   const imaging::ImageU8& working,
                                   const imaging::ImageU8& target) {
  using namespace detail;
  if (!full.same_size(target)) {
    raise(ErrorCode::DimensionMismatch, "input/target size mismatch");
  }

  LossAndGradients result;
  result.grads = zero_gradients(model);

  // ---- forward, stashing activations ----
  const bool parallel =
      model.config.branch_mode == BranchMode::kParallelNibbles;
  Plane msb_in, lsb_in;
  if (parallel) {
    imaging::BitPlanePair planes = imaging::split_bitplanes(working);
    msb_in = plane_from_nibbles(planes.msb, working.width, working.height);
    lsb_in = plane_from_nibbles(planes.lsb, working.width, working.height);
  } else {
    msb_in = plane_from_bytes(working);
  }

  BranchStash msb_stash, lsb_stash;
  Plane msb_feats = branch_forward_plane(model.msb_branch, msb_in, &msb_stash);
  Plane lsb_feats;
  if (parallel) {
    lsb_feats = branch_forward_plane(model.lsb_branch, lsb_in, &lsb_stash);
  }

  const std::size_t work_pixels = msb_in.pixels();
  const int C = model.config.channels;
  std::vector<double> pooled(C, 0.0);
  for (std::size_t p = 0; p < work_pixels; ++p) {
    const double* row = msb_feats.at(p);
    for (int c = 0; c < C; ++c) pooled[c] += row[c];
  }
  if (parallel) {
    std::vector<double> low(C, 0.0);
    for (std::size_t p = 0; p < work_pixels; ++p) {
      const double* row = lsb_feats.at(p);
      for (int c = 0; c < C; ++c) low[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(work_pixels);
    for (int c = 0; c < C; ++c) pooled[c] = pooled[c] * inv + low[c] * inv;
  } else {
    const double inv = 1.0 / static_cast<double>(work_pixels);
    for (int c = 0; c < C; ++c) pooled[c] *= inv;
  }

  std::vector<double> weights = predict_weights(model.head, pooled);
  Lattice3D fused = fuse_luts(model.basis, weights);

  // raw (pre-clamp) lattice outputs, needed for the clamp subgradient
  const std::size_t full_pixels = full.pixel_count();
  std::vector<double> raw(full_pixels * 3);
  {
    const double* values = fused.values.data();
    for (std::size_t p = 0; p < full_pixels; ++p) {
      const std::uint8_t* px = full.data.data() + p * 3;
      Cell cell = cell_of(fused.bins, px[0], px[1], px[2]);
      double w[8];
      std::size_t off[8];
      corner_weights(cell, w);
      corner_offsets(cell, fused.bins, off);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int v = 0; v < 8; ++v) acc += w[v] * values[off[v] + c];
        raw[p * 3 + c] = acc;
      }
    }
  }

  // Loss and residuals stay in double precision; rounding predictions to
  // float here would quantize the loss surface and poison finite-difference
  // comparisons against these gradients.
  const std::size_t samples = raw.size();
  std::vector<double> residual(samples);
  double loss_acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double pred = raw[i];
    if (pred < 0.0) pred = 0.0;
    if (pred > 1.0) pred = 1.0;
    const double diff = pred - static_cast<double>(target.data[i]) / 255.0;
    residual[i] = diff;
    loss_acc += std::fabs(diff);
  }
  result.loss = loss_acc / static_cast<double>(samples);

  // ---- backward ----
  const double inv_samples = 1.0 / static_cast<double>(samples);

  // d loss / d fused lattice
  std::vector<double> d_fused(fused.values.size(), 0.0);
  for (std::size_t p = 0; p < full_pixels; ++p) {
    const std::uint8_t* px = full.data.data() + p * 3;
    Cell cell = cell_of(fused.bins, px[0], px[1], px[2]);
    double w[8];
    std::size_t off[8];
    corner_weights(cell, w);
    corner_offsets(cell, fused.bins, off);
    for (int c = 0; c < 3; ++c) {
      const double r = raw[p * 3 + c];
      if (r < 0.0 || r > 1.0) continue;  // clamped: zero subgradient
      const double diff = residual[p * 3 + c];
      if (diff == 0.0) continue;  // L1 subgradient 0 at 0
      const double g = (diff > 0.0 ? inv_samples : -inv_samples);
      for (int v = 0; v < 8; ++v) {
        d_fused[off[v] + c] += w[v] * g;
      }
    }
  }

  // fused = sum_n w_n basis_n
  std::vector<double> d_weights(weights.size(), 0.0);
  for (std::size_t n = 0; n < model.basis.size(); ++n) {
    const double* basis_values = model.basis[n].values.data();
    double* d_basis = result.grads.basis[n].data();
    const double wn = weights[n];
    double acc = 0.0;
    for (std::size_t i = 0; i < d_fused.size(); ++i) {
      acc += basis_values[i] * d_fused[i];
      d_basis[i] = wn * d_fused[i];
    }
    d_weights[n] = acc;
  }

  // head: w = sum_k (W_k u_k + b_k)
  const int K = model.head.groups;
  const int L = model.head.group_length;
  const int N = model.head.outputs;
  std::vector<double> d_pooled(pooled.size(), 0.0);
  for (int k = 0; k < K; ++k) {
    const DenseLayer& fc = model.head.group_fc[k];
    DenseLayer& d_fc = result.grads.head[k];
    const double* u = pooled.data() + static_cast<std::size_t>(k) * L;
    double* du = d_pooled.data() + static_cast<std::size_t>(k) * L;
    for (int n = 0; n < N; ++n) {
      const double gn = d_weights[n];
      d_fc.b[n] += gn;
      const double* row = fc.w.data() + static_cast<std::size_t>(n) * L;
      double* d_row = d_fc.w.data() + static_cast<std::size_t>(n) * L;
      for (int l = 0; l < L; ++l) {
        d_row[l] += gn * u[l];
        du[l] += gn * row[l];
      }
    }
  }

  // branches: pooled = mean(msb feats) + mean(lsb feats)
  std::vector<double> upstream(d_pooled.size());
  const double inv_pixels = 1.0 / static_cast<double>(work_pixels);
  for (std::size_t c = 0; c < d_pooled.size(); ++c) {
    upstream[c] = d_pooled[c] * inv_pixels;
  }
  branch_backward_plane(model.msb_branch, msb_in, msb_stash, upstream,
                        result.grads.msb);
  if (parallel) {
    branch_backward_plane(model.lsb_branch, lsb_in, lsb_stash, upstream,
                          result.grads.lsb);
  }
  return result;
}

void accumulate_gradients(ModelGradients& dst, const ModelGradients& src) {
  auto add_layers = [](std::vector<DenseLayer>& a,
                       const std::vector<DenseLayer>& b) {
    for (std::size_t l = 0; l < a.size(); ++l) {
      for (std::size_t i = 0; i < a[l].w.size(); ++i) a[l].w[i] += b[l].w[i];
      for (std::size_t i = 0; i < a[l].b.size(); ++i) a[l].b[i] += b[l].b[i];
    }
  };
  add_layers(dst.msb.layers, src.msb.layers);
  add_layers(dst.lsb.layers, src.lsb.layers);
  add_layers(dst.head, src.head);
  for (std::size_t n = 0; n < dst.basis.size(); ++n) {
    for (std::size_t i = 0; i < dst.basis[n].size(); ++i) {
      dst.basis[n][i] += src.basis[n][i];
    }
  }
}

void scale_gradients(ModelGradients& grads, double factor) {
  auto scale_layers = [factor](std::vector<DenseLayer>& layers) {
    for (DenseLayer& layer : layers) {
      for (double& v : layer.w) v *= factor;
      for (double& v : layer.b) v *= factor;
    }
  };
  scale_layers(grads.msb.layers);
  scale_layers(grads.lsb.layers);
  scale_layers(grads.head);
  for (auto& values : grads.basis) {
    for (double& v : values) v *= factor;
  }
}

}  // namespace icelut::model
