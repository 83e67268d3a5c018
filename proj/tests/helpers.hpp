#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "icelut/error.hpp"
#include "icelut/image.hpp"
#include "icelut/model.hpp"
#include "icelut/rng.hpp"

namespace testing {

// Self-deleting scratch directory for file-format and CLI tests.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto candidate = base / ("icelut_test_" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline icelut::imaging::ImageU8 random_image(std::uint64_t seed, int w,
                                             int h) {
  icelut::Rng rng(seed);
  auto img = icelut::imaging::ImageU8::create(w, h);
  for (auto& v : img.data) v = rng.byte();
  return img;
}

// Runs fn, which must throw icelut::Error, and returns its code.
template <typename Fn>
icelut::ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const icelut::Error& e) {
    return e.code();
  }
  FAIL("expected an icelut::Error");
  return icelut::ErrorCode::IoFailure;  // unreachable
}

// A random model whose baked tables are guaranteed within one byte of the
// network path: head magnitudes are kept small enough that the summed
// per-group quantization error (groups * scale / 2) stays below half a
// byte step. Group biases stagger so baked weights differ across groups.
inline icelut::model::TrainableModel random_bakeable_model(
    std::uint64_t seed) {
  using namespace icelut;
  model::ModelConfig config;
  config.layer_widths = {8, 12, 8};
  auto m = model::make_model(config, seed);
  Rng rng(seed * 977 + 13);
  const double base[] = {0.024, 0.032, 0.040, 0.048, 0.056};
  for (int k = 0; k < config.groups; ++k) {
    auto& fc = m.head.group_fc[k];
    for (auto& w : fc.w) w = rng.uniform(-0.002, 0.002);
    fc.b[0] = base[k % 5] + rng.uniform(-0.01, 0.01);
    for (std::size_t n = 1; n < fc.b.size(); ++n)
      fc.b[n] = rng.uniform(-0.003, 0.003);
  }
  for (std::size_t n = 0; n < m.basis.size(); ++n) {
    auto identity = model::Lattice3D::identity(config.lattice_bins);
    for (std::size_t i = 0; i < m.basis[n].values.size(); ++i) {
      const double anchor = (n == 0) ? identity.values[i] : 0.0;
      m.basis[n].values[i] = anchor + rng.uniform(-0.01, 0.01);
    }
  }
  return m;
}

// Small configuration used by the gradient checks: C=4 (K=2, L=2), N=3,
// M=3, two hidden layers, 8x8 full images against a 4x4 working image.
inline icelut::model::ModelConfig tiny_config() {
  icelut::model::ModelConfig config;
  config.channels = 4;
  config.groups = 2;
  config.group_length = 2;
  config.basis_count = 3;
  config.lattice_bins = 3;
  config.layer_widths = {5, 6};
  config.train_resolution = 4;
  return config;
}

// Perturbs every parameter tensor away from the identity initialization so
// that gradient checks run at a generic point. Branch biases in particular
// must move off zero: a fresh model parks fully-dead pixels exactly on the
// ReLU kink, where central differences straddle the subgradient.
inline void randomize_head_and_basis(icelut::model::TrainableModel& m,
                                     std::uint64_t seed) {
  icelut::Rng rng(seed);
  // Bias nudges keep |delta| >= 0.05: an input that kills a whole layer makes
  // the next preactivation equal its bias, so a bias that lands within the
  // finite-difference step of zero would straddle the ReLU kink in every
  // scene.
  auto bias_nudge = [&]() {
    const double mag = rng.uniform(0.05, 0.15);
    return rng.uniform() < 0.5 ? -mag : mag;
  };
  auto nudge_branch = [&](icelut::model::PointwiseBranch& branch) {
    for (auto& layer : branch.layers) {
      for (auto& w : layer.w) w += rng.uniform(-0.1, 0.1);
      for (auto& b : layer.b) b += bias_nudge();
    }
  };
  nudge_branch(m.msb_branch);
  if (m.config.branch_mode == icelut::model::BranchMode::kParallelNibbles)
    nudge_branch(m.lsb_branch);
  for (auto& fc : m.head.group_fc) {
    for (auto& w : fc.w) w = rng.uniform(-0.3, 0.3);
    for (auto& b : fc.b) b += bias_nudge();
  }
  for (auto& lattice : m.basis)
    for (auto& v : lattice.values) v += rng.uniform(-0.05, 0.05);
}

// Pointers to every trainable scalar, in a stable order.
inline std::vector<double*> all_parameters(icelut::model::TrainableModel& m) {
  std::vector<double*> out;
  auto add_branch = [&](icelut::model::PointwiseBranch& branch) {
    for (auto& layer : branch.layers) {
      for (auto& w : layer.w) out.push_back(&w);
      for (auto& b : layer.b) out.push_back(&b);
    }
  };
  add_branch(m.msb_branch);
  if (m.config.branch_mode == icelut::model::BranchMode::kParallelNibbles)
    add_branch(m.lsb_branch);
  for (auto& fc : m.head.group_fc) {
    for (auto& w : fc.w) out.push_back(&w);
    for (auto& b : fc.b) out.push_back(&b);
  }
  for (auto& lattice : m.basis)
    for (auto& v : lattice.values) out.push_back(&v);
  return out;
}

// Analytic gradients in the same order as all_parameters().
inline std::vector<double> flatten_gradients(
    const icelut::model::TrainableModel& m,
    const icelut::model::ModelGradients& g) {
  std::vector<double> out;
  auto add_layers = [&](const std::vector<icelut::model::DenseLayer>& layers) {
    for (const auto& layer : layers) {
      out.insert(out.end(), layer.w.begin(), layer.w.end());
      out.insert(out.end(), layer.b.begin(), layer.b.end());
    }
  };
  add_layers(g.msb.layers);
  if (m.config.branch_mode == icelut::model::BranchMode::kParallelNibbles)
    add_layers(g.lsb.layers);
  add_layers(g.head);
  for (const auto& lattice : g.basis)
    out.insert(out.end(), lattice.begin(), lattice.end());
  return out;
}

struct FdScene {
  icelut::imaging::ImageU8 full;
  icelut::imaging::ImageU8 working;
  icelut::imaging::ImageU8 target;
};

// Scene for finite-difference checks, built to keep the loss locally
// smooth around the model: input bytes stay in [60, 195] so predictions of
// a near-identity model sit far from the [0,1] clamp, and the target is
// built opposite each prediction (dark where the model is bright and vice
// versa) so every residual is ~0.5 away from the L1 kink. Central
// differences would otherwise straddle those subgradient discontinuities.
inline FdScene fd_scene(const icelut::model::TrainableModel& m,
                        std::uint64_t seed) {
  using namespace icelut;
  FdScene scene;
  Rng rng(seed);
  scene.full = imaging::ImageU8::create(8, 8);
  for (auto& v : scene.full.data)
    v = static_cast<std::uint8_t>(60 + rng.byte() % 136);
  scene.working = imaging::bilinear_downsample(scene.full, 4, 4);
  const auto result = model::forward(m, scene.full, scene.working);
  scene.target = imaging::ImageU8::create(8, 8);
  for (std::size_t i = 0; i < result.output.data.size(); ++i) {
    scene.target.data[i] = result.output.data[i] > 0.5f ? 0 : 255;
  }
  return scene;
}

struct FdReport {
  double max_rel = 0.0;
  std::size_t worst_index = 0;
  std::size_t parameters = 0;
};

// Central finite differences over every parameter. The 1e-6 denominator
// guard only matters for gradients already at floating-point noise level.
inline FdReport finite_difference_check(icelut::model::TrainableModel& m,
                                        const icelut::imaging::ImageU8& full,
                                        const icelut::imaging::ImageU8& working,
                                        const icelut::imaging::ImageU8& target,
                                        double h = 1e-4) {
  using namespace icelut;
  auto params = all_parameters(m);
  auto analytic =
      flatten_gradients(m, model::compute_gradients(m, full, working, target).grads);
  REQUIRE(params.size() == analytic.size());

  FdReport report;
  report.parameters = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i];
    const double save = *p;
    *p = save + h;
    const double up = model::compute_gradients(m, full, working, target).loss;
    *p = save - h;
    const double down = model::compute_gradients(m, full, working, target).loss;
    *p = save;
    const double fd = (up - down) / (2.0 * h);
    const double denom =
        std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-6});
    const double rel = std::fabs(fd - analytic[i]) / denom;
    if (rel > report.max_rel) {
      report.max_rel = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace testing
