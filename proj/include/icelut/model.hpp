#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icelut/image.hpp"
#include "icelut/rng.hpp"

namespace icelut::model {

// How the backbone consumes the working image.
enum class BranchMode {
  kParallelNibbles,  // two branches: high and low 4-bit planes
  kSingleByte,       // one branch over full 8-bit values (ablation)
};

// Whether fused lattices may mix color channels.
enum class LatticeCoupling {
  kFull,        // every output channel sees all three inputs
  kPerChannel,  // restricted: output channel c depends on axis c only
};

struct ModelConfig {
  int channels = 10;      // C: pooled feature width, equals groups*group_length
  int groups = 5;         // K: split head group count
  int group_length = 2;   // L: features consumed per group
  int basis_count = 20;   // N: number of basis lattices
  int lattice_bins = 17;  // M: lattice vertices per axis
  std::vector<int> layer_widths = {32, 64, 128, 64, 32};  // hidden widths
  int train_resolution = 32;  // working-image side used during training
  int first_layer_kernel = 1;  // 1 (pointwise) or 3 (spatial ablation)
  BranchMode branch_mode = BranchMode::kParallelNibbles;
  LatticeCoupling coupling = LatticeCoupling::kFull;

  void validate() const;
};

// One fully-connected layer, weights row-major out x in.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;

  static DenseLayer zeros(int in, int out);
};

// A stack of per-pixel dense layers with ReLU between them (none after the
// last). With kernel == 3 the first layer sees a zero-padded 3x3
// neighborhood; everything downstream stays per-pixel.
struct PointwiseBranch {
  int kernel = 1;
  std::vector<DenseLayer> layers;

  int input_width() const { return 3 * kernel * kernel; }
  int output_width() const { return layers.empty() ? 0 : layers.back().out; }
};

// K independent tiny FC heads; group k consumes U[k*L, (k+1)*L) and all
// group outputs are summed into one N-vector.
struct SplitFC {
  int groups = 0;
  int group_length = 0;
  int outputs = 0;
  std::vector<DenseLayer> group_fc;  // each outputs x group_length
};

// M^3 RGB vertices; vertex (i,j,k) sits at (i,j,k)/(M-1) in the color cube.
struct Lattice3D {
  int bins = 0;
  std::vector<double> values;  // ((i*M + j)*M + k)*3 + c

  static Lattice3D identity(int bins);
  static Lattice3D zeros(int bins);

  double& at(int i, int j, int k, int c) {
    return values[((static_cast<std::size_t>(i) * bins + j) * bins + k) * 3 + c];
  }
  double at(int i, int j, int k, int c) const {
    return values[((static_cast<std::size_t>(i) * bins + j) * bins + k) * 3 + c];
  }
};

struct TrainableModel {
  ModelConfig config;
  PointwiseBranch msb_branch;
  PointwiseBranch lsb_branch;  // unused in kSingleByte mode
  SplitFC head;
  std::vector<Lattice3D> basis;
};

// Identity-initialized model: random branches, zero head weights with
// biases summing to e_0, basis_0 = identity lattice, the rest zero. Its
// output equals its input until training moves it.
TrainableModel make_model(const ModelConfig& config, std::uint64_t seed);

// --- instrumentation -------------------------------------------------------
// Counts network evaluations (per-pixel branch activations and head
// applications). The table-driven inference path must leave it untouched.
std::uint64_t network_eval_count();
void reset_network_eval_count();

// --- forward pieces --------------------------------------------------------

// Features of one pixel from its nibble triple (values 0..15, normalized
// by /15 internally). Branch must be pointwise (kernel == 1).
std::vector<double> branch_pixel_features(const PointwiseBranch& branch,
                                          const std::array<int, 3>& nibble);

// Same, for an already-normalized input triple.
std::vector<double> branch_features_normalized(const PointwiseBranch& branch,
                                               const double in[3]);

// Mean branch features over the working image, branch sums added together
// (both bit planes in parallel mode, the single branch otherwise).
std::vector<double> pooled_features(const TrainableModel& model,
                                    const imaging::ImageU8& working);

// w = sum_k (W_k U_k + b_k); |U| must equal groups*group_length.
std::vector<double> predict_weights(const SplitFC& head,
                                    std::span<const double> pooled);

// Weighted sum of basis lattices.
Lattice3D fuse_luts(std::span<const Lattice3D> basis,
                    std::span<const double> weights);

// Trilinear interpolation of the lattice over every pixel of img.
// Output clamped to [0,1] per the ImageF32 contract.
imaging::ImageF32 trilinear_apply(const Lattice3D& lattice,
                                  const imaging::ImageU8& img);

struct ForwardResult {
  imaging::ImageF32 output;
  std::vector<double> weights;
  std::vector<double> pooled;
};

// working is the caller-supplied downsample of full.
ForwardResult forward(const TrainableModel& model,
                      const imaging::ImageU8& full,
                      const imaging::ImageU8& working);

// Mean absolute difference over all samples.
double l1_loss(const imaging::ImageF32& prediction,
               const imaging::ImageF32& target);

// --- training --------------------------------------------------------------

struct BranchGradients {
  std::vector<DenseLayer> layers;  // same shapes as the branch, grad values
};

struct ModelGradients {
  BranchGradients msb;
  BranchGradients lsb;
  std::vector<DenseLayer> head;
  std::vector<std::vector<double>> basis;
};

ModelGradients zero_gradients(const TrainableModel& model);

struct LossAndGradients {
  double loss = 0.0;
  ModelGradients grads;
};

// L1 loss and its full backward pass (subgradient 0 at kinks).
LossAndGradients compute_gradients(const TrainableModel& model,
                                   const imaging::ImageU8& full,
                                   const imaging::ImageU8& working,
                                   const imaging::ImageU8& target);

// Adds src into dst elementwise (batch accumulation).
void accumulate_gradients(ModelGradients& dst, const ModelGradients& src);
void scale_gradients(ModelGradients& grads, double factor);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

struct TrainConfig {
  int epochs = 400;
  double learning_rate = 1e-4;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long max_steps = 0;  // 0 = run all epochs

  void validate() const;
};

AdamState make_adam_state(const TrainableModel& model);

// One bias-corrected Adam update over every parameter tensor.
void adam_step(TrainableModel& model, const ModelGradients& grads,
               AdamState& state, const TrainConfig& config);

struct ImagePair {
  imaging::ImageU8 input;
  imaging::ImageU8 target;
};

struct TrainResult {
  TrainableModel model;
  std::vector<double> loss_history;  // one entry per optimizer step
};

TrainResult train(const std::vector<ImagePair>& dataset,
                  const ModelConfig& model_config,
                  const TrainConfig& train_config);

// Restrict every basis lattice so output channel c varies only along its
// own axis (used when coupling == kPerChannel).
void project_lattices_per_channel(TrainableModel& model);

// --- checkpoints -----------------------------------------------------------

void save_checkpoint(const TrainableModel& model, const std::string& path);
TrainableModel load_checkpoint(const std::string& path);

}  // namespace icelut::model
