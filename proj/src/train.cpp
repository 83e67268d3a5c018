#include <algorithm>
#include <cmath>
#include <numeric>

#include "icelut/model.hpp"

namespace icelut::model {

namespace {

std::vector<std::vector<double>*> tensor_list(TrainableModel& model) {
  std::vector<std::vector<double>*> tensors;
  for (DenseLayer& layer : model.msb_branch.layers) {
    tensors.push_back(&layer.w);
    tensors.push_back(&layer.b);
  }
  for (DenseLayer& layer : model.lsb_branch.layers) {
    tensors.push_back(&layer.w);
    tensors.push_back(&layer.b);
  }
  for (DenseLayer& fc : model.head.group_fc) {
    tensors.push_back(&fc.w);
    tensors.push_back(&fc.b);
  }
  for (Lattice3D& lattice : model.basis) {
    tensors.push_back(&lattice.values);
  }
  return tensors;
}

std::vector<const std::vector<double>*> tensor_list(const ModelGradients& grads) {
  std::vector<const std::vector<double>*> tensors;
  for (const DenseLayer& layer : grads.msb.layers) {
    tensors.push_back(&layer.w);
    tensors.push_back(&layer.b);
  }
  for (const DenseLayer& layer : grads.lsb.layers) {
    tensors.push_back(&layer.w);
    tensors.push_back(&layer.b);
  }
  for (const DenseLayer& fc : grads.head) {
    tensors.push_back(&fc.w);
    tensors.push_back(&fc.b);
  }
  for (const auto& values : grads.basis) {
    tensors.push_back(&values);
  }
  return tensors;
}

}  // namespace

AdamState make_adam_state(const TrainableModel& model) {
  AdamState state;
  TrainableModel& mutable_model = const_cast<TrainableModel&>(model);
  for (const std::vector<double>* t : tensor_list(mutable_model)) {
    state.m.emplace_back(t->size(), 0.0);
    state.v.emplace_back(t->size(), 0.0);
  }
  return state;
}

void adam_step(TrainableModel& model, const ModelGradients& grads,
               AdamState& state, const TrainConfig& config) {
  auto params = tensor_list(model);
  auto grad_tensors = tensor_list(grads);
  if (params.size() != grad_tensors.size() || params.size() != state.m.size()) {
    raise(ErrorCode::DimensionMismatch,
          "optimizer state does not match the model");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (std::size_t t = 0; t < params.size(); ++t) {
    std::vector<double>& p = *params[t];
    const std::vector<double>& g = *grad_tensors[t];
    if (p.size() != g.size()) {
      raise(ErrorCode::DimensionMismatch, "gradient tensor shape mismatch");
    }
    std::vector<double>& m = state.m[t];
    std::vector<double>& v = state.v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

TrainResult train(const std::vector<ImagePair>& dataset,
                  const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (dataset.empty()) {
    raise(ErrorCode::EmptyDataset, "training requires at least one pair");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].input.same_size(dataset[i].target)) {
      raise(ErrorCode::DimensionMismatch,
            "pair " + std::to_string(i) + " input/target sizes differ");
    }
  }

  TrainResult result;
  result.model = make_model(model_config, train_config.seed);

  // working images are fixed per sample; compute them once
  std::vector<imaging::ImageU8> workings;
  workings.reserve(dataset.size());
  for (const ImagePair& pair : dataset) {
    workings.push_back(imaging::bilinear_downsample(
        pair.input, model_config.train_resolution,
        model_config.train_resolution));
  }

  AdamState state = make_adam_state(result.model);
  Rng shuffle_rng = Rng(train_config.seed).fork(100);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  long steps_done = 0;
  const bool per_channel =
      model_config.coupling == LatticeCoupling::kPerChannel;

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    // deterministic Fisher-Yates
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = shuffle_rng.uniform_u32(static_cast<std::uint32_t>(i));
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t end =
          std::min(order.size(),
                   at + static_cast<std::size_t>(train_config.batch_size));

      double batch_loss = 0.0;
      ModelGradients batch_grads;
      bool first = true;
      for (std::size_t s = at; s < end; ++s) {
        const ImagePair& pair = dataset[order[s]];
        LossAndGradients lg = compute_gradients(
            result.model, pair.input, workings[order[s]], pair.target);
        batch_loss += lg.loss;
        if (first) {
          batch_grads = std::move(lg.grads);
          first = false;
        } else {
          accumulate_gradients(batch_grads, lg.grads);
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(end - at);
      if (end - at > 1) scale_gradients(batch_grads, inv_batch);

      adam_step(result.model, batch_grads, state, train_config);
      if (per_channel) project_lattices_per_channel(result.model);

      result.loss_history.push_back(batch_loss * inv_batch);
      ++steps_done;
      if (train_config.max_steps > 0 && steps_done >= train_config.max_steps) {
        return result;
      }
    }
  }
  return result;
}

}  // namespace icelut::model
