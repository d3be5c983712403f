#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "egoact/tensor.hpp"

namespace egoact {

/// Optimizer schedule. Desk-scale presets keep the full-scale schedule shape
/// with iteration counts divided by 100 and batch size 16.
struct TrainingConfig {
  double base_lr = 0.001;
  double momentum = 0.9;
  double lr_decay_factor = 0.1;
  int lr_step = 100;
  int max_iterations = 500;
  double weight_decay = 0.005;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables

  void validate() const {
    if (base_lr <= 0 || momentum < 0 || weight_decay < 0) {
      throw std::invalid_argument("training config: negative rate");
    }
    if (lr_decay_factor <= 0 || lr_decay_factor > 1) {
      throw std::invalid_argument("training config: lr_decay_factor must be in (0,1]");
    }
    if (lr_step < 1 || max_iterations < 1 || batch_size < 1) {
      throw std::invalid_argument("training config: counts must be positive");
    }
    if (clip_norm < 0) throw std::invalid_argument("training config: negative clip_norm");
  }
};

/// Piecewise-constant step decay: base_lr * factor^floor(iter / step).
inline double lr_at(const TrainingConfig& cfg, int iteration) {
  return cfg.base_lr * std::pow(cfg.lr_decay_factor, iteration / cfg.lr_step);
}

template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> velocity;  // model parameter order
  int iteration = 0;
};

/// (Re)allocates velocity buffers to match the model's parameters. Call
/// after any structural change (e.g. a curriculum head split).
template <typename Model, typename T>
void init_optimizer(Model& model, OptimizerState<T>& state) {
  state.velocity.clear();
  model.for_each_parameter([&](const std::string&, Tensor<T>& v, Tensor<T>&) {
    state.velocity.emplace_back(v.shape);
  });
}

/// One momentum-SGD update over the accumulated gradients:
///   v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v
/// `trainable` filters parameters by name (empty = all). Clips by global
/// norm over the trainable set when cfg.clip_norm > 0. Throws on non-finite
/// gradients, naming the parameter.
template <typename Model, typename T>
void sgd_step(Model& model, OptimizerState<T>& state, const TrainingConfig& cfg,
              const std::function<bool(const std::string&)>& trainable = {}) {
  const double lr = lr_at(cfg, state.iteration);

  double clip_scale = 1.0;
  if (cfg.clip_norm > 0) {
    double sq = 0.0;
    model.for_each_parameter([&](const std::string& name, Tensor<T>&, Tensor<T>& g) {
      if (trainable && !trainable(name)) return;
      for (const T& v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
    });
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) clip_scale = cfg.clip_norm / norm;
  }

  std::size_t index = 0;
  model.for_each_parameter([&](const std::string& name, Tensor<T>& w, Tensor<T>& g) {
    Tensor<T>& vel = state.velocity.at(index++);
    if (vel.shape != w.shape) {
      throw std::runtime_error("optimizer state for " + name +
                               " has stale shape; call init_optimizer");
    }
    if (trainable && !trainable(name)) return;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      const double grad = static_cast<double>(g.data[i]) * clip_scale;
      if (!std::isfinite(grad)) {
        throw std::runtime_error("non-finite gradient in parameter " + name + " at element " +
                                 std::to_string(i));
      }
      const double v = cfg.momentum * static_cast<double>(vel.data[i]) -
                       lr * (grad + cfg.weight_decay * static_cast<double>(w.data[i]));
      vel.data[i] = static_cast<T>(v);
      w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) + v);
    }
  });
  ++state.iteration;
}

}  // namespace egoact
