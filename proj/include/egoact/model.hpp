#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egoact/nn.hpp"

namespace egoact {

// ---------------------------------------------------------------- encoder

struct ConvBlockSpec {
  int out_channels = 8;
  int kernel = 3;
  int stride = 1;
  int pool = 2;  // maxpool kernel == stride; 1 disables pooling
};

struct EncoderConfig {
  int input_channels = 3;
  int input_size = 56;  // square input
  std::vector<ConvBlockSpec> blocks = {{8, 3, 1, 2}, {16, 3, 1, 2}, {32, 3, 1, 2}};
  int feature_dim = 64;  // D

  void validate() const;
  /// Spatial side length of block `i`'s conv output (pad = kernel/2).
  int conv_size(int i) const;
  /// Spatial side length after block `i`'s pool.
  int block_output_size(int i) const;
  /// Flattened length feeding the final FC.
  int flatten_length() const;
};

/// Per-frame CNN; one parameter set regardless of how many splice positions
/// it serves (weights tied). Gradient twins live next to each tensor.
template <typename T>
struct Encoder {
  EncoderConfig cfg;
  struct Block {
    Tensor<T> w, b, dw, db;
  };
  std::vector<Block> blocks;
  Tensor<T> fc_w, fc_b, dfc_w, dfc_b;

  void allocate(const EncoderConfig& config);
  void init_params(std::uint64_t seed);
  void zero_grads();
  void for_each_parameter(
      const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn);
};

template <typename T>
struct EncoderCache {
  std::vector<Tensor<T>> conv_in;
  std::vector<Tensor<T>> conv_out;  // pre-relu
  std::vector<Tensor<T>> relu_out;  // post-relu, pre-pool
  std::vector<MaxPoolResult<T>> pool;
  Tensor<T> flat, fc_out, feature;
};

template <typename T>
Tensor<T> encoder_forward(const Encoder<T>& enc, const Tensor<T>& frame,
                          EncoderCache<T>* cache = nullptr);

/// Accumulates parameter grads; optionally captures the gradient at the last
/// block's post-relu activation (the Grad-CAM hook) and the input gradient.
template <typename T>
void encoder_backward(Encoder<T>& enc, const EncoderCache<T>& cache, const Tensor<T>& dfeature,
                      Tensor<T>* d_last_relu = nullptr, Tensor<T>* dframe = nullptr);

// ------------------------------------------------------- splice classifier

/// One stream: tied per-frame encoder -> one LSTM layer -> per-step L-way
/// head -> learned step-weighted average of the per-step posteriors.
template <typename T>
struct SpliceClassifier {
  EncoderConfig encoder_cfg;
  int window = 11;       // W
  int num_classes = 6;   // L
  int hidden_dim = 64;   // Hc

  Encoder<T> encoder;
  LstmParams<T> lstm, lstm_grad;
  Tensor<T> head_w, head_b, dhead_w, dhead_b;      // (L, Hc), (L)
  Tensor<T> step_weights, dstep_weights;           // (W), pre-softmax

  void allocate();
  void init_params(std::uint64_t seed);
  void zero_grads();
  void for_each_parameter(
      const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn);

  template <typename U>
  SpliceClassifier<U> cast() const;
};

template <typename T>
struct StreamOutput {
  Tensor<T> per_step_logits;  // (W, L)
  Tensor<T> per_step_probs;   // (W, L)
  Tensor<T> step_weight_probs;  // (W), softmax of step_weights
  Tensor<T> fused;            // (L)
};

template <typename T>
struct SpliceCache {
  std::vector<EncoderCache<T>> enc;  // empty when inputs are features
  std::vector<Tensor<T>> features;   // (D) per step
  std::vector<LstmCache<T>> lstm;
  std::vector<Tensor<T>> hidden;     // h_t per step
  StreamOutput<T> out;
};

/// inputs: W frames (C,H,W) when inputs_are_features is false, otherwise W
/// feature vectors (D). h_0 = c_0 = 0.
template <typename T>
StreamOutput<T> forward_splice(const SpliceClassifier<T>& model,
                               const std::vector<Tensor<T>>& inputs, bool inputs_are_features,
                               SpliceCache<T>* cache = nullptr);

/// Fused splice loss: -log(sum_t w_t p_t[label]). Accumulates parameter
/// grads (encoder grads only when inputs are frames). Returns the loss and
/// leaves the forward outputs in `cache`.
template <typename T>
T splice_loss_and_grads(SpliceClassifier<T>& model, const std::vector<Tensor<T>>& inputs,
                        bool inputs_are_features, int label, SpliceCache<T>& cache);

// ----------------------------------------------------------------- fusion

/// Weighted average of the W per-step distributions. Throws when weights
/// are negative or do not sum to 1 within 1e-6.
template <typename T>
Tensor<T> fuse_steps(const Tensor<T>& per_step_probs, const Tensor<T>& weights);

enum class FusionMode { kMean, kWeighted };

/// Late fusion of stream posteriors; lambda weights the rgb stream in
/// weighted mode (mean ignores it).
template <typename T>
Tensor<T> fuse_streams(const Tensor<T>& rgb, const Tensor<T>& flow, FusionMode mode,
                       T lambda = T(0.5));

// --------------------------------------------- stage-A frame classifier

/// Encoder plus a per-frame softmax head, for the encoder fine-tuning stage.
template <typename T>
struct FrameClassifier {
  EncoderConfig encoder_cfg;
  int num_classes = 6;

  Encoder<T> encoder;
  Tensor<T> head_w, head_b, dhead_w, dhead_b;  // (L, D), (L)

  void allocate();
  void init_params(std::uint64_t seed);
  void zero_grads();
  void for_each_parameter(
      const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn);

  Tensor<T> forward(const Tensor<T>& frame) const;
  /// Softmax cross-entropy on one frame; accumulates grads, returns loss.
  T loss_and_grads(const Tensor<T>& frame, int label);
};

// ----------------------------------------------------------------- utils

/// L2 norm over every accumulated gradient in the model.
template <typename Model>
double grad_norm(Model& model);

/// Scales all gradients by `factor`.
template <typename Model>
void scale_grads(Model& model, double factor);

}  // namespace egoact

#include "egoact/model_impl.hpp"
