#pragma once

// Template definitions for model.hpp; include that header instead.

#include <cmath>

namespace egoact {

// ---------------------------------------------------------------- encoder

template <typename T>
void Encoder<T>::allocate(const EncoderConfig& config) {
  config.validate();
  cfg = config;
  blocks.clear();
  int cin = cfg.input_channels;
  for (const ConvBlockSpec& spec : cfg.blocks) {
    Block b;
    b.w = Tensor<T>({spec.out_channels, cin, spec.kernel, spec.kernel});
    b.b = Tensor<T>({spec.out_channels});
    b.dw = b.w;
    b.db = b.b;
    blocks.push_back(std::move(b));
    cin = spec.out_channels;
  }
  fc_w = Tensor<T>({cfg.feature_dim, cfg.flatten_length()});
  fc_b = Tensor<T>({cfg.feature_dim});
  dfc_w = fc_w;
  dfc_b = fc_b;
}

template <typename T>
void Encoder<T>::init_params(std::uint64_t seed) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& spec = cfg.blocks[i];
    const int fan_in = (i == 0 ? cfg.input_channels : cfg.blocks[i - 1].out_channels) *
                       spec.kernel * spec.kernel;
    Rng rng(derive_seed(seed, "init/encoder.block.w", i));
    kaiming_uniform(blocks[i].w, fan_in, rng);
    blocks[i].b.zero();
  }
  Rng rng(derive_seed(seed, "init/encoder.fc.w"));
  kaiming_uniform(fc_w, cfg.flatten_length(), rng);
  fc_b.zero();
}

template <typename T>
void Encoder<T>::zero_grads() {
  for (Block& b : blocks) {
    b.dw.zero();
    b.db.zero();
  }
  dfc_w.zero();
  dfc_b.zero();
}

template <typename T>
void Encoder<T>::for_each_parameter(
    const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string stem = "encoder.block" + std::to_string(i);
    fn(stem + ".w", blocks[i].w, blocks[i].dw);
    fn(stem + ".b", blocks[i].b, blocks[i].db);
  }
  fn("encoder.fc.w", fc_w, dfc_w);
  fn("encoder.fc.b", fc_b, dfc_b);
}

template <typename T>
Tensor<T> encoder_forward(const Encoder<T>& enc, const Tensor<T>& frame,
                          EncoderCache<T>* cache) {
  check_shape(frame, {enc.cfg.input_channels, enc.cfg.input_size, enc.cfg.input_size},
              "encoder input");
  EncoderCache<T> local;
  EncoderCache<T>& c = cache ? *cache : local;
  c.conv_in.clear();
  c.conv_out.clear();
  c.relu_out.clear();
  c.pool.clear();

  Tensor<T> x = frame;
  for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
    const ConvBlockSpec& spec = enc.cfg.blocks[i];
    c.conv_in.push_back(x);
    Tensor<T> z =
        conv2d_forward(x, enc.blocks[i].w, enc.blocks[i].b, spec.stride, spec.kernel / 2);
    c.conv_out.push_back(z);
    Tensor<T> a = relu_forward(z);
    c.relu_out.push_back(a);
    MaxPoolResult<T> p = maxpool2d_forward(a, spec.pool, spec.pool);
    x = p.y;
    c.pool.push_back(std::move(p));
  }

  c.flat = Tensor<T>({static_cast<int>(x.numel())}, x.data);
  c.fc_out = fc_forward(c.flat, enc.fc_w, enc.fc_b);
  c.feature = relu_forward(c.fc_out);
  return c.feature;
}

template <typename T>
void encoder_backward(Encoder<T>& enc, const EncoderCache<T>& cache, const Tensor<T>& dfeature,
                      Tensor<T>* d_last_relu, Tensor<T>* dframe) {
  Tensor<T> d_fc_out, d_flat;
  relu_backward(cache.fc_out, dfeature, d_fc_out);
  fc_backward(cache.flat, enc.fc_w, d_fc_out, d_flat, enc.dfc_w, enc.dfc_b);

  const int n = static_cast<int>(enc.blocks.size());
  Tensor<T> dx;
  dx.shape = cache.pool[n - 1].y.shape;
  dx.data = d_flat.data;

  for (int i = n - 1; i >= 0; --i) {
    Tensor<T> d_relu;
    maxpool2d_backward(cache.relu_out[i].shape, cache.pool[i].argmax, dx, d_relu);
    if (i == n - 1 && d_last_relu) *d_last_relu = d_relu;
    Tensor<T> d_conv;
    relu_backward(cache.conv_out[i], d_relu, d_conv);
    Tensor<T> d_in;
    conv2d_backward(cache.conv_in[i], enc.blocks[i].w, enc.cfg.blocks[i].stride,
                    enc.cfg.blocks[i].kernel / 2, d_conv, d_in, enc.blocks[i].dw,
                    enc.blocks[i].db);
    dx = std::move(d_in);
  }
  if (dframe) *dframe = std::move(dx);
}

// ------------------------------------------------------- splice classifier

template <typename T>
void SpliceClassifier<T>::allocate() {
  if (window < 1) throw std::invalid_argument("splice window must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
  encoder.allocate(encoder_cfg);
  lstm = LstmParams<T>(encoder_cfg.feature_dim, hidden_dim);
  lstm_grad = lstm;
  head_w = Tensor<T>({num_classes, hidden_dim});
  head_b = Tensor<T>({num_classes});
  dhead_w = head_w;
  dhead_b = head_b;
  step_weights = Tensor<T>({window});
  dstep_weights = step_weights;
}

template <typename T>
void SpliceClassifier<T>::init_params(std::uint64_t seed) {
  encoder.init_params(seed);
  const int d = encoder_cfg.feature_dim;
  {
    Rng rng(derive_seed(seed, "init/lstm.w"));
    kaiming_uniform(lstm.w_i, d, rng);
    kaiming_uniform(lstm.w_f, d, rng);
    kaiming_uniform(lstm.w_o, d, rng);
    kaiming_uniform(lstm.w_g, d, rng);
  }
  const std::pair<Tensor<T>*, const char*> recurrent[] = {
      {&lstm.u_i, "i"}, {&lstm.u_f, "f"}, {&lstm.u_o, "o"}, {&lstm.u_g, "g"}};
  for (const auto& [t, tag] : recurrent) {
    Rng rng(derive_seed(seed, std::string("init/lstm.u_") + tag));
    orthogonal_init(*t, rng);
  }
  lstm.b_i.zero();
  lstm.b_f.fill(T(1));  // forget-gate bias 1.0
  lstm.b_o.zero();
  lstm.b_g.zero();
  {
    Rng rng(derive_seed(seed, "init/head.w"));
    kaiming_uniform(head_w, hidden_dim, rng);
    head_b.zero();
  }
  step_weights.zero();  // uniform weighting after softmax
}

template <typename T>
void SpliceClassifier<T>::zero_grads() {
  for_each_parameter([](const std::string&, Tensor<T>&, Tensor<T>& g) { g.zero(); });
}

template <typename T>
void SpliceClassifier<T>::for_each_parameter(
    const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn) {
  encoder.for_each_parameter(fn);
  fn("lstm.w_i", lstm.w_i, lstm_grad.w_i);
  fn("lstm.w_f", lstm.w_f, lstm_grad.w_f);
  fn("lstm.w_o", lstm.w_o, lstm_grad.w_o);
  fn("lstm.w_g", lstm.w_g, lstm_grad.w_g);
  fn("lstm.u_i", lstm.u_i, lstm_grad.u_i);
  fn("lstm.u_f", lstm.u_f, lstm_grad.u_f);
  fn("lstm.u_o", lstm.u_o, lstm_grad.u_o);
  fn("lstm.u_g", lstm.u_g, lstm_grad.u_g);
  fn("lstm.b_i", lstm.b_i, lstm_grad.b_i);
  fn("lstm.b_f", lstm.b_f, lstm_grad.b_f);
  fn("lstm.b_o", lstm.b_o, lstm_grad.b_o);
  fn("lstm.b_g", lstm.b_g, lstm_grad.b_g);
  fn("head.w", head_w, dhead_w);
  fn("head.b", head_b, dhead_b);
  fn("step_weights", step_weights, dstep_weights);
}

template <typename T>
template <typename U>
SpliceClassifier<U> SpliceClassifier<T>::cast() const {
  SpliceClassifier<U> out;
  out.encoder_cfg = encoder_cfg;
  out.window = window;
  out.num_classes = num_classes;
  out.hidden_dim = hidden_dim;
  out.allocate();
  auto* self = const_cast<SpliceClassifier<T>*>(this);
  std::vector<Tensor<T>*> src;
  self->for_each_parameter(
      [&](const std::string&, Tensor<T>& v, Tensor<T>&) { src.push_back(&v); });
  std::size_t i = 0;
  out.for_each_parameter([&](const std::string&, Tensor<U>& v, Tensor<U>&) {
    v = src[i++]->template cast<U>();
  });
  return out;
}

template <typename T>
Tensor<T> fuse_steps(const Tensor<T>& per_step_probs, const Tensor<T>& weights) {
  if (per_step_probs.shape.size() != 2) {
    throw std::invalid_argument("fuse_steps: per_step_probs must be (W, L)");
  }
  const int w = per_step_probs.shape[0], l = per_step_probs.shape[1];
  check_shape(weights, {w}, "fuse_steps weights");
  T sum = T(0);
  for (const T& v : weights.data) {
    if (v < T(0)) throw std::invalid_argument("fuse_steps: negative weight");
    sum += v;
  }
  if (std::abs(sum - T(1)) > T(1e-6)) {
    throw std::invalid_argument("fuse_steps: weights sum to " + std::to_string(double(sum)) +
                                ", expected 1");
  }
  Tensor<T> fused({l});
  for (int t = 0; t < w; ++t) {
    for (int k = 0; k < l; ++k) fused[k] += weights[t] * per_step_probs.at2(t, k);
  }
  return fused;
}

template <typename T>
Tensor<T> fuse_streams(const Tensor<T>& rgb, const Tensor<T>& flow, FusionMode mode, T lambda) {
  if (rgb.shape != flow.shape) {
    throw std::invalid_argument("fuse_streams: shape mismatch " + shape_to_string(rgb.shape) +
                                " vs " + shape_to_string(flow.shape));
  }
  const T lam = mode == FusionMode::kMean ? T(0.5) : lambda;
  Tensor<T> out = rgb;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data[i] = lam * rgb.data[i] + (T(1) - lam) * flow.data[i];
  }
  return out;
}

template <typename T>
StreamOutput<T> forward_splice(const SpliceClassifier<T>& model,
                               const std::vector<Tensor<T>>& inputs, bool inputs_are_features,
                               SpliceCache<T>* cache) {
  const int w = model.window, l = model.num_classes, hc = model.hidden_dim;
  if (static_cast<int>(inputs.size()) != w) {
    throw std::invalid_argument("forward_splice: got " + std::to_string(inputs.size()) +
                                " inputs, window is " + std::to_string(w));
  }
  SpliceCache<T> local;
  SpliceCache<T>& c = cache ? *cache : local;
  c.enc.assign(inputs_are_features ? 0 : w, EncoderCache<T>{});
  c.features.assign(w, Tensor<T>{});
  c.lstm.assign(w, LstmCache<T>{});
  c.hidden.assign(w, Tensor<T>{});

  StreamOutput<T>& out = c.out;
  out.per_step_logits = Tensor<T>({w, l});
  out.per_step_probs = Tensor<T>({w, l});

  Tensor<T> h({hc}), cc({hc});
  for (int t = 0; t < w; ++t) {
    if (inputs_are_features) {
      check_shape(inputs[t], {model.encoder_cfg.feature_dim}, "splice feature");
      c.features[t] = inputs[t];
    } else {
      c.features[t] = encoder_forward(model.encoder, inputs[t], &c.enc[t]);
    }
    auto [h_new, c_new] = lstm_cell_forward(c.features[t], h, cc, model.lstm, &c.lstm[t]);
    h = std::move(h_new);
    cc = std::move(c_new);
    c.hidden[t] = h;

    Tensor<T> logits = fc_forward(h, model.head_w, model.head_b);
    Tensor<T> probs = softmax(logits);
    for (int k = 0; k < l; ++k) {
      out.per_step_logits.at2(t, k) = logits[k];
      out.per_step_probs.at2(t, k) = probs[k];
    }
  }

  out.step_weight_probs = softmax(model.step_weights);
  out.fused = fuse_steps(out.per_step_probs, out.step_weight_probs);
  if (!cache) return std::move(out);
  return out;
}

template <typename T>
T splice_loss_and_grads(SpliceClassifier<T>& model, const std::vector<Tensor<T>>& inputs,
                        bool inputs_are_features, int label, SpliceCache<T>& cache) {
  const int w = model.window, l = model.num_classes;
  if (label < 0 || label >= l) {
    throw std::invalid_argument("splice label " + std::to_string(label) + " out of range");
  }
  forward_splice(model, inputs, inputs_are_features, &cache);
  const StreamOutput<T>& out = cache.out;

  // loss = -log S, S = sum_t w_t p_t[label]
  T s = T(0);
  for (int t = 0; t < w; ++t) {
    s += out.step_weight_probs[t] * out.per_step_probs.at2(t, label);
  }
  s = std::max(s, std::numeric_limits<T>::min());
  const T loss = -std::log(s);

  // d loss / d step_weights through the weight softmax.
  // dL/dw_t = -p_t[label]/S; w = softmax(step_weights).
  Tensor<T> dw({w});
  for (int t = 0; t < w; ++t) dw[t] = -out.per_step_probs.at2(t, label) / s;
  T dot = T(0);
  for (int t = 0; t < w; ++t) dot += dw[t] * out.step_weight_probs[t];
  for (int t = 0; t < w; ++t) {
    model.dstep_weights[t] += out.step_weight_probs[t] * (dw[t] - dot);
  }

  // Backprop through time.
  Tensor<T> dh_next({model.hidden_dim}), dc_next({model.hidden_dim});
  for (int t = w - 1; t >= 0; --t) {
    // dL/dlogit_t[k] = -(w_t/S) p_t[label] (delta_{k,label} - p_t[k])
    Tensor<T> dlogits({l});
    const T coef = out.step_weight_probs[t] * out.per_step_probs.at2(t, label) / s;
    for (int k = 0; k < l; ++k) {
      const T delta = k == label ? T(1) : T(0);
      dlogits[k] = -coef * (delta - out.per_step_probs.at2(t, k));
    }

    Tensor<T> dh_head;
    fc_backward(cache.hidden[t], model.head_w, dlogits, dh_head, model.dhead_w, model.dhead_b);
    for (int k = 0; k < model.hidden_dim; ++k) dh_next[k] += dh_head[k];

    Tensor<T> dx, dh_prev, dc_prev;
    lstm_cell_backward(model.lstm, cache.lstm[t], dh_next, dc_next, dx, dh_prev, dc_prev,
                       model.lstm_grad);
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);

    if (!inputs_are_features) encoder_backward(model.encoder, cache.enc[t], dx);
  }
  return loss;
}

// --------------------------------------------- stage-A frame classifier

template <typename T>
void FrameClassifier<T>::allocate() {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  encoder.allocate(encoder_cfg);
  head_w = Tensor<T>({num_classes, encoder_cfg.feature_dim});
  head_b = Tensor<T>({num_classes});
  dhead_w = head_w;
  dhead_b = head_b;
}

template <typename T>
void FrameClassifier<T>::init_params(std::uint64_t seed) {
  encoder.init_params(seed);
  Rng rng(derive_seed(seed, "init/frame_head.w"));
  kaiming_uniform(head_w, encoder_cfg.feature_dim, rng);
  head_b.zero();
}

template <typename T>
void FrameClassifier<T>::zero_grads() {
  encoder.zero_grads();
  dhead_w.zero();
  dhead_b.zero();
}

template <typename T>
void FrameClassifier<T>::for_each_parameter(
    const std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>& fn) {
  encoder.for_each_parameter(fn);
  fn("frame_head.w", head_w, dhead_w);
  fn("frame_head.b", head_b, dhead_b);
}

template <typename T>
Tensor<T> FrameClassifier<T>::forward(const Tensor<T>& frame) const {
  const Tensor<T> feature = encoder_forward(encoder, frame);
  return fc_forward(feature, head_w, head_b);
}

template <typename T>
T FrameClassifier<T>::loss_and_grads(const Tensor<T>& frame, int label) {
  EncoderCache<T> cache;
  const Tensor<T> feature = encoder_forward(encoder, frame, &cache);
  const Tensor<T> logits = fc_forward(feature, head_w, head_b);
  CrossEntropyResult<T> ce = softmax_cross_entropy(logits, label);

  Tensor<T> dfeature;
  fc_backward(feature, head_w, ce.dlogits, dfeature, dhead_w, dhead_b);
  encoder_backward(encoder, cache, dfeature);
  return ce.loss;
}

// ----------------------------------------------------------------- utils

template <typename Model>
double grad_norm(Model& model) {
  using T = typename decltype(model.head_w.data)::value_type;
  double sq = 0.0;
  model.for_each_parameter([&](const std::string&, Tensor<T>&, Tensor<T>& g) {
    for (const T& v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  });
  return std::sqrt(sq);
}

template <typename Model>
void scale_grads(Model& model, double factor) {
  using T = typename decltype(model.head_w.data)::value_type;
  model.for_each_parameter([&](const std::string&, Tensor<T>&, Tensor<T>& g) {
    for (T& v : g.data) v *= static_cast<T>(factor);
  });
}

}  // namespace egoact
