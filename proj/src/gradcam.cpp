#include "egoact/gradcam.hpp"

#include <algorithm>
#include <stdexcept>

namespace egoact {

Tensor<float> grad_cam(SpliceClassifier<float>& model, const std::vector<Tensor<float>>& frames,
                       int step, int class_index) {
  if (step < 0 || step >= model.window) {
    throw std::invalid_argument("grad_cam: step " + std::to_string(step) +
                                " outside window of " + std::to_string(model.window));
  }
  if (class_index < 0 || class_index >= model.num_classes) {
    throw std::invalid_argument("grad_cam: class " + std::to_string(class_index) +
                                " out of range");
  }

  model.zero_grads();
  SpliceCache<float> cache;
  forward_splice(model, frames, /*inputs_are_features=*/false, &cache);

  // d(logit_c at `step`) w.r.t. that step's activations: the only path from
  // this frame runs head <- h_step <- lstm step <- feature <- encoder.
  Tensor<float> dlogits({model.num_classes});
  dlogits[class_index] = 1.0f;

  Tensor<float> dh;
  fc_backward(cache.hidden[step], model.head_w, dlogits, dh, model.dhead_w, model.dhead_b);

  Tensor<float> dc({model.hidden_dim});
  Tensor<float> dx, dh_prev, dc_prev;
  lstm_cell_backward(model.lstm, cache.lstm[step], dh, dc, dx, dh_prev, dc_prev,
                     model.lstm_grad);

  Tensor<float> d_last_relu;
  encoder_backward(model.encoder, cache.enc[step], dx, &d_last_relu);
  model.zero_grads();

  const Tensor<float>& maps = cache.enc[step].relu_out.back();
  const int channels = maps.shape[0], h = maps.shape[1], w = maps.shape[2];
  const float inv_area = 1.0f / static_cast<float>(h * w);

  Tensor<float> heat({h, w});
  for (int k = 0; k < channels; ++k) {
    float alpha = 0.0f;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) alpha += d_last_relu.at3(k, y, x);
    alpha *= inv_area;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) heat.at2(y, x) += alpha * maps.at3(k, y, x);
  }

  float peak = 0.0f;
  for (float& v : heat.data) {
    v = std::max(v, 0.0f);
    peak = std::max(peak, v);
  }
  if (peak > 0.0f) {
    for (float& v : heat.data) v /= peak;
  }
  return heat;
}

GrayImage heatmap_to_image(const Tensor<float>& heatmap) {
  if (heatmap.shape.size() != 2) throw std::invalid_argument("heatmap must be 2D");
  GrayImage img(heatmap.shape[1], heatmap.shape[0]);
  img.data = heatmap.data;
  return img;
}

}  // namespace egoact
