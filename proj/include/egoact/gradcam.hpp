#pragma once

#include <vector>

#include "egoact/image.hpp"
#include "egoact/model.hpp"

namespace egoact {

/// Grad-CAM at one splice step: alpha_k = spatial mean of
/// d(logit of class_index at step)/dA^k over the last conv block's
/// post-relu maps A^k of that step's frame; heatmap = relu(sum_k alpha_k
/// A^k), max-normalized to [0,1] (an all-zero map stays zero).
/// Clobbers and re-zeroes the model's gradient buffers.
Tensor<float> grad_cam(SpliceClassifier<float>& model, const std::vector<Tensor<float>>& frames,
                       int step, int class_index);

/// 2D heatmap as a grayscale image (for bilinear upsampling and export).
GrayImage heatmap_to_image(const Tensor<float>& heatmap);

}  // namespace egoact
