#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egoact/image.hpp"
#include "egoact/rng.hpp"
#include "egoact/tensor.hpp"

namespace egoact {

/// Object-scale normalization chain configuration. The paper-scale values
/// are crop_size 224 resized to 300 out of a dataset-dependent central crop;
/// the toy pipeline scales everything down but keeps the ratios.
struct CropConfig {
  int central_width = 56;   // M: central crop width
  int central_height = 56;  // N: central crop height
  int crop_size = 42;
  int resize_to = 56;
  std::uint64_t random_seed = 0;

  void validate() const;
};

/// Per-channel population mean and variance over a set of frames.
struct DatasetStats {
  std::vector<double> mean;
  std::vector<double> variance;

  std::string content_hash() const;
};

/// Streaming single-pass accumulator (Welford), mergeable across videos.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(int channels);

  void add(const Image& img);
  void merge(const StatsAccumulator& other);
  DatasetStats finalize() const;  // throws if no pixels were accumulated
  std::uint64_t count() const { return channels_.empty() ? 0 : channels_[0].n; }

 private:
  struct Channel {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Channel> channels_;
};

enum class SpliceMode { kTraining, kEvaluation };

/// Window of W frame indices classified as a unit.
struct Splice {
  int center_index = 0;
  std::vector<int> frame_indices;  // length W, non-decreasing, clamped in range
  int label = 0;
};

/// Training mode: one splice per labeled frame t (subsampled by `stride`)
/// with indices t-floor(W/2) .. t+floor(W/2), boundary indices clamped;
/// label is the center frame's. Evaluation mode: non-overlapping tiles of W
/// frames, the last partial tile clamped backward to end at the final frame;
/// label is the majority frame label (ties to the lowest class index).
std::vector<Splice> make_splices(const std::vector<int>& frame_labels, int window,
                                 SpliceMode mode, int stride = 1);

Image central_crop(const Image& img, int crop_w, int crop_h);
GrayImage central_crop(const GrayImage& img, int crop_w, int crop_h);

struct CropOffset {
  int x = 0;
  int y = 0;
};

Image crop_at(const Image& img, CropOffset offset, int crop_size);
CropOffset center_crop_offset(int width, int height, int crop_size);

/// Uniform offset from the supplied deterministic generator.
std::pair<Image, CropOffset> random_crop(const Image& img, int crop_size, Rng& rng);

/// Half-pixel-centered bilinear resize (align-corners = false).
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// (x - mean) / sqrt(variance + 1e-8), per channel.
Image normalize(const Image& img, const DatasetStats& stats);

enum class PreprocessMode { kTrain, kEval };

/// Geometry of one preprocess application, for mapping annotations (e.g.
/// object boxes) from raw-frame coordinates into the network input frame.
struct PreprocessGeometry {
  CropOffset central;
  CropOffset crop;
  float scale_x = 1.0f;
  float scale_y = 1.0f;

  void map_point(float x, float y, float& out_x, float& out_y) const;
};

/// central crop -> random/center crop -> resize -> normalize. Train mode
/// draws the crop offset from `rng`; eval mode uses the exact center.
Image preprocess_frame(const Image& img, const CropConfig& config, const DatasetStats& stats,
                       PreprocessMode mode, Rng& rng, PreprocessGeometry* geometry = nullptr);

/// Planar image as a (C, H, W) network input tensor.
Tensor<float> image_to_tensor(const Image& img);

}  // namespace egoact
