#include "egoact/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "egoact/hash.hpp"

namespace egoact {

void CropConfig::validate() const {
  if (central_width < 1 || central_height < 1) {
    throw std::invalid_argument("CropConfig: central crop must be positive");
  }
  if (crop_size > std::min(central_width, central_height)) {
    throw std::invalid_argument("CropConfig: crop_size exceeds central crop");
  }
  if (crop_size < 1 || resize_to < 1) {
    throw std::invalid_argument("CropConfig: crop_size and resize_to must be >= 1");
  }
}

std::string DatasetStats::content_hash() const {
  std::ostringstream repr;
  repr.precision(17);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    repr << c << ":" << mean[c] << "," << variance[c] << ";";
  }
  return sha256_hex(repr.str());
}

StatsAccumulator::StatsAccumulator(int channels) : channels_(channels) {
  if (channels < 1) throw std::invalid_argument("StatsAccumulator: channels must be >= 1");
}

void StatsAccumulator::add(const Image& img) {
  if (img.channels != static_cast<int>(channels_.size())) {
    throw std::invalid_argument("StatsAccumulator: channel count mismatch");
  }
  for (int c = 0; c < img.channels; ++c) {
    Channel& ch = channels_[c];
    const float* plane = img.plane(c);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      ++ch.n;
      const double delta = plane[i] - ch.mean;
      ch.mean += delta / static_cast<double>(ch.n);
      ch.m2 += delta * (plane[i] - ch.mean);
    }
  }
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.channels_.size() != channels_.size()) {
    throw std::invalid_argument("StatsAccumulator: channel count mismatch in merge");
  }
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    Channel& a = channels_[c];
    const Channel& b = other.channels_[c];
    if (b.n == 0) continue;
    if (a.n == 0) {
      a = b;
      continue;
    }
    const double delta = b.mean - a.mean;
    const std::uint64_t n = a.n + b.n;
    a.m2 += b.m2 + delta * delta * static_cast<double>(a.n) * static_cast<double>(b.n) /
                       static_cast<double>(n);
    a.mean += delta * static_cast<double>(b.n) / static_cast<double>(n);
    a.n = n;
  }
}

DatasetStats StatsAccumulator::finalize() const {
  DatasetStats stats;
  for (const Channel& ch : channels_) {
    if (ch.n == 0) throw std::runtime_error("StatsAccumulator: no frames accumulated");
    stats.mean.push_back(ch.mean);
    stats.variance.push_back(ch.m2 / static_cast<double>(ch.n));
  }
  return stats;
}

std::vector<Splice> make_splices(const std::vector<int>& frame_labels, int window,
                                 SpliceMode mode, int stride) {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("make_splices: window must be odd and >= 1");
  }
  if (frame_labels.empty()) throw std::invalid_argument("make_splices: empty video");
  if (stride < 1) throw std::invalid_argument("make_splices: stride must be >= 1");

  const int len = static_cast<int>(frame_labels.size());
  const auto clamp_index = [len](int i) { return std::clamp(i, 0, len - 1); };
  std::vector<Splice> splices;

  if (mode == SpliceMode::kTraining) {
    const int half = window / 2;
    for (int t = 0; t < len; t += stride) {
      Splice s;
      s.center_index = t;
      s.label = frame_labels[t];
      s.frame_indices.reserve(window);
      for (int i = t - half; i <= t + half; ++i) s.frame_indices.push_back(clamp_index(i));
      splices.push_back(std::move(s));
    }
    return splices;
  }

  std::vector<int> starts;
  int s = 0;
  while (s + window <= len) {
    starts.push_back(s);
    s += window;
  }
  if (len % window != 0) starts.push_back(len - window);  // may be negative when len < W

  for (const int start : starts) {
    Splice sp;
    sp.center_index = clamp_index(start + window / 2);
    sp.frame_indices.reserve(window);
    for (int i = start; i < start + window; ++i) sp.frame_indices.push_back(clamp_index(i));
    // Majority label over the distinct frames the tile covers.
    std::map<int, int> votes;
    for (int i = clamp_index(start); i <= clamp_index(start + window - 1); ++i) {
      ++votes[frame_labels[i]];
    }
    int best_label = votes.begin()->first;
    int best_count = votes.begin()->second;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {
        best_label = label;
        best_count = count;
      }
    }
    sp.label = best_label;
    splices.push_back(std::move(sp));
  }
  return splices;
}

namespace {

template <typename Img>
Img crop_generic(const Img& img, int ox, int oy, int cw, int ch, int channels) {
  Img out;
  if constexpr (std::is_same_v<Img, Image>) {
    out = Image(cw, ch, channels);
  } else {
    out = GrayImage(cw, ch);
  }
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        if constexpr (std::is_same_v<Img, Image>) {
          out.at(c, x, y) = img.at(c, ox + x, oy + y);
        } else {
          out.at(x, y) = img.at(ox + x, oy + y);
        }
      }
    }
  }
  return out;
}

}  // namespace

Image central_crop(const Image& img, int crop_w, int crop_h) {
  if (crop_w > img.width || crop_h > img.height) {
    throw std::invalid_argument("central_crop: crop exceeds image");
  }
  // Floor split: the extra pixel of an odd margin goes to the right/bottom.
  const int ox = (img.width - crop_w) / 2;
  const int oy = (img.height - crop_h) / 2;
  return crop_generic(img, ox, oy, crop_w, crop_h, img.channels);
}

GrayImage central_crop(const GrayImage& img, int crop_w, int crop_h) {
  if (crop_w > img.width || crop_h > img.height) {
    throw std::invalid_argument("central_crop: crop exceeds image");
  }
  const int ox = (img.width - crop_w) / 2;
  const int oy = (img.height - crop_h) / 2;
  return crop_generic(img, ox, oy, crop_w, crop_h, 1);
}

Image crop_at(const Image& img, CropOffset offset, int crop_size) {
  if (offset.x < 0 || offset.y < 0 || offset.x + crop_size > img.width ||
      offset.y + crop_size > img.height) {
    throw std::invalid_argument("crop_at: crop outside image");
  }
  return crop_generic(img, offset.x, offset.y, crop_size, crop_size, img.channels);
}

CropOffset center_crop_offset(int width, int height, int crop_size) {
  if (crop_size > width || crop_size > height) {
    throw std::invalid_argument("center_crop_offset: crop exceeds image");
  }
  return CropOffset{(width - crop_size) / 2, (height - crop_size) / 2};
}

std::pair<Image, CropOffset> random_crop(const Image& img, int crop_size, Rng& rng) {
  if (crop_size > img.width || crop_size > img.height) {
    throw std::invalid_argument("random_crop: crop exceeds image");
  }
  CropOffset offset;
  offset.x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.width - crop_size + 1)));
  offset.y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.height - crop_size + 1)));
  return {crop_at(img, offset, crop_size), offset};
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize_bilinear: bad target size");
  Image out(out_w, out_h, img.channels);
  const float sx = static_cast<float>(img.width) / static_cast<float>(out_w);
  const float sy = static_cast<float>(img.height) / static_cast<float>(out_h);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
        const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
        dst[static_cast<std::size_t>(y) * out_w + x] =
            sample_bilinear_plane(src, img.width, img.height, src_x, src_y);
      }
    }
  }
  return out;
}

Image normalize(const Image& img, const DatasetStats& stats) {
  if (static_cast<int>(stats.mean.size()) != img.channels) {
    throw std::invalid_argument("normalize: stats channel count mismatch");
  }
  Image out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float mean = static_cast<float>(stats.mean[c]);
    const float inv_std =
        1.0f / std::sqrt(static_cast<float>(stats.variance[c]) + 1e-8f);
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      dst[i] = (src[i] - mean) * inv_std;
    }
  }
  return out;
}

void PreprocessGeometry::map_point(float x, float y, float& out_x, float& out_y) const {
  out_x = (x - static_cast<float>(central.x) - static_cast<float>(crop.x) + 0.5f) * scale_x - 0.5f;
  out_y = (y - static_cast<float>(central.y) - static_cast<float>(crop.y) + 0.5f) * scale_y - 0.5f;
}

Image preprocess_frame(const Image& img, const CropConfig& config, const DatasetStats& stats,
                       PreprocessMode mode, Rng& rng, PreprocessGeometry* geometry) {
  config.validate();
  PreprocessGeometry geom;
  geom.central.x = (img.width - config.central_width) / 2;
  geom.central.y = (img.height - config.central_height) / 2;
  Image cropped = central_crop(img, config.central_width, config.central_height);

  if (mode == PreprocessMode::kTrain) {
    auto [crop, offset] = random_crop(cropped, config.crop_size, rng);
    geom.crop = offset;
    cropped = std::move(crop);
  } else {
    geom.crop = center_crop_offset(cropped.width, cropped.height, config.crop_size);
    cropped = crop_at(cropped, geom.crop, config.crop_size);
  }

  geom.scale_x = static_cast<float>(config.resize_to) / static_cast<float>(config.crop_size);
  geom.scale_y = geom.scale_x;
  Image resized = resize_bilinear(cropped, config.resize_to, config.resize_to);
  if (geometry != nullptr) *geometry = geom;
  return normalize(resized, stats);
}

Tensor<float> image_to_tensor(const Image& img) {
  return Tensor<float>({img.channels, img.height, img.width}, img.data);
}

}  // namespace egoact
