#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace egoact {

/// Single-channel image, row-major, intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Planar (channel-major) float image, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;  // [c][y][x]

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int c, int x, int y) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
  const float* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * height * width;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Clamped bilinear sample at real coordinates (image convention: pixel
/// centers at integer coordinates, samples outside clamp to the border).
float sample_bilinear(const GrayImage& img, float x, float y);
float sample_bilinear_plane(const float* plane, int width, int height, float x, float y);

/// Fixed luma weights (0.299, 0.587, 0.114).
GrayImage to_gray(const Image& img);

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// In-memory P6 encoding (used for hashing frame content without re-reading).
std::string encode_ppm(const Image& img);

}  // namespace egoact
