#include "egoact/flow_color.hpp"

#include <algorithm>
#include <cmath>

namespace egoact {

std::array<std::array<float, 3>, 55> middlebury_color_wheel() {
  constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::array<std::array<float, 3>, 55> wheel{};
  int k = 0;
  for (int i = 0; i < RY; ++i) wheel[k++] = {1.0f, static_cast<float>(i) / RY, 0.0f};
  for (int i = 0; i < YG; ++i) wheel[k++] = {1.0f - static_cast<float>(i) / YG, 1.0f, 0.0f};
  for (int i = 0; i < GC; ++i) wheel[k++] = {0.0f, 1.0f, static_cast<float>(i) / GC};
  for (int i = 0; i < CB; ++i) wheel[k++] = {0.0f, 1.0f - static_cast<float>(i) / CB, 1.0f};
  for (int i = 0; i < BM; ++i) wheel[k++] = {static_cast<float>(i) / BM, 0.0f, 1.0f};
  for (int i = 0; i < MR; ++i) wheel[k++] = {1.0f, 0.0f, 1.0f - static_cast<float>(i) / MR};
  return wheel;
}

Image flow_to_color(const FlowField& flow, std::optional<float> max_norm) {
  static const auto wheel = middlebury_color_wheel();
  constexpr int kCols = 55;
  constexpr float kPi = 3.14159265358979323846f;

  float norm;
  if (max_norm.has_value()) {
    norm = std::max(*max_norm, 1e-9f);
  } else {
    float max_mag = 0.0f;
    for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
      max_mag = std::max(max_mag, std::hypot(flow.u[i], flow.v[i]));
    }
    norm = std::max(max_mag, 1e-9f);
  }

  Image out(flow.width, flow.height, 3);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    const float u = flow.u[i];
    const float v = flow.v[i];
    const float rad = std::hypot(u, v) / norm;
    const float angle = std::atan2(-v, -u) / kPi;  // [-1, 1]
    const float fk = (angle + 1.0f) / 2.0f * static_cast<float>(kCols - 1);
    const int k0 = std::min(static_cast<int>(fk), kCols - 1);
    const int k1 = (k0 + 1) % kCols;
    const float f = fk - static_cast<float>(k0);
    for (int c = 0; c < 3; ++c) {
      float col = (1.0f - f) * wheel[k0][c] + f * wheel[k1][c];
      if (rad <= 1.0f) {
        col = 1.0f - rad * (1.0f - col);  // desaturate toward white
      } else {
        col *= 0.75f;  // out of range
      }
      out.data[static_cast<std::size_t>(c) * flow.pixel_count() + i] = col;
    }
  }
  return out;
}

}  // namespace egoact
