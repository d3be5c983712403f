#pragma once

#include <array>
#include <optional>

#include "egoact/flow.hpp"
#include "egoact/image.hpp"

namespace egoact {

/// The 55-entry Middlebury color wheel (segment counts RY=15, YG=6, GC=4,
/// CB=11, BM=13, MR=6), channel values in [0, 1].
std::array<std::array<float, 3>, 55> middlebury_color_wheel();

/// Renders flow to an RGB image: hue from atan2(-v, -u), saturation
/// proportional to magnitude / max_norm, zero flow maps to white. When
/// max_norm is absent, the field's maximum magnitude is used (epsilon
/// guarded). Magnitudes above max_norm render darkened at full saturation.
Image flow_to_color(const FlowField& flow, std::optional<float> max_norm = std::nullopt);

}  // namespace egoact
