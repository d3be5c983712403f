#pragma once

#include <filesystem>

#include "egoact/flow.hpp"

namespace egoact {

/// Middlebury .flo interchange: little-endian, float magic 202021.25
/// ("PIEH"), int32 width, int32 height, then row-major interleaved (u, v)
/// float32 pairs. Round-trips are bit-exact.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

}  // namespace egoact
