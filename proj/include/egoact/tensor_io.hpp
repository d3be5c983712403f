#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "egoact/tensor.hpp"

namespace egoact {

/// On-disk tensor: one JSON header line {"format", "dtype":"f32", "shape",
/// optional "extra"}, then raw little-endian float32 data. `extra` carries
/// provenance such as the stats hash a cached tensor was normalized with.
void write_tensor(const std::filesystem::path& path, const Tensor<float>& tensor,
                  const nlohmann::json& extra = nlohmann::json::object());

struct StoredTensor {
  Tensor<float> tensor;
  nlohmann::json extra;
};

StoredTensor read_tensor(const std::filesystem::path& path);

}  // namespace egoact
