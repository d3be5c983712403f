#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoact/tensor.hpp"

namespace egoact {

/// Named-parameter container. On disk it is a directory holding
///   params.bin   little-endian float32, tensors concatenated in entry order
///   index.json   name -> {shape, offset (bytes), count} plus the sha256 of
///                params.bin and a free-form "meta" object
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor<float>>> entries;
  nlohmann::json meta = nlohmann::json::object();

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

/// Verifies the stored content hash; throws on mismatch or malformed index.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Content hash (hex sha256 of params.bin) of a checkpoint on disk.
std::string checkpoint_hash(const std::filesystem::path& dir);

/// Capture every parameter of a model exposing for_each_parameter.
template <typename Model>
Checkpoint snapshot(Model& model, nlohmann::json meta = nlohmann::json::object()) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  model.for_each_parameter([&](const std::string& name, Tensor<float>& value, Tensor<float>&) {
    ckpt.entries.emplace_back(name, value);
  });
  return ckpt;
}

/// Strict restore: the checkpoint must contain exactly the model's parameter
/// names with matching shapes.
template <typename Model>
void restore(Model& model, const Checkpoint& ckpt) {
  std::size_t used = 0;
  model.for_each_parameter([&](const std::string& name, Tensor<float>& value, Tensor<float>&) {
    const Tensor<float>* src = ckpt.find(name);
    if (!src) throw std::runtime_error("checkpoint missing parameter: " + name);
    if (src->shape != value.shape) {
      throw std::runtime_error("checkpoint parameter " + name + " has shape " +
                               shape_to_string(src->shape) + ", model expects " +
                               shape_to_string(value.shape));
    }
    value = *src;
    ++used;
  });
  if (used != ckpt.entries.size()) {
    throw std::runtime_error("checkpoint contains " + std::to_string(ckpt.entries.size()) +
                             " parameters, model uses " + std::to_string(used));
  }
}

}  // namespace egoact
