#pragma once

// One config file drives every pipeline stage. Parsing is strict: unknown
// keys are errors (with their full key path) so typos never silently fall
// back to defaults. The canonical JSON form feeds the config content hash
// that names run directories and scopes cache keys.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egoact/flow.hpp"
#include "egoact/homography.hpp"
#include "egoact/model.hpp"
#include "egoact/preprocess.hpp"
#include "egoact/sgd.hpp"
#include "egoact/synth.hpp"

#include <nlohmann/json_fwd.hpp>

namespace egoact {

/// Either an internally generated dataset or one or more manifests on disk
/// (several manifests are merged left to right for mixed-dataset runs).
struct DataConfig {
  std::optional<SynthConfig> synth;
  std::vector<std::string> manifests;
};

struct ModelSection {
  int window = 11;
  int hidden_dim = 64;
  int feature_dim = 64;
  std::vector<ConvBlockSpec> blocks = {{8, 3, 1, 2}, {16, 3, 1, 2}, {32, 3, 1, 2}};
  FusionMode fusion = FusionMode::kMean;
  double fusion_lambda = 0.5;
};

/// Curriculum pairs are class names; they resolve against the manifest's
/// label map at train time. `streams` picks which streams run the schedule.
struct CurriculumSection {
  std::vector<std::array<std::string, 2>> pairs;
  int phase1_iterations = 0;
  int phase2_iterations = 0;
  std::vector<std::string> streams = {"rgb", "flow"};

  bool enabled_for(const std::string& stream) const;
};

struct StreamSchedules {
  TrainingConfig encoder;
  TrainingConfig lstm;
};

struct TrainSection {
  StreamSchedules rgb;
  StreamSchedules flow;
  CurriculumSection curriculum;
  int val_cadence = 75;
  double split_noise_std = 0.01;
};

struct PipelineConfig {
  std::string name = "egoact";
  std::uint64_t seed = 0;
  DataConfig data;
  CropConfig crop;
  FlowParams flow;
  RansacParams ransac;
  int ransac_grid_step = 8;
  double flow_color_max = 4.0;  // px; fixed render scale for the flow stream
  ModelSection model;
  TrainSection train;
  std::string output_root = "out";
  std::string cache_root;  // empty: EGOACT_CACHE_ROOT env or <output_root>/cache

  EncoderConfig encoder_config() const;
  nlohmann::json to_json() const;
  std::string content_hash() const;
  void validate() const;
};

/// Strict parse; throws std::runtime_error naming the offending key path.
PipelineConfig parse_pipeline_config(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Canonical JSON fragments, reused for cache keys.
nlohmann::json to_json(const FlowParams& p);
nlohmann::json to_json(const RansacParams& p);
nlohmann::json to_json(const CropConfig& c);
nlohmann::json to_json(const TrainingConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const ModelSection& m);

}  // namespace egoact
