#pragma once

// Stage orchestration. Every stage is a pure function of its config section
// and input artifacts, memoized in a content-addressed store; rerunning a
// stage with unchanged inputs is a cache hit. Stages never invoke their
// dependencies implicitly: missing inputs raise DependencyError naming the
// stage that would produce them.
//
// Canonical order: synth -> flow -> compensate -> stats -> preprocess ->
// train -> eval -> gradcam -> report.

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoact/cache.hpp"
#include "egoact/manifest.hpp"
#include "egoact/pipeline_config.hpp"
#include "egoact/preprocess.hpp"

namespace egoact {

class DependencyError : public std::runtime_error {
 public:
  DependencyError(std::string missing_stage, const std::string& message)
      : std::runtime_error(message), missing_stage_(std::move(missing_stage)) {}
  const std::string& missing_stage() const { return missing_stage_; }

 private:
  std::string missing_stage_;
};

struct RunOptions {
  int jobs = 1;
  bool deterministic = false;
};

/// cache_root config key, else EGOACT_CACHE_ROOT, else <output_root>/cache.
std::filesystem::path resolve_cache_root(const PipelineConfig& cfg);

class Pipeline {
 public:
  Pipeline(PipelineConfig config, RunOptions options);

  /// Dispatch by stage name; throws std::invalid_argument for unknown names.
  nlohmann::json run_stage(const std::string& stage);

  nlohmann::json run_synth();
  nlohmann::json run_flow();
  nlohmann::json run_compensate();
  nlohmann::json run_stats();
  nlohmann::json run_preprocess();
  nlohmann::json run_train();
  nlohmann::json run_eval();
  nlohmann::json run_gradcam();
  nlohmann::json run_report();

  const PipelineConfig& config() const { return cfg_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  KeyedStore& store() { return store_; }

  /// The resolved dataset: generated entry (synth) or merged manifests.
  const DatasetManifest& dataset();

  // Cache keys, exposed so tests can probe invalidation behavior.
  std::string synth_key() const;
  std::string flow_key(const VideoRecord& video);
  std::string compensate_key(const VideoRecord& video);
  std::string stats_key(const std::string& held_out, const std::string& stream);
  std::string preprocess_key(const std::string& held_out, const std::string& stream,
                             const VideoRecord& video);
  std::string train_key(const std::string& held_out, const std::string& stream);
  std::string eval_key(const std::string& held_out);

 private:
  struct CacheMark {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
  };

  CacheMark mark() const;
  nlohmann::json finish_stage(const std::string& stage, nlohmann::json report,
                              const CacheMark& before, double elapsed_seconds);

  const VideoRecord& video_by_id(const std::string& video_id);
  std::string frames_hash(const VideoRecord& video);
  std::string labels_hash(const std::vector<const VideoRecord*>& videos);
  std::vector<const VideoRecord*> fold_videos(const std::string& held_out, bool held_out_side);

  Image load_frame(const VideoRecord& video, int index);
  std::vector<FlowField> load_flow_entry(const std::filesystem::path& entry, int pairs,
                                         const char* prefix);
  std::filesystem::path require_entry(const std::string& key, const std::string& stage,
                                      const std::string& what);

  DatasetStats load_stats(const std::string& held_out, const std::string& stream);
  struct StreamSources;  // per-video image loader for one stream

  PipelineConfig cfg_;
  RunOptions opt_;
  KeyedStore store_;
  std::filesystem::path run_dir_;
  std::optional<DatasetManifest> manifest_;
  std::map<std::string, std::string> frames_hash_cache_;
};

}  // namespace egoact
