#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace egoact {

struct LabelMap {
  std::vector<std::string> names;

  int size() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // -1 when absent

  void validate() const;  // unique names, >= 2 classes
};

struct VideoRecord {
  std::string video_id;
  std::string subject;
  std::vector<std::string> frame_paths;  // relative to the manifest directory
  std::vector<int> frame_labels;
};

struct DatasetManifest {
  std::string name;
  LabelMap label_map;
  std::vector<VideoRecord> videos;
  /// Optional per-class source dataset (filled by merge_manifests); empty or
  /// one entry per class. Drives cross-category confusion reporting.
  std::vector<std::string> label_origins;
  /// Directory frame paths resolve against (set by load/save).
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& frame_path) const;
  std::vector<std::string> subjects() const;  // distinct, sorted

  void validate() const;
};

struct LoadReport {
  std::vector<std::string> warnings;  // e.g. missing frame files
};

/// JSON-lines manifest: a header line {"name": .., "label_names": [..]},
/// then one video per line. Missing frame files are warnings, not errors
/// (frames may be generated by a later stage).
DatasetManifest load_manifest(const std::filesystem::path& path, LoadReport* report = nullptr);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct LosoSplit {
  std::string held_out_subject;
  std::vector<std::string> train_videos;
  std::vector<std::string> test_videos;
};

/// One split per distinct subject; test sets partition the video set.
/// Throws when the manifest has fewer than 2 subjects.
std::vector<LosoSplit> loso_splits(const DatasetManifest& manifest);

/// Concatenates label maps with name-level dedup and namespaces subjects
/// (and video ids) as "<manifest name>/<value>" to prevent collisions.
DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b);

}  // namespace egoact
