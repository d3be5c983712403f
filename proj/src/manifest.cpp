#include "egoact/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace egoact {

using nlohmann::json;

int LabelMap::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

void LabelMap::validate() const {
  if (names.size() < 2) throw std::invalid_argument("label map needs at least 2 classes");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw std::invalid_argument("label map contains an empty name");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate label name: " + n);
  }
}

std::filesystem::path DatasetManifest::resolve(const std::string& frame_path) const {
  std::filesystem::path p(frame_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> DatasetManifest::subjects() const {
  std::set<std::string> s;
  for (const auto& v : videos) s.insert(v.subject);
  return {s.begin(), s.end()};
}

void DatasetManifest::validate() const {
  label_map.validate();
  if (!label_origins.empty() &&
      label_origins.size() != static_cast<size_t>(label_map.size())) {
    throw std::invalid_argument("label_origins size does not match label map");
  }
  std::set<std::string> ids;
  for (const auto& v : videos) {
    if (v.video_id.empty()) throw std::invalid_argument("video with empty id");
    if (!ids.insert(v.video_id).second) {
      throw std::invalid_argument("duplicate video id: " + v.video_id);
    }
    if (v.subject.empty()) throw std::invalid_argument(v.video_id + ": empty subject");
    if (v.frame_paths.empty()) throw std::invalid_argument(v.video_id + ": no frames");
    if (v.frame_paths.size() != v.frame_labels.size()) {
      throw std::invalid_argument(v.video_id + ": frame/label count mismatch");
    }
    for (int label : v.frame_labels) {
      if (label < 0 || label >= label_map.size()) {
        throw std::invalid_argument(v.video_id + ": label " + std::to_string(label) +
                                    " out of range");
      }
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());

  DatasetManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    if (!have_header) {
      if (!j.contains("label_names")) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": first line must be a header with label_names");
      }
      m.name = j.value("name", "dataset");
      m.label_map.names = j.at("label_names").get<std::vector<std::string>>();
      if (j.contains("label_origins")) {
        m.label_origins = j.at("label_origins").get<std::vector<std::string>>();
      }
      have_header = true;
      continue;
    }
    VideoRecord v;
    try {
      v.video_id = j.at("video_id").get<std::string>();
      v.subject = j.at("subject").get<std::string>();
      v.frame_paths = j.at("frames").get<std::vector<std::string>>();
      v.frame_labels = j.at("labels").get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": bad video record: " + e.what());
    }
    m.videos.push_back(std::move(v));
  }
  if (!have_header) throw std::runtime_error(path.string() + ": empty manifest");

  m.validate();

  if (report) {
    for (const auto& v : m.videos) {
      for (const auto& f : v.frame_paths) {
        if (!std::filesystem::exists(m.resolve(f))) {
          report->warnings.push_back(v.video_id + ": missing frame file " + f);
        }
      }
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());

  json header = {{"name", manifest.name}, {"label_names", manifest.label_map.names}};
  if (!manifest.label_origins.empty()) header["label_origins"] = manifest.label_origins;
  out << header.dump() << "\n";
  for (const auto& v : manifest.videos) {
    json j = {{"video_id", v.video_id},
              {"subject", v.subject},
              {"frames", v.frame_paths},
              {"labels", v.frame_labels}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<LosoSplit> loso_splits(const DatasetManifest& manifest) {
  auto subjects = manifest.subjects();
  if (subjects.size() < 2) {
    throw std::invalid_argument("leave-one-subject-out needs at least 2 subjects");
  }
  std::vector<LosoSplit> splits;
  splits.reserve(subjects.size());
  for (const auto& subject : subjects) {
    LosoSplit s;
    s.held_out_subject = subject;
    for (const auto& v : manifest.videos) {
      (v.subject == subject ? s.test_videos : s.train_videos).push_back(v.video_id);
    }
    splits.push_back(std::move(s));
  }
  return splits;
}

DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b) {
  a.validate();
  b.validate();

  DatasetManifest out;
  out.name = a.name + "+" + b.name;
  out.base_dir = a.base_dir;

  auto origin_of = [](const DatasetManifest& m, int label) {
    return m.label_origins.empty() ? m.name : m.label_origins[label];
  };

  // Dedup classes by name; remap each source's labels into the merged map.
  auto add_labels = [&](const DatasetManifest& m) {
    std::vector<int> remap(m.label_map.size());
    for (int i = 0; i < m.label_map.size(); ++i) {
      const auto& name = m.label_map.names[i];
      int idx = out.label_map.index_of(name);
      if (idx < 0) {
        idx = out.label_map.size();
        out.label_map.names.push_back(name);
        out.label_origins.push_back(origin_of(m, i));
      }
      remap[i] = idx;
    }
    return remap;
  };
  std::vector<int> remap_a = add_labels(a);
  std::vector<int> remap_b = add_labels(b);

  auto add_videos = [&](const DatasetManifest& m, const std::vector<int>& remap) {
    for (const auto& v : m.videos) {
      VideoRecord r = v;
      r.video_id = m.name + "/" + v.video_id;
      r.subject = m.name + "/" + v.subject;
      // Frames from b resolve against b's base_dir; store them absolute so
      // the merged manifest stays loadable from a's directory.
      if (&m == &b && b.base_dir != a.base_dir) {
        for (auto& f : r.frame_paths) f = m.resolve(f).string();
      }
      for (auto& label : r.frame_labels) label = remap[label];
      out.videos.push_back(std::move(r));
    }
  };
  add_videos(a, remap_a);
  add_videos(b, remap_b);

  out.validate();
  return out;
}

}  // namespace egoact
