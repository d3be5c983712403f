#include "egoact/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>

#include "egoact/checkpoint.hpp"
#include "egoact/evaluate.hpp"
#include "egoact/flow_color.hpp"
#include "egoact/flow_io.hpp"
#include "egoact/gradcam.hpp"
#include "egoact/hash.hpp"
#include "egoact/synth.hpp"
#include "egoact/tensor_io.hpp"
#include "egoact/threading.hpp"
#include "egoact/trainer.hpp"

namespace egoact {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStreams[2] = {"rgb", "flow"};

std::string frame_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, index);
  return buf;
}

void write_json_file(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

json homography_to_json(const Homography& H) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({H.h[r][0], H.h[r][1], H.h[r][2]});
  return rows;
}

/// Frame i of a (T, C, H, W) stack as its own (C, H, W) tensor.
Tensor<float> frame_slice(const Tensor<float>& stack, int i) {
  if (stack.shape.size() != 4) throw std::invalid_argument("expected a 4-d frame stack");
  const int c = stack.shape[1], h = stack.shape[2], w = stack.shape[3];
  const std::size_t frame_size = static_cast<std::size_t>(c) * h * w;
  Tensor<float> out({c, h, w});
  std::copy_n(stack.data.begin() + static_cast<std::ptrdiff_t>(frame_size * i), frame_size,
              out.data.begin());
  return out;
}

Image gray_to_image(const GrayImage& gray) {
  Image out(gray.width, gray.height, 1);
  out.data = gray.data;
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

}  // namespace

fs::path resolve_cache_root(const PipelineConfig& cfg) {
  if (!cfg.cache_root.empty()) return cfg.cache_root;
  if (const char* env = std::getenv("EGOACT_CACHE_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return fs::path(cfg.output_root) / "cache";
}

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : cfg_(std::move(config)), opt_(options), store_(resolve_cache_root(cfg_)) {
  cfg_.validate();
  if (opt_.jobs < 1) opt_.jobs = 1;

  const std::string tag = "run-" + cfg_.content_hash().substr(0, 12);
  const fs::path root(cfg_.output_root);
  fs::create_directories(root);
  if (opt_.deterministic) {
    run_dir_ = root / tag;
  } else {
    // Reuse the latest run directory for this config so a stage sequence
    // (flow, then train, then eval ...) lands in one place.
    std::string newest;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      const std::string name = entry.path().filename().string();
      if (name.rfind(tag + "-", 0) == 0 && name > newest) newest = name;
    }
    run_dir_ = root / (newest.empty() ? tag + "-" + utc_timestamp() : newest);
  }
  fs::create_directories(run_dir_);
  write_json_file(run_dir_ / "config.json",
                  {{"config", cfg_.to_json()}, {"config_hash", cfg_.content_hash()}});
}

Pipeline::CacheMark Pipeline::mark() const { return {store_.hits(), store_.misses()}; }

json Pipeline::finish_stage(const std::string& stage, json report, const CacheMark& before,
                            double elapsed_seconds) {
  report["stage"] = stage;
  report["cache"] = {{"hits", store_.hits() - before.hits},
                     {"misses", store_.misses() - before.misses}};
  if (!opt_.deterministic) report["elapsed_seconds"] = elapsed_seconds;

  // The persisted copy must be byte-identical across reruns in deterministic
  // mode, so volatile diagnostics stay out of it.
  json persisted = report;
  if (opt_.deterministic) persisted.erase("cache");
  write_json_file(run_dir_ / "stages" / (stage + ".json"), persisted);
  return report;
}

// ------------------------------------------------------------ dataset access

const DatasetManifest& Pipeline::dataset() {
  if (manifest_.has_value()) return *manifest_;
  if (cfg_.data.synth.has_value()) {
    const auto entry = store_.lookup(synth_key());
    if (!entry.has_value()) {
      throw DependencyError("synth", "dataset has not been generated yet; run synth first");
    }
    manifest_ = load_manifest(*entry / "manifest.jsonl");
  } else {
    DatasetManifest merged;
    for (std::size_t i = 0; i < cfg_.data.manifests.size(); ++i) {
      DatasetManifest m = load_manifest(cfg_.data.manifests[i]);
      merged = i == 0 ? std::move(m) : merge_manifests(merged, m);
    }
    manifest_ = std::move(merged);
  }
  manifest_->validate();
  return *manifest_;
}

const VideoRecord& Pipeline::video_by_id(const std::string& video_id) {
  for (const auto& v : dataset().videos) {
    if (v.video_id == video_id) return v;
  }
  throw std::runtime_error("unknown video id: " + video_id);
}

std::string Pipeline::frames_hash(const VideoRecord& video) {
  static std::mutex mutex;
  {
    std::lock_guard<std::mutex> lock(mutex);
    const auto it = frames_hash_cache_.find(video.video_id);
    if (it != frames_hash_cache_.end()) return it->second;
  }
  Sha256 hasher;
  for (const auto& path : video.frame_paths) {
    hasher.update(sha256_file(dataset().resolve(path)));
  }
  std::string digest = hasher.hex_digest();
  std::lock_guard<std::mutex> lock(mutex);
  frames_hash_cache_[video.video_id] = digest;
  return digest;
}

std::string Pipeline::labels_hash(const std::vector<const VideoRecord*>& videos) {
  Sha256 hasher;
  for (const auto& name : dataset().label_map.names) hasher.update(name + "\n");
  for (const VideoRecord* v : videos) {
    hasher.update(v->video_id + ":");
    for (int label : v->frame_labels) hasher.update(std::to_string(label) + ",");
    hasher.update("\n");
  }
  return hasher.hex_digest();
}

std::vector<const VideoRecord*> Pipeline::fold_videos(const std::string& held_out,
                                                      bool held_out_side) {
  std::vector<const VideoRecord*> out;
  for (const auto& v : dataset().videos) {
    if ((v.subject == held_out) == held_out_side) out.push_back(&v);
  }
  return out;
}

Image Pipeline::load_frame(const VideoRecord& video, int index) {
  return read_ppm(dataset().resolve(video.frame_paths.at(index)));
}

std::vector<FlowField> Pipeline::load_flow_entry(const fs::path& entry, int pairs,
                                                 const char* prefix) {
  std::vector<FlowField> flows;
  flows.reserve(pairs);
  for (int i = 0; i < pairs; ++i) {
    flows.push_back(read_flo(entry / (frame_name(prefix, i) + ".flo")));
  }
  return flows;
}

fs::path Pipeline::require_entry(const std::string& key, const std::string& stage,
                                 const std::string& what) {
  const auto entry = store_.lookup(key);
  if (!entry.has_value()) {
    throw DependencyError(stage, "missing " + what + "; run " + stage + " first");
  }
  return *entry;
}

// ------------------------------------------------------------------- keys

std::string Pipeline::synth_key() const {
  if (!cfg_.data.synth.has_value()) throw std::runtime_error("config has no data.synth section");
  return KeyedStore::make_key({"synth", to_json(*cfg_.data.synth).dump(),
                               std::to_string(derive_seed(cfg_.seed, "synth"))});
}

std::string Pipeline::flow_key(const VideoRecord& video) {
  return KeyedStore::make_key({"flow", to_json(cfg_.flow).dump(), frames_hash(video)});
}

std::string Pipeline::compensate_key(const VideoRecord& video) {
  json params = to_json(cfg_.ransac);
  params["grid_step"] = cfg_.ransac_grid_step;
  return KeyedStore::make_key(
      {"compensate", params.dump(), flow_key(video),
       std::to_string(derive_seed(cfg_.seed, "compensate/" + video.video_id))});
}

std::string Pipeline::stats_key(const std::string& held_out, const std::string& stream) {
  std::vector<std::string> parts = {"stats", stream, held_out};
  if (stream == "flow") parts.push_back(std::to_string(cfg_.flow_color_max));
  for (const VideoRecord* v : fold_videos(held_out, false)) {
    parts.push_back(stream == "flow" ? compensate_key(*v) : frames_hash(*v));
  }
  return KeyedStore::make_key(parts);
}

std::string Pipeline::preprocess_key(const std::string& held_out, const std::string& stream,
                                     const VideoRecord& video) {
  const auto stats_entry = store_.lookup(stats_key(held_out, stream));
  if (!stats_entry.has_value()) {
    throw DependencyError("stats", "missing normalization stats for held-out subject " +
                                       held_out + " (" + stream + "); run stats first");
  }
  std::vector<std::string> parts = {"preprocess", stream, to_json(cfg_.crop).dump(),
                                    sha256_file(*stats_entry / "stats.json")};
  if (stream == "flow") {
    parts.push_back(compensate_key(video));
    parts.push_back(std::to_string(cfg_.flow_color_max));
  } else {
    parts.push_back(frames_hash(video));
  }
  return KeyedStore::make_key(parts);
}

std::string Pipeline::train_key(const std::string& held_out, const std::string& stream) {
  const StreamSchedules& schedules = stream == "rgb" ? cfg_.train.rgb : cfg_.train.flow;
  json params = {
      {"window", cfg_.model.window},
      {"hidden_dim", cfg_.model.hidden_dim},
      {"feature_dim", cfg_.model.feature_dim},
      {"blocks", to_json(cfg_.model)["blocks"]},
      {"crop", to_json(cfg_.crop)},
      {"encoder", to_json(schedules.encoder)},
      {"lstm", to_json(schedules.lstm)},
      {"val_cadence", cfg_.train.val_cadence},
      {"split_noise_std", cfg_.train.split_noise_std},
  };
  if (cfg_.train.curriculum.enabled_for(stream)) {
    json pairs = json::array();
    for (const auto& p : cfg_.train.curriculum.pairs) pairs.push_back({p[0], p[1]});
    params["curriculum"] = {{"pairs", std::move(pairs)},
                            {"phase1_iterations", cfg_.train.curriculum.phase1_iterations},
                            {"phase2_iterations", cfg_.train.curriculum.phase2_iterations}};
  }
  const auto train_videos = fold_videos(held_out, false);
  std::vector<std::string> parts = {
      "train",
      stream,
      held_out,
      params.dump(),
      labels_hash(train_videos),
      std::to_string(derive_seed(cfg_.seed, "train/" + held_out + "/" + stream))};
  const auto stats_entry = store_.lookup(stats_key(held_out, stream));
  if (!stats_entry.has_value()) {
    throw DependencyError("stats", "missing normalization stats for held-out subject " +
                                       held_out + " (" + stream + "); run stats first");
  }
  parts.push_back(sha256_file(*stats_entry / "stats.json"));
  for (const VideoRecord* v : train_videos) {
    parts.push_back(stream == "flow" ? compensate_key(*v) : frames_hash(*v));
  }
  if (stream == "flow") parts.push_back(std::to_string(cfg_.flow_color_max));
  return KeyedStore::make_key(parts);
}

std::string Pipeline::eval_key(const std::string& held_out) {
  const fs::path rgb_entry =
      require_entry(train_key(held_out, "rgb"), "train",
                    "trained rgb checkpoint for held-out subject " + held_out);
  const fs::path flow_entry =
      require_entry(train_key(held_out, "flow"), "train",
                    "trained flow checkpoint for held-out subject " + held_out);
  std::vector<std::string> parts = {
      "eval",
      held_out,
      checkpoint_hash(rgb_entry / "checkpoint"),
      checkpoint_hash(flow_entry / "checkpoint"),
      cfg_.model.fusion == FusionMode::kMean ? "mean" : "weighted",
      std::to_string(cfg_.model.fusion_lambda),
      std::to_string(cfg_.model.window)};
  const auto test_videos = fold_videos(held_out, true);
  parts.push_back(labels_hash(test_videos));
  for (const VideoRecord* v : test_videos) {
    for (const char* stream : kStreams) parts.push_back(preprocess_key(held_out, stream, *v));
  }
  return KeyedStore::make_key(parts);
}

// ------------------------------------------------------------------ stages

json Pipeline::run_stage(const std::string& stage) {
  if (stage == "synth") return run_synth();
  if (stage == "flow") return run_flow();
  if (stage == "compensate") return run_compensate();
  if (stage == "stats") return run_stats();
  if (stage == "preprocess") return run_preprocess();
  if (stage == "train") return run_train();
  if (stage == "eval") return run_eval();
  if (stage == "gradcam") return run_gradcam();
  if (stage == "report") return run_report();
  throw std::invalid_argument("unknown stage: " + stage);
}

json Pipeline::run_synth() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  if (!cfg_.data.synth.has_value()) {
    throw std::runtime_error(
        "config takes data from manifests; synth applies only to synthetic configs");
  }
  const fs::path entry = store_.get_or_fill(synth_key(), [&](const fs::path& staging) {
    generate_synthetic_dataset(*cfg_.data.synth, staging, derive_seed(cfg_.seed, "synth"));
  });
  const DatasetManifest& ds = dataset();
  json report = {{"dataset_dir", entry.string()},
                 {"manifest", (entry / "manifest.jsonl").string()},
                 {"videos", ds.videos.size()},
                 {"subjects", ds.subjects().size()},
                 {"classes", ds.label_map.names}};
  return finish_stage("synth", std::move(report), before, seconds_since(start));
}

json Pipeline::run_flow() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const DatasetManifest& ds = dataset();
  std::vector<std::string> paths(ds.videos.size());
  std::size_t total_pairs = 0;
  for (const auto& v : ds.videos) total_pairs += v.frame_paths.size() - 1;

  parallel_for(ds.videos.size(), opt_.jobs, [&](std::size_t i) {
    const VideoRecord& video = ds.videos[i];
    const fs::path entry = store_.get_or_fill(flow_key(video), [&](const fs::path& staging) {
      std::vector<GrayImage> grays;
      grays.reserve(video.frame_paths.size());
      for (std::size_t f = 0; f < video.frame_paths.size(); ++f) {
        grays.push_back(to_gray(load_frame(video, static_cast<int>(f))));
      }
      for (std::size_t f = 0; f + 1 < grays.size(); ++f) {
        const FlowField flow = compute_flow(grays[f], grays[f + 1], cfg_.flow);
        write_flo(staging / (frame_name("flow", static_cast<int>(f)) + ".flo"), flow);
      }
      write_json_file(staging / "flow.json", {{"video_id", video.video_id},
                                              {"pairs", grays.size() - 1}});
    });
    paths[i] = entry.string();
  });

  json artifacts = json::object();
  for (std::size_t i = 0; i < ds.videos.size(); ++i) artifacts[ds.videos[i].video_id] = paths[i];
  json report = {{"videos", ds.videos.size()},
                 {"pairs", total_pairs},
                 {"artifacts", std::move(artifacts)}};
  return finish_stage("flow", std::move(report), before, seconds_since(start));
}

json Pipeline::run_compensate() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const DatasetManifest& ds = dataset();
  std::vector<std::string> paths(ds.videos.size());
  std::vector<std::uint64_t> fallbacks(ds.videos.size(), 0);

  parallel_for(ds.videos.size(), opt_.jobs, [&](std::size_t i) {
    const VideoRecord& video = ds.videos[i];
    const int pairs = static_cast<int>(video.frame_paths.size()) - 1;
    const fs::path flow_entry =
        require_entry(flow_key(video), "flow", "optical flow for video " + video.video_id);
    const fs::path entry =
        store_.get_or_fill(compensate_key(video), [&](const fs::path& staging) {
          const std::vector<FlowField> flows = load_flow_entry(flow_entry, pairs, "flow");
          RansacParams params = cfg_.ransac;
          params.seed = derive_seed(cfg_.seed, "compensate/" + video.video_id);
          const CompensationResult result =
              compensate_sequence(flows, params, cfg_.ransac_grid_step, 1);
          json records = json::array();
          for (int f = 0; f < pairs; ++f) {
            write_flo(staging / (frame_name("comp", f) + ".flo"), result.flows[f]);
            records.push_back({{"h", homography_to_json(result.records[f].H)},
                               {"inlier_fraction", result.records[f].inlier_fraction},
                               {"fallback_identity", result.records[f].fallback_identity}});
          }
          write_json_file(staging / "records.json",
                          {{"video_id", video.video_id}, {"frames", std::move(records)}});
        });
    paths[i] = entry.string();
    for (const auto& rec : read_json_file(entry / "records.json").at("frames")) {
      if (rec.at("fallback_identity").get<bool>()) fallbacks[i]++;
    }
  });

  json artifacts = json::object();
  std::uint64_t total_fallbacks = 0;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    artifacts[ds.videos[i].video_id] = paths[i];
    total_fallbacks += fallbacks[i];
  }
  json report = {{"videos", ds.videos.size()},
                 {"fallback_identity_frames", total_fallbacks},
                 {"artifacts", std::move(artifacts)}};
  return finish_stage("compensate", std::move(report), before, seconds_since(start));
}

DatasetStats Pipeline::load_stats(const std::string& held_out, const std::string& stream) {
  const fs::path entry =
      require_entry(stats_key(held_out, stream), "stats",
                    "normalization stats for held-out subject " + held_out + " (" + stream + ")");
  const json j = read_json_file(entry / "stats.json");
  DatasetStats stats;
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.variance = j.at("variance").get<std::vector<double>>();
  return stats;
}

json Pipeline::run_stats() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const std::vector<std::string> subjects = dataset().subjects();
  if (subjects.size() < 2) throw std::runtime_error("need at least 2 subjects for LOSO folds");

  struct Task {
    std::string held_out;
    std::string stream;
  };
  std::vector<Task> tasks;
  for (const auto& held_out : subjects) {
    for (const char* stream : kStreams) tasks.push_back({held_out, stream});
  }
  std::vector<std::string> paths(tasks.size());

  parallel_for(tasks.size(), opt_.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const auto train_videos = fold_videos(task.held_out, false);
    // Dependency and key checks happen before get_or_fill so a missing
    // compensate entry surfaces as such even on a warm cache.
    std::vector<fs::path> comp_entries;
    if (task.stream == "flow") {
      for (const VideoRecord* v : train_videos) {
        comp_entries.push_back(require_entry(compensate_key(*v), "compensate",
                                             "compensated flow for video " + v->video_id));
      }
    }
    const fs::path entry =
        store_.get_or_fill(stats_key(task.held_out, task.stream), [&](const fs::path& staging) {
          StatsAccumulator acc(3);
          for (std::size_t vi = 0; vi < train_videos.size(); ++vi) {
            const VideoRecord* v = train_videos[vi];
            if (task.stream == "rgb") {
              for (std::size_t f = 0; f < v->frame_paths.size(); ++f) {
                acc.add(load_frame(*v, static_cast<int>(f)));
              }
            } else {
              const int pairs = static_cast<int>(v->frame_paths.size()) - 1;
              for (const FlowField& flow : load_flow_entry(comp_entries[vi], pairs, "comp")) {
                acc.add(flow_to_color(flow, static_cast<float>(cfg_.flow_color_max)));
              }
            }
          }
          const DatasetStats stats = acc.finalize();
          write_json_file(staging / "stats.json", {{"mean", stats.mean},
                                                   {"variance", stats.variance},
                                                   {"count", acc.count()}});
        });
    paths[i] = entry.string();
  });

  json artifacts = json::object();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    artifacts[tasks[i].held_out + "/" + tasks[i].stream] = paths[i];
  }
  json report = {{"folds", subjects.size()}, {"artifacts", std::move(artifacts)}};
  return finish_stage("stats", std::move(report), before, seconds_since(start));
}

// Loads one stream's per-video source images at dataset resolution: decoded
// frames for rgb, fixed-scale flow-color renders of compensated flow for the
// flow stream (one fewer image than frames).
struct Pipeline::StreamSources {
  Pipeline& p;
  std::string stream;

  std::vector<Image> images(const VideoRecord& video) const {
    std::vector<Image> out;
    if (stream == "rgb") {
      out.reserve(video.frame_paths.size());
      for (std::size_t f = 0; f < video.frame_paths.size(); ++f) {
        out.push_back(p.load_frame(video, static_cast<int>(f)));
      }
    } else {
      const int pairs = static_cast<int>(video.frame_paths.size()) - 1;
      const fs::path entry = p.require_entry(p.compensate_key(video), "compensate",
                                             "compensated flow for video " + video.video_id);
      out.reserve(pairs);
      for (const FlowField& flow : p.load_flow_entry(entry, pairs, "comp")) {
        out.push_back(flow_to_color(flow, static_cast<float>(p.cfg_.flow_color_max)));
      }
    }
    return out;
  }
};

json Pipeline::run_preprocess() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const std::vector<std::string> subjects = dataset().subjects();

  struct Task {
    std::string held_out;
    std::string stream;
    const VideoRecord* video = nullptr;
  };
  std::vector<Task> tasks;
  for (const auto& held_out : subjects) {
    for (const char* stream : kStreams) {
      for (const VideoRecord* v : fold_videos(held_out, true)) {
        tasks.push_back({held_out, stream, v});
      }
    }
  }
  std::vector<std::string> paths(tasks.size());

  parallel_for(tasks.size(), opt_.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const DatasetStats stats = load_stats(task.held_out, task.stream);
    const std::string key = preprocess_key(task.held_out, task.stream, *task.video);
    const fs::path entry = store_.get_or_fill(key, [&](const fs::path& staging) {
      const std::vector<Image> sources = StreamSources{*this, task.stream}.images(*task.video);
      const int count = static_cast<int>(sources.size());
      const int r = cfg_.crop.resize_to;
      Tensor<float> stack({count, 3, r, r});
      Rng rng(0);  // unused: eval mode takes the exact center crop
      const std::size_t frame_size = static_cast<std::size_t>(3) * r * r;
      for (int f = 0; f < count; ++f) {
        const Image prepped =
            preprocess_frame(sources[f], cfg_.crop, stats, PreprocessMode::kEval, rng);
        std::copy(prepped.data.begin(), prepped.data.end(),
                  stack.data.begin() + static_cast<std::ptrdiff_t>(frame_size * f));
      }
      write_tensor(staging / "frames.bin", stack,
                   {{"video_id", task.video->video_id},
                    {"stream", task.stream},
                    {"stats", stats.content_hash()}});
    });
    paths[i] = entry.string();
  });

  json artifacts = json::object();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    artifacts[tasks[i].held_out + "/" + tasks[i].stream + "/" + tasks[i].video->video_id] =
        paths[i];
  }
  json report = {{"tensors", tasks.size()}, {"artifacts", std::move(artifacts)}};
  return finish_stage("preprocess", std::move(report), before, seconds_since(start));
}

json Pipeline::run_train() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const DatasetManifest& ds = dataset();
  const std::vector<std::string> subjects = ds.subjects();
  if (subjects.size() < 2) throw std::runtime_error("need at least 2 subjects for LOSO folds");

  struct Task {
    std::string held_out;
    std::string stream;
  };
  std::vector<Task> tasks;
  for (const auto& held_out : subjects) {
    for (const char* stream : kStreams) tasks.push_back({held_out, stream});
  }
  std::vector<std::string> paths(tasks.size());

  parallel_for(tasks.size(), opt_.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::string key = train_key(task.held_out, task.stream);
    const fs::path entry = store_.get_or_fill(key, [&](const fs::path& staging) {
      StreamDataset data;
      data.stream_name = task.stream;
      data.label_names = ds.label_map.names;
      data.crop = cfg_.crop;
      data.stats = load_stats(task.held_out, task.stream);
      const StreamSources sources{*this, task.stream};
      for (const VideoRecord* v : fold_videos(task.held_out, false)) {
        TrainVideo tv;
        tv.video_id = v->video_id;
        tv.subject = v->subject;
        for (Image& img : sources.images(*v)) {
          tv.frames.push_back(
              central_crop(img, cfg_.crop.central_width, cfg_.crop.central_height));
        }
        tv.labels.assign(v->frame_labels.begin(),
                         v->frame_labels.begin() + static_cast<std::ptrdiff_t>(tv.frames.size()));
        data.videos.push_back(std::move(tv));
      }

      TrainStreamOptions topt;
      topt.encoder = cfg_.encoder_config();
      topt.window = cfg_.model.window;
      topt.hidden_dim = cfg_.model.hidden_dim;
      const StreamSchedules& schedules =
          task.stream == "rgb" ? cfg_.train.rgb : cfg_.train.flow;
      topt.encoder_cfg = schedules.encoder;
      topt.lstm_cfg = schedules.lstm;
      topt.split_noise_std = cfg_.train.split_noise_std;
      topt.val_cadence = cfg_.train.val_cadence;
      topt.seed = derive_seed(cfg_.seed, "train/" + task.held_out + "/" + task.stream);
      if (cfg_.train.curriculum.enabled_for(task.stream)) {
        CurriculumSchedule schedule;
        schedule.phase1_iterations = cfg_.train.curriculum.phase1_iterations;
        schedule.phase2_iterations = cfg_.train.curriculum.phase2_iterations;
        for (const auto& pair : cfg_.train.curriculum.pairs) {
          const int a = ds.label_map.index_of(pair[0]);
          const int b = ds.label_map.index_of(pair[1]);
          if (a < 0 || b < 0) {
            throw std::runtime_error("curriculum class \"" + (a < 0 ? pair[0] : pair[1]) +
                                     "\" is not in the dataset's label map");
          }
          schedule.merge_pairs.emplace_back(a, b);
        }
        topt.curriculum = schedule;
      }

      TrainResult result = train_stream(data, topt);

      double final_val = -1.0;
      std::ofstream log(staging / "log.jsonl");
      if (!log) throw std::runtime_error("cannot write training log");
      for (const TrainLogRow& row : result.log) {
        json r = {{"stage", row.stage}, {"phase", row.phase},     {"iter", row.iteration},
                  {"lr", row.lr},       {"loss", row.loss}};
        if (row.val_accuracy >= 0) {
          r["val_accuracy"] = row.val_accuracy;
          final_val = row.val_accuracy;
        }
        log << r.dump() << "\n";
      }

      json meta = {{"stream", task.stream},
                   {"held_out_subject", task.held_out},
                   {"labels", ds.label_map.names},
                   {"window", cfg_.model.window},
                   {"hidden_dim", cfg_.model.hidden_dim},
                   {"feature_dim", cfg_.model.feature_dim},
                   {"input_size", cfg_.crop.resize_to}};
      if (final_val >= 0) meta["final_val_accuracy"] = final_val;
      save_checkpoint(staging / "checkpoint", snapshot(result.model, std::move(meta)));
    });
    paths[i] = entry.string();
  });

  json artifacts = json::object();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    artifacts[tasks[i].held_out + "/" + tasks[i].stream] =
        (fs::path(paths[i]) / "checkpoint").string();
  }
  json report = {{"folds", subjects.size()}, {"artifacts", std::move(artifacts)}};
  return finish_stage("train", std::move(report), before, seconds_since(start));
}

namespace {

SpliceClassifier<float> restore_stream_model(const fs::path& checkpoint_dir,
                                             const PipelineConfig& cfg, int num_classes) {
  SpliceClassifier<float> model;
  model.encoder_cfg = cfg.encoder_config();
  model.window = cfg.model.window;
  model.num_classes = num_classes;
  model.hidden_dim = cfg.model.hidden_dim;
  model.allocate();
  restore(model, load_checkpoint(checkpoint_dir));
  return model;
}

}  // namespace

json Pipeline::run_eval() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const DatasetManifest& ds = dataset();
  const std::vector<std::string> subjects = ds.subjects();
  if (subjects.size() < 2) throw std::runtime_error("need at least 2 subjects for LOSO folds");
  const int L = ds.label_map.size();

  std::vector<SplitResult> splits(subjects.size());
  std::vector<std::exception_ptr> errors(subjects.size());

  parallel_for(subjects.size(), opt_.jobs, [&](std::size_t i) {
    const std::string& held_out = subjects[i];
    SplitResult& split = splits[i];
    split.held_out_subject = held_out;
    try {
      const std::string key = eval_key(held_out);
      const fs::path entry = store_.get_or_fill(key, [&](const fs::path& staging) {
        const fs::path rgb_ckpt =
            *store_.lookup(train_key(held_out, "rgb")) / "checkpoint";
        const fs::path flow_ckpt =
            *store_.lookup(train_key(held_out, "flow")) / "checkpoint";
        const SpliceClassifier<float> rgb = restore_stream_model(rgb_ckpt, cfg_, L);
        const SpliceClassifier<float> flow = restore_stream_model(flow_ckpt, cfg_, L);

        ConfusionMatrix combined(ds.label_map.names), rgb_conf(ds.label_map.names),
            flow_conf(ds.label_map.names);
        for (const VideoRecord* video : fold_videos(held_out, true)) {
          const fs::path rgb_pre =
              *store_.lookup(preprocess_key(held_out, "rgb", *video)) / "frames.bin";
          const fs::path flow_pre =
              *store_.lookup(preprocess_key(held_out, "flow", *video)) / "frames.bin";
          const Tensor<float> rgb_stack = read_tensor(rgb_pre).tensor;
          const Tensor<float> flow_stack = read_tensor(flow_pre).tensor;
          // The last frame has no flow successor, so both streams score the
          // first T-1 frames and every scored frame has both posteriors.
          const int frames = std::min(rgb_stack.shape[0], flow_stack.shape[0]);
          if (frames < 1) continue;

          std::vector<Tensor<float>> rgb_features(frames), flow_features(frames);
          for (int f = 0; f < frames; ++f) {
            rgb_features[f] = encoder_forward(rgb.encoder, frame_slice(rgb_stack, f));
            flow_features[f] = encoder_forward(flow.encoder, frame_slice(flow_stack, f));
          }

          std::map<int, std::array<int, 3>> tile_votes;  // start frame -> (rgb, flow, fused)
          const auto tile_vote = [&](const std::vector<int>& indices) -> std::array<int, 3> {
            const auto found = tile_votes.find(indices.front());
            if (found != tile_votes.end()) return found->second;
            std::vector<Tensor<float>> r_in, f_in;
            for (int f : indices) {
              r_in.push_back(rgb_features[f]);
              f_in.push_back(flow_features[f]);
            }
            const StreamOutput<float> r_out = forward_splice(rgb, r_in, true);
            const StreamOutput<float> f_out = forward_splice(flow, f_in, true);
            const Tensor<float> fused =
                fuse_streams(r_out.fused, f_out.fused, cfg_.model.fusion,
                             static_cast<float>(cfg_.model.fusion_lambda));
            const std::array<int, 3> votes = {
                argmax_lowest(r_out.fused.data.data(), L),
                argmax_lowest(f_out.fused.data.data(), L),
                argmax_lowest(fused.data.data(), L)};
            tile_votes[indices.front()] = votes;
            return votes;
          };
          const auto preds_for = [&](int which) {
            return predict_frames(frames, cfg_.model.window, [&](const std::vector<int>& idx) {
              return tile_vote(idx)[which];
            });
          };
          const std::vector<int> rgb_preds = preds_for(0);
          const std::vector<int> flow_preds = preds_for(1);
          const std::vector<int> fused_preds = preds_for(2);
          const std::vector<int> gt(video->frame_labels.begin(),
                                    video->frame_labels.begin() + frames);
          rgb_conf.merge(score(rgb_preds, gt, ds.label_map.names));
          flow_conf.merge(score(flow_preds, gt, ds.label_map.names));
          combined.merge(score(fused_preds, gt, ds.label_map.names));
        }
        write_json_file(staging / "split.json",
                        {{"held_out_subject", held_out},
                         {"combined", confusion_to_json(combined)},
                         {"rgb", confusion_to_json(rgb_conf)},
                         {"flow", confusion_to_json(flow_conf)}});
      });
      const json j = read_json_file(entry / "split.json");
      split.combined = confusion_from_json(j.at("combined"));
      split.rgb = confusion_from_json(j.at("rgb"));
      split.flow = confusion_from_json(j.at("flow"));
    } catch (const std::exception& e) {
      split.failed = true;
      split.error = e.what();
      errors[i] = std::current_exception();
    }
  });

  bool any_success = false;
  for (const auto& split : splits) any_success |= !split.failed;
  if (!any_success) {
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
    throw std::runtime_error("evaluation produced no splits");
  }

  const EvalReport report =
      aggregate_report(ds.name, ds.label_map.names, splits, ds.label_origins);
  const json report_json = report_to_json(report);
  write_json_file(run_dir_ / "eval" / "report.json", report_json);
  const struct {
    const char* name;
    const ConfusionMatrix* m;
  } outputs[] = {{"combined", &report.combined.confusion},
                 {"rgb", &report.rgb.confusion},
                 {"flow", &report.flow.confusion}};
  for (const auto& out : outputs) {
    write_confusion_csv(run_dir_ / "eval" / ("confusion_" + std::string(out.name) + ".csv"),
                        *out.m);
    write_pgm(run_dir_ / "eval" / ("confusion_" + std::string(out.name) + ".pgm"),
              render_confusion_heatmap(*out.m));
  }

  json stage_report = {{"report_path", (run_dir_ / "eval" / "report.json").string()},
                       {"report", report_json}};
  return finish_stage("eval", std::move(stage_report), before, seconds_since(start));
}

json Pipeline::run_gradcam() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const DatasetManifest& ds = dataset();
  const std::string held_out = ds.subjects().front();
  const int L = ds.label_map.size();

  const fs::path rgb_entry =
      require_entry(train_key(held_out, "rgb"), "train",
                    "trained rgb checkpoint for held-out subject " + held_out);
  SpliceClassifier<float> model = restore_stream_model(rgb_entry / "checkpoint", cfg_, L);
  const DatasetStats stats = load_stats(held_out, "rgb");

  const auto test_videos = fold_videos(held_out, true);
  if (test_videos.empty()) throw std::runtime_error("no held-out videos for " + held_out);
  const VideoRecord& video = *test_videos.front();
  const int frames = static_cast<int>(video.frame_paths.size()) - 1;

  std::vector<Tensor<float>> inputs(frames);
  Rng rng(0);  // eval mode: no randomness drawn
  for (int f = 0; f < frames; ++f) {
    inputs[f] = image_to_tensor(
        preprocess_frame(load_frame(video, f), cfg_.crop, stats, PreprocessMode::kEval, rng));
  }

  const fs::path out_dir = run_dir_ / "gradcam";
  fs::create_directories(out_dir);
  json index = json::array();
  std::set<int> seen_starts;
  predict_frames(frames, cfg_.model.window, [&](const std::vector<int>& indices) {
    std::vector<Tensor<float>> tile;
    for (int f : indices) tile.push_back(inputs[f]);
    const StreamOutput<float> out = forward_splice(model, tile, false);
    const int predicted = argmax_lowest(out.fused.data.data(), L);
    if (seen_starts.insert(indices.front()).second) {
      const int step = cfg_.model.window / 2;
      const Tensor<float> heat = grad_cam(model, tile, step, predicted);
      const int tile_index = static_cast<int>(seen_starts.size()) - 1;
      const std::string base = frame_name("tile", tile_index);
      const Image up = resize_bilinear(gray_to_image(heatmap_to_image(heat)),
                                       cfg_.crop.resize_to, cfg_.crop.resize_to);
      GrayImage up_gray(up.width, up.height);
      up_gray.data = up.data;
      write_pgm(out_dir / (base + ".pgm"), up_gray);
      write_tensor(out_dir / (base + ".bin"), heat, {{"video_id", video.video_id}});
      index.push_back({{"tile", tile_index},
                       {"start_frame", indices.front()},
                       {"center_frame", indices[step]},
                       {"predicted", ds.label_map.names[predicted]},
                       {"label", ds.label_map.names[video.frame_labels[indices[step]]]},
                       {"heatmap", base + ".pgm"},
                       {"raw", base + ".bin"}});
    }
    return predicted;
  });
  write_json_file(out_dir / "index.json",
                  {{"video_id", video.video_id}, {"held_out_subject", held_out},
                   {"stream", "rgb"}, {"tiles", std::move(index)}});

  json report = {{"video_id", video.video_id},
                 {"tiles", seen_starts.size()},
                 {"output_dir", out_dir.string()}};
  return finish_stage("gradcam", std::move(report), before, seconds_since(start));
}

json Pipeline::run_report() {
  const auto start = std::chrono::steady_clock::now();
  const CacheMark before = mark();
  const fs::path eval_path = run_dir_ / "eval" / "report.json";
  if (!fs::exists(eval_path)) {
    throw DependencyError("eval", "no evaluation report in " + (run_dir_ / "eval").string() +
                                      "; run eval first");
  }

  json stages = json::object();
  const fs::path stages_dir = run_dir_ / "stages";
  if (fs::exists(stages_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(stages_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      if (file.stem() == "report") continue;  // never embed a previous self
      stages[file.stem().string()] = read_json_file(file);
    }
  }

  json out = {{"config_hash", cfg_.content_hash()},
              {"config", cfg_.to_json()},
              {"stages", std::move(stages)},
              {"eval", read_json_file(eval_path)}};
  write_json_file(run_dir_ / "report.json", out);
  json report = {{"report_path", (run_dir_ / "report.json").string()}};
  return finish_stage("report", std::move(report), before, seconds_since(start));
}

}  // namespace egoact
