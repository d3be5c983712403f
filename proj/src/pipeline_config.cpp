#include "egoact/pipeline_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "egoact/hash.hpp"

namespace egoact {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::runtime_error("config: " + (path.empty() ? msg : path + ": " + msg));
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(join(path, it.key()), "unknown key");
  }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(join(path, key), std::string("bad value: ") + e.what());
  }
}

void read_schedule(const json& obj, const std::string& path, TrainingConfig& cfg) {
  check_keys(obj, path,
             {"base_lr", "momentum", "lr_decay_factor", "lr_step", "max_iterations",
              "weight_decay", "batch_size", "clip_norm"});
  read(obj, path, "base_lr", cfg.base_lr);
  read(obj, path, "momentum", cfg.momentum);
  read(obj, path, "lr_decay_factor", cfg.lr_decay_factor);
  read(obj, path, "lr_step", cfg.lr_step);
  read(obj, path, "max_iterations", cfg.max_iterations);
  read(obj, path, "weight_decay", cfg.weight_decay);
  read(obj, path, "batch_size", cfg.batch_size);
  read(obj, path, "clip_norm", cfg.clip_norm);
}

SynthConfig parse_synth(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"width", "height", "subjects", "videos_per_subject", "frames_per_video",
              "object_half", "object_margin", "orbit_radius", "orbit_step", "head_translation",
              "head_rotation", "head_log_scale", "head_perspective", "classes"});
  SynthConfig cfg = default_synth_config();
  read(obj, path, "width", cfg.width);
  read(obj, path, "height", cfg.height);
  read(obj, path, "subjects", cfg.num_subjects);
  read(obj, path, "videos_per_subject", cfg.videos_per_subject);
  read(obj, path, "frames_per_video", cfg.frames_per_video);
  read(obj, path, "object_half", cfg.object_half);
  read(obj, path, "object_margin", cfg.object_margin);
  read(obj, path, "orbit_radius", cfg.orbit_radius);
  read(obj, path, "orbit_step", cfg.orbit_step);
  read(obj, path, "head_translation", cfg.head_translation);
  read(obj, path, "head_rotation", cfg.head_rotation);
  read(obj, path, "head_log_scale", cfg.head_log_scale);
  read(obj, path, "head_perspective", cfg.head_perspective);

  if (obj.contains("classes")) {
    const json& classes = obj.at("classes");
    if (!classes.is_array()) fail(join(path, "classes"), "expected an array");
    cfg.classes.clear();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const std::string cpath = join(path, "classes[" + std::to_string(i) + "]");
      const json& entry = classes[i];
      check_keys(entry, cpath, {"name", "shape", "color", "motion", "velocity", "head_scale"});
      ClassSpec spec;
      read(entry, cpath, "name", spec.name);
      if (spec.name.empty()) fail(cpath, "class needs a name");
      try {
        spec.shape = parse_shape(entry.value("shape", "none"));
        spec.motion = parse_motion(entry.value("motion", "static"));
      } catch (const std::invalid_argument& e) {
        fail(cpath, e.what());
      }
      if (entry.contains("color")) {
        auto color = entry.at("color").get<std::vector<double>>();
        if (color.size() != 3) fail(join(cpath, "color"), "expected 3 components");
        for (int c = 0; c < 3; ++c) spec.color[c] = color[c];
      }
      if (entry.contains("velocity")) {
        auto v = entry.at("velocity").get<std::vector<double>>();
        if (v.size() != 2) fail(join(cpath, "velocity"), "expected [vx, vy]");
        spec.velocity_x = v[0];
        spec.velocity_y = v[1];
      }
      read(entry, cpath, "head_scale", spec.head_scale);
      cfg.classes.push_back(std::move(spec));
    }
  }
  return cfg;
}

json class_to_json(const ClassSpec& spec) {
  return {{"name", spec.name},
          {"shape", to_string(spec.shape)},
          {"color", {spec.color[0], spec.color[1], spec.color[2]}},
          {"motion", to_string(spec.motion)},
          {"velocity", {spec.velocity_x, spec.velocity_y}},
          {"head_scale", spec.head_scale}};
}

}  // namespace

bool CurriculumSection::enabled_for(const std::string& stream) const {
  if (pairs.empty() || phase1_iterations <= 0) return false;
  for (const auto& s : streams) {
    if (s == stream) return true;
  }
  return false;
}

EncoderConfig PipelineConfig::encoder_config() const {
  EncoderConfig cfg;
  cfg.input_channels = 3;
  cfg.input_size = crop.resize_to;
  cfg.blocks = model.blocks;
  cfg.feature_dim = model.feature_dim;
  return cfg;
}

PipelineConfig parse_pipeline_config(const json& j) {
  check_keys(j, "",
             {"name", "seed", "data", "crop", "flow", "ransac", "flow_color_max", "model",
              "train", "output_root", "cache_root"});
  PipelineConfig cfg;
  read(j, "", "name", cfg.name);
  if (!j.contains("seed")) fail("seed", "required key is missing");
  read(j, "", "seed", cfg.seed);
  read(j, "", "output_root", cfg.output_root);
  read(j, "", "cache_root", cfg.cache_root);
  read(j, "", "flow_color_max", cfg.flow_color_max);

  if (j.contains("data")) {
    const json& data = j.at("data");
    check_keys(data, "data", {"synth", "manifests"});
    if (data.contains("synth")) cfg.data.synth = parse_synth(data.at("synth"), "data.synth");
    read(data, "data", "manifests", cfg.data.manifests);
  }

  if (j.contains("crop")) {
    const json& crop = j.at("crop");
    check_keys(crop, "crop", {"central_width", "central_height", "crop_size", "resize_to"});
    read(crop, "crop", "central_width", cfg.crop.central_width);
    read(crop, "crop", "central_height", cfg.crop.central_height);
    read(crop, "crop", "crop_size", cfg.crop.crop_size);
    read(crop, "crop", "resize_to", cfg.crop.resize_to);
  }

  if (j.contains("flow")) {
    const json& flow = j.at("flow");
    check_keys(flow, "flow",
               {"alpha", "pyramid_factor", "min_level_size", "warps_per_level",
                "solver_iterations", "convergence_tol"});
    read(flow, "flow", "alpha", cfg.flow.alpha);
    read(flow, "flow", "pyramid_factor", cfg.flow.pyramid_factor);
    read(flow, "flow", "min_level_size", cfg.flow.min_level_size);
    read(flow, "flow", "warps_per_level", cfg.flow.warps_per_level);
    read(flow, "flow", "solver_iterations", cfg.flow.solver_iterations);
    read(flow, "flow", "convergence_tol", cfg.flow.convergence_tol);
  }

  if (j.contains("ransac")) {
    const json& ransac = j.at("ransac");
    check_keys(ransac, "ransac",
               {"iterations", "inlier_threshold", "min_inlier_fraction", "grid_step"});
    read(ransac, "ransac", "iterations", cfg.ransac.iterations);
    read(ransac, "ransac", "inlier_threshold", cfg.ransac.inlier_threshold);
    read(ransac, "ransac", "min_inlier_fraction", cfg.ransac.min_inlier_fraction);
    read(ransac, "ransac", "grid_step", cfg.ransac_grid_step);
  }

  if (j.contains("model")) {
    const json& model = j.at("model");
    check_keys(model, "model",
               {"window", "hidden_dim", "feature_dim", "blocks", "fusion", "fusion_lambda"});
    read(model, "model", "window", cfg.model.window);
    read(model, "model", "hidden_dim", cfg.model.hidden_dim);
    read(model, "model", "feature_dim", cfg.model.feature_dim);
    read(model, "model", "fusion_lambda", cfg.model.fusion_lambda);
    if (model.contains("fusion")) {
      const std::string mode = model.at("fusion").get<std::string>();
      if (mode == "mean") {
        cfg.model.fusion = FusionMode::kMean;
      } else if (mode == "weighted") {
        cfg.model.fusion = FusionMode::kWeighted;
      } else {
        fail("model.fusion", "expected \"mean\" or \"weighted\", got \"" + mode + "\"");
      }
    }
    if (model.contains("blocks")) {
      const json& blocks = model.at("blocks");
      if (!blocks.is_array() || blocks.empty()) fail("model.blocks", "expected a non-empty array");
      cfg.model.blocks.clear();
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string bpath = "model.blocks[" + std::to_string(i) + "]";
        check_keys(blocks[i], bpath, {"channels", "kernel", "stride", "pool"});
        ConvBlockSpec spec;
        read(blocks[i], bpath, "channels", spec.out_channels);
        read(blocks[i], bpath, "kernel", spec.kernel);
        read(blocks[i], bpath, "stride", spec.stride);
        read(blocks[i], bpath, "pool", spec.pool);
        cfg.model.blocks.push_back(spec);
      }
    }
  }

  // Sequence-stage defaults differ from the frame stage: longer decay step
  // and gradient clipping.
  cfg.train.rgb.lstm.lr_step = 500;
  cfg.train.rgb.lstm.clip_norm = 5.0;
  cfg.train.flow.lstm.lr_step = 500;
  cfg.train.flow.lstm.clip_norm = 5.0;

  if (j.contains("train")) {
    const json& train = j.at("train");
    check_keys(train, "train",
               {"encoder", "lstm", "rgb", "flow", "curriculum", "val_cadence",
                "split_noise_std"});
    // Shared schedules first, then per-stream overrides on top.
    if (train.contains("encoder")) {
      read_schedule(train.at("encoder"), "train.encoder", cfg.train.rgb.encoder);
      read_schedule(train.at("encoder"), "train.encoder", cfg.train.flow.encoder);
    }
    if (train.contains("lstm")) {
      read_schedule(train.at("lstm"), "train.lstm", cfg.train.rgb.lstm);
      read_schedule(train.at("lstm"), "train.lstm", cfg.train.flow.lstm);
    }
    for (const auto& [stream, schedules] :
         {std::pair<const char*, StreamSchedules*>{"rgb", &cfg.train.rgb},
          {"flow", &cfg.train.flow}}) {
      if (!train.contains(stream)) continue;
      const json& obj = train.at(stream);
      const std::string path = std::string("train.") + stream;
      check_keys(obj, path, {"encoder", "lstm"});
      if (obj.contains("encoder")) {
        read_schedule(obj.at("encoder"), path + ".encoder", schedules->encoder);
      }
      if (obj.contains("lstm")) read_schedule(obj.at("lstm"), path + ".lstm", schedules->lstm);
    }
    if (train.contains("curriculum")) {
      const json& cur = train.at("curriculum");
      check_keys(cur, "train.curriculum",
                 {"pairs", "phase1_iterations", "phase2_iterations", "streams"});
      if (cur.contains("pairs")) {
        const json& pairs = cur.at("pairs");
        if (!pairs.is_array()) fail("train.curriculum.pairs", "expected an array of pairs");
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          auto pair = pairs[i].get<std::vector<std::string>>();
          if (pair.size() != 2) {
            fail("train.curriculum.pairs[" + std::to_string(i) + "]",
                 "expected exactly two class names");
          }
          cfg.train.curriculum.pairs.push_back({pair[0], pair[1]});
        }
      }
      read(cur, "train.curriculum", "phase1_iterations", cfg.train.curriculum.phase1_iterations);
      read(cur, "train.curriculum", "phase2_iterations", cfg.train.curriculum.phase2_iterations);
      read(cur, "train.curriculum", "streams", cfg.train.curriculum.streams);
    }
    read(train, "train", "val_cadence", cfg.train.val_cadence);
    read(train, "train", "split_noise_std", cfg.train.split_noise_std);
  }

  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j);
}

void PipelineConfig::validate() const {
  if (name.empty()) throw std::runtime_error("config: name must not be empty");
  if (output_root.empty()) throw std::runtime_error("config: output_root must not be empty");
  const bool has_synth = data.synth.has_value();
  const bool has_manifests = !data.manifests.empty();
  if (has_synth == has_manifests) {
    throw std::runtime_error("config: data needs exactly one of synth or manifests");
  }
  try {
    if (has_synth) data.synth->validate();
    crop.validate();
    flow.validate();
    ransac.validate();
    train.rgb.encoder.validate();
    train.rgb.lstm.validate();
    train.flow.encoder.validate();
    train.flow.lstm.validate();
    encoder_config().validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  if (ransac_grid_step < 1) throw std::runtime_error("config: ransac.grid_step must be >= 1");
  if (flow_color_max <= 0) throw std::runtime_error("config: flow_color_max must be positive");
  if (model.window < 1 || model.window % 2 == 0) {
    throw std::runtime_error("config: model.window must be a positive odd number");
  }
  if (model.hidden_dim < 1) throw std::runtime_error("config: model.hidden_dim must be >= 1");
  if (model.fusion_lambda < 0 || model.fusion_lambda > 1) {
    throw std::runtime_error("config: model.fusion_lambda must be in [0, 1]");
  }
  const auto& cur = train.curriculum;
  if (cur.phase1_iterations < 0 || cur.phase2_iterations < 0) {
    throw std::runtime_error("config: curriculum phase iterations must be >= 0");
  }
  for (const auto& stream : cur.streams) {
    if (stream != "rgb" && stream != "flow") {
      throw std::runtime_error("config: curriculum stream must be \"rgb\" or \"flow\", got \"" +
                               stream + "\"");
    }
  }
  for (const auto& [stream, schedules] :
       {std::pair<std::string, const StreamSchedules*>{"rgb", &train.rgb},
        {"flow", &train.flow}}) {
    if (cur.enabled_for(stream) &&
        cur.phase1_iterations + cur.phase2_iterations != schedules->lstm.max_iterations) {
      throw std::runtime_error(
          "config: curriculum phase1+phase2 iterations must equal train." + stream +
          ".lstm.max_iterations");
    }
  }
  if (train.val_cadence < 0) throw std::runtime_error("config: val_cadence must be >= 0");
  if (train.split_noise_std < 0) {
    throw std::runtime_error("config: split_noise_std must be >= 0");
  }
}

json to_json(const FlowParams& p) {
  return {{"alpha", p.alpha},
          {"pyramid_factor", p.pyramid_factor},
          {"min_level_size", p.min_level_size},
          {"warps_per_level", p.warps_per_level},
          {"solver_iterations", p.solver_iterations},
          {"convergence_tol", p.convergence_tol}};
}

json to_json(const RansacParams& p) {
  return {{"iterations", p.iterations},
          {"inlier_threshold", p.inlier_threshold},
          {"min_inlier_fraction", p.min_inlier_fraction}};
}

json to_json(const CropConfig& c) {
  return {{"central_width", c.central_width},
          {"central_height", c.central_height},
          {"crop_size", c.crop_size},
          {"resize_to", c.resize_to}};
}

json to_json(const TrainingConfig& c) {
  return {{"base_lr", c.base_lr},
          {"momentum", c.momentum},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_step", c.lr_step},
          {"max_iterations", c.max_iterations},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"clip_norm", c.clip_norm}};
}

json to_json(const SynthConfig& c) {
  json classes = json::array();
  for (const auto& spec : c.classes) classes.push_back(class_to_json(spec));
  return {{"width", c.width},
          {"height", c.height},
          {"subjects", c.num_subjects},
          {"videos_per_subject", c.videos_per_subject},
          {"frames_per_video", c.frames_per_video},
          {"object_half", c.object_half},
          {"object_margin", c.object_margin},
          {"orbit_radius", c.orbit_radius},
          {"orbit_step", c.orbit_step},
          {"head_translation", c.head_translation},
          {"head_rotation", c.head_rotation},
          {"head_log_scale", c.head_log_scale},
          {"head_perspective", c.head_perspective},
          {"classes", std::move(classes)}};
}

json to_json(const ModelSection& m) {
  json blocks = json::array();
  for (const auto& b : m.blocks) {
    blocks.push_back({{"channels", b.out_channels},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"pool", b.pool}});
  }
  return {{"window", m.window},
          {"hidden_dim", m.hidden_dim},
          {"feature_dim", m.feature_dim},
          {"blocks", std::move(blocks)},
          {"fusion", m.fusion == FusionMode::kMean ? "mean" : "weighted"},
          {"fusion_lambda", m.fusion_lambda}};
}

json PipelineConfig::to_json() const {
  json data_json;
  if (data.synth.has_value()) {
    data_json = {{"synth", egoact::to_json(*data.synth)}};
  } else {
    data_json = {{"manifests", data.manifests}};
  }
  json train_json = {
      {"rgb",
       {{"encoder", egoact::to_json(train.rgb.encoder)},
        {"lstm", egoact::to_json(train.rgb.lstm)}}},
      {"flow",
       {{"encoder", egoact::to_json(train.flow.encoder)},
        {"lstm", egoact::to_json(train.flow.lstm)}}},
      {"val_cadence", train.val_cadence},
      {"split_noise_std", train.split_noise_std}};
  if (!train.curriculum.pairs.empty()) {
    json pairs = json::array();
    for (const auto& pair : train.curriculum.pairs) pairs.push_back({pair[0], pair[1]});
    train_json["curriculum"] = {{"pairs", std::move(pairs)},
                                {"phase1_iterations", train.curriculum.phase1_iterations},
                                {"phase2_iterations", train.curriculum.phase2_iterations},
                                {"streams", train.curriculum.streams}};
  }
  json ransac_json = egoact::to_json(ransac);
  ransac_json["grid_step"] = ransac_grid_step;
  return {{"name", name},
          {"seed", seed},
          {"data", std::move(data_json)},
          {"crop", egoact::to_json(crop)},
          {"flow", egoact::to_json(flow)},
          {"ransac", std::move(ransac_json)},
          {"flow_color_max", flow_color_max},
          {"model", egoact::to_json(model)},
          {"train", std::move(train_json)},
          {"output_root", output_root},
          {"cache_root", cache_root}};
}

std::string PipelineConfig::content_hash() const { return sha256_hex(to_json().dump()); }

}  // namespace egoact
