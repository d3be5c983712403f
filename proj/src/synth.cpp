#include "egoact/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "egoact/flow_io.hpp"
#include "egoact/homography.hpp"
#include "egoact/image.hpp"
#include "egoact/rng.hpp"

namespace egoact {
namespace {

using nlohmann::json;

struct Wave {
  double kx = 0.0, ky = 0.0, phase = 0.0, amp = 0.0;
};

// Three plane waves per channel; evaluated analytically at warped world
// coordinates, so frames and ground-truth flow agree exactly.
struct Background {
  std::array<std::array<Wave, 3>, 3> waves;

  float value(int c, double wx, double wy) const {
    double v = 0.5;
    for (const Wave& w : waves[c]) v += w.amp * std::sin(w.kx * wx + w.ky * wy + w.phase);
    return static_cast<float>(std::clamp(v, 0.02, 0.98));
  }
};

Background make_background(Rng& rng) {
  Background bg;
  for (auto& channel : bg.waves) {
    for (Wave& w : channel) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double wavelength = rng.uniform(13.0, 37.0);
      const double k = 2.0 * std::numbers::pi / wavelength;
      w.kx = k * std::cos(angle);
      w.ky = k * std::sin(angle);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.amp = rng.uniform(0.10, 0.16);
    }
  }
  return bg;
}

// Signed distance (negative inside); only accurate near the boundary, which
// is all the 1 px soft edge needs.
double shape_sdf(ObjectShape shape, double dx, double dy, double half) {
  switch (shape) {
    case ObjectShape::kSquare:
      return std::max(std::abs(dx), std::abs(dy)) - half;
    case ObjectShape::kDisk:
      return std::hypot(dx, dy) - half;
    case ObjectShape::kCross: {
      const double arm = 0.38 * half;
      const double horz = std::max(std::abs(dx) - half, std::abs(dy) - arm);
      const double vert = std::max(std::abs(dx) - arm, std::abs(dy) - half);
      return std::min(horz, vert);
    }
    case ObjectShape::kTriangle: {
      // Upward triangle: apex (0,-half), base corners (+-half, 0.8*half).
      const Point2 a{0.0, -half}, b{half, 0.8 * half}, c{-half, 0.8 * half};
      auto edge = [&](const Point2& p, const Point2& q) {
        const double ex = q.x - p.x, ey = q.y - p.y;
        return ((dx - p.x) * ey - (dy - p.y) * ex) / std::hypot(ex, ey);
      };
      return std::max({edge(a, b), edge(b, c), edge(c, a)});
    }
    case ObjectShape::kNone:
      return 1e9;
  }
  return 1e9;
}

double coverage_at(ObjectShape shape, double dx, double dy, double half) {
  return std::clamp(0.5 - shape_sdf(shape, dx, dy, half), 0.0, 1.0);
}

Homography head_step(Rng& rng, const SynthConfig& cfg, double scale, double cx, double cy) {
  const double dx = scale * rng.uniform(-cfg.head_translation, cfg.head_translation);
  const double dy = scale * rng.uniform(-cfg.head_translation, cfg.head_translation);
  const double theta = scale * rng.uniform(-cfg.head_rotation, cfg.head_rotation);
  const double s = std::exp(scale * rng.uniform(-cfg.head_log_scale, cfg.head_log_scale));
  const double px = scale * rng.uniform(-cfg.head_perspective, cfg.head_perspective);
  const double py = scale * rng.uniform(-cfg.head_perspective, cfg.head_perspective);

  Homography core;
  core.h = {{{s * std::cos(theta), -s * std::sin(theta), dx},
             {s * std::sin(theta), s * std::cos(theta), dy},
             {px, py, 1.0}}};
  // Conjugate by the frame center so rotation/scale pivot there.
  return Homography::translation(cx, cy)
      .compose(core)
      .compose(Homography::translation(-cx, -cy));
}

struct ObjectState {
  const ClassSpec* spec = nullptr;
  double orbit_cx = 0.0, orbit_cy = 0.0, theta0 = 0.0;
  double start_x = 0.0, start_y = 0.0;

  // Unwrapped position at a frame within the segment.
  Point2 pos(const SynthConfig& cfg, int t) const {
    switch (spec->motion) {
      case MotionKind::kOrbit: {
        const double th = theta0 + cfg.orbit_step * t;
        return {orbit_cx + cfg.orbit_radius * std::cos(th),
                orbit_cy + cfg.orbit_radius * std::sin(th)};
      }
      case MotionKind::kSlide:
        return {start_x + spec->velocity_x * t, start_y + spec->velocity_y * t};
      case MotionKind::kStatic:
        return {start_x, start_y};
    }
    return {start_x, start_y};
  }
};

}  // namespace

ObjectShape parse_shape(const std::string& name) {
  if (name == "none") return ObjectShape::kNone;
  if (name == "square") return ObjectShape::kSquare;
  if (name == "disk") return ObjectShape::kDisk;
  if (name == "cross") return ObjectShape::kCross;
  if (name == "triangle") return ObjectShape::kTriangle;
  throw std::invalid_argument("unknown object shape: " + name);
}

std::string to_string(ObjectShape shape) {
  switch (shape) {
    case ObjectShape::kNone: return "none";
    case ObjectShape::kSquare: return "square";
    case ObjectShape::kDisk: return "disk";
    case ObjectShape::kCross: return "cross";
    case ObjectShape::kTriangle: return "triangle";
  }
  return "none";
}

MotionKind parse_motion(const std::string& name) {
  if (name == "static") return MotionKind::kStatic;
  if (name == "orbit") return MotionKind::kOrbit;
  if (name == "slide") return MotionKind::kSlide;
  throw std::invalid_argument("unknown motion kind: " + name);
}

std::string to_string(MotionKind motion) {
  switch (motion) {
    case MotionKind::kStatic: return "static";
    case MotionKind::kOrbit: return "orbit";
    case MotionKind::kSlide: return "slide";
  }
  return "static";
}

void SynthConfig::validate() const {
  if (width < 16 || height < 16) throw std::invalid_argument("frame size too small");
  if (num_subjects < 1 || videos_per_subject < 1) {
    throw std::invalid_argument("need at least one subject and one video per subject");
  }
  if (classes.empty()) throw std::invalid_argument("synth config has no classes");
  if (frames_per_video < static_cast<int>(classes.size())) {
    throw std::invalid_argument("frames_per_video must cover every class at least once");
  }
  if (object_half <= 0.0 || object_margin <= 0) {
    throw std::invalid_argument("object geometry must be positive");
  }
  if (2 * object_margin >= std::min(width, height)) {
    throw std::invalid_argument("object_margin leaves no room for the inner torus");
  }
  const double orbit_room = std::min(width, height) / 2.0 - object_margin - orbit_radius;
  if (orbit_room < 0.0) throw std::invalid_argument("orbit_radius exceeds the safe region");
  for (const auto& c : classes) {
    if (c.name.empty()) throw std::invalid_argument("class with empty name");
    if (c.head_scale < 0.0) throw std::invalid_argument(c.name + ": negative head_scale");
  }
}

SynthConfig default_synth_config() {
  SynthConfig cfg;
  cfg.classes = {
      {"hold_square", ObjectShape::kSquare, {0.90f, 0.20f, 0.20f}, MotionKind::kOrbit},
      {"hold_disk", ObjectShape::kDisk, {0.15f, 0.85f, 0.25f}, MotionKind::kOrbit},
      {"hold_cross", ObjectShape::kCross, {0.20f, 0.25f, 0.95f}, MotionKind::kOrbit},
      {"slide_right", ObjectShape::kTriangle, {0.95f, 0.80f, 0.10f}, MotionKind::kSlide, 2.0,
       0.0},
      {"slide_left", ObjectShape::kTriangle, {0.95f, 0.80f, 0.10f}, MotionKind::kSlide, -2.0,
       0.0},
      {"slide_down", ObjectShape::kTriangle, {0.95f, 0.80f, 0.10f}, MotionKind::kSlide, 0.0,
       2.0},
  };
  return cfg;
}

namespace {

struct VideoPlan {
  std::vector<int> frame_class;           // label per frame
  std::vector<int> segment_of_frame;      // segment index per frame
  std::vector<ObjectState> segment_state;  // one per segment
  std::vector<int> segment_start;
};

VideoPlan plan_video(const SynthConfig& cfg, Rng& rng) {
  const int num_classes = static_cast<int>(cfg.classes.size());
  std::vector<int> order(num_classes);
  for (int i = 0; i < num_classes; ++i) order[i] = i;
  for (int i = num_classes - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[i], order[j]);
  }

  const int base = cfg.frames_per_video / num_classes;
  const int extra = cfg.frames_per_video % num_classes;

  VideoPlan plan;
  const double m = cfg.object_margin;
  for (int s = 0; s < num_classes; ++s) {
    const int cls = order[s];
    const ClassSpec& spec = cfg.classes[cls];
    const int len = base + (s < extra ? 1 : 0);

    ObjectState state;
    state.spec = &spec;
    if (spec.motion == MotionKind::kOrbit) {
      state.orbit_cx =
          rng.uniform(m + cfg.orbit_radius, cfg.width - m - cfg.orbit_radius);
      state.orbit_cy =
          rng.uniform(m + cfg.orbit_radius, cfg.height - m - cfg.orbit_radius);
      state.theta0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    } else {
      state.start_x = rng.uniform(m, cfg.width - m);
      state.start_y = rng.uniform(m, cfg.height - m);
    }

    plan.segment_start.push_back(static_cast<int>(plan.frame_class.size()));
    plan.segment_state.push_back(state);
    for (int t = 0; t < len; ++t) {
      plan.frame_class.push_back(cls);
      plan.segment_of_frame.push_back(s);
    }
  }
  return plan;
}

// Wraps p into [margin, size - margin) on the inner torus.
double wrap_coord(double p, double margin, double size) {
  const double span = size - 2.0 * margin;
  double r = std::fmod(p - margin, span);
  if (r < 0.0) r += span;
  return margin + r;
}

struct PlacedObject {
  const ClassSpec* spec = nullptr;
  Point2 center;       // wrapped position at this frame
  Point2 velocity;     // unwrapped px/frame
  double span_x = 0.0;  // inner-torus spans, for wrap copies
  double span_y = 0.0;
};

PlacedObject place_object(const SynthConfig& cfg, const VideoPlan& plan, int frame) {
  const int seg = plan.segment_of_frame[frame];
  const ObjectState& st = plan.segment_state[seg];
  const int t = frame - plan.segment_start[seg];

  PlacedObject placed;
  placed.spec = st.spec;
  const Point2 p0 = st.pos(cfg, t);
  const Point2 p1 = st.pos(cfg, t + 1);
  placed.velocity = {p1.x - p0.x, p1.y - p0.y};
  placed.span_x = cfg.width - 2.0 * cfg.object_margin;
  placed.span_y = cfg.height - 2.0 * cfg.object_margin;
  if (st.spec->motion == MotionKind::kSlide) {
    placed.center = {wrap_coord(p0.x, cfg.object_margin, cfg.width),
                     wrap_coord(p0.y, cfg.object_margin, cfg.height)};
  } else {
    placed.center = p0;
  }
  return placed;
}

// Coverage of the object (including its torus wrap copies) at a pixel.
double object_coverage(const PlacedObject& obj, double half, double x, double y) {
  if (obj.spec->shape == ObjectShape::kNone) return 0.0;
  double cov = 0.0;
  const bool slide = obj.spec->motion == MotionKind::kSlide;
  const int range = slide ? 1 : 0;
  for (int ky = -range; ky <= range; ++ky) {
    for (int kx = -range; kx <= range; ++kx) {
      const double cx = obj.center.x + kx * obj.span_x;
      const double cy = obj.center.y + ky * obj.span_y;
      if (std::abs(x - cx) > half + 1.5 || std::abs(y - cy) > half + 1.5) continue;
      cov = std::max(cov, coverage_at(obj.spec->shape, x - cx, y - cy, half));
    }
  }
  return cov;
}

GrayImage coverage_image(const SynthConfig& cfg, const PlacedObject& obj) {
  GrayImage cov(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      cov.data[static_cast<size_t>(y) * cfg.width + x] =
          static_cast<float>(object_coverage(obj, cfg.object_half, x, y));
    }
  }
  return cov;
}

Image render_frame(const SynthConfig& cfg, const Background& bg, const Homography& camera,
                   const PlacedObject& obj, const GrayImage& cov) {
  Image img(cfg.width, cfg.height, 3);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const Point2 w = apply_homography(camera, {static_cast<double>(x), static_cast<double>(y)});
      const double c_obj = cov.data[static_cast<size_t>(y) * cfg.width + x];
      for (int c = 0; c < 3; ++c) {
        const double base = bg.value(c, w.x, w.y);
        img.at(c, x, y) = static_cast<float>(base * (1.0 - c_obj) + obj.spec->color[c] * c_obj);
      }
    }
  }
  return img;
}

std::string frame_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, index, ext);
  return buf;
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const SynthConfig& config,
                                           const std::filesystem::path& out_dir,
                                           std::uint64_t seed) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.name = "synth";
  manifest.base_dir = out_dir;
  for (const auto& c : config.classes) manifest.label_map.names.push_back(c.name);

  int video_index = 0;
  for (int s = 0; s < config.num_subjects; ++s) {
    const std::string subject = "S" + std::to_string(s + 1);
    for (int v = 0; v < config.videos_per_subject; ++v, ++video_index) {
      Rng rng(derive_seed(seed, "synth/video", static_cast<std::uint64_t>(video_index)));
      const Background bg = make_background(rng);
      const VideoPlan plan = plan_video(config, rng);

      const std::string video_id = subject + "_v" + std::to_string(v);
      const auto video_dir = out_dir / subject / ("v" + std::to_string(v));
      const auto frames_dir = video_dir / "frames";
      const auto gt_dir = video_dir / "gt";
      std::filesystem::create_directories(frames_dir);
      std::filesystem::create_directories(gt_dir);

      const double cx = (config.width - 1) / 2.0;
      const double cy = (config.height - 1) / 2.0;

      // camera maps frame-t pixel coords to world coords; steps[t] maps
      // frame t coords to frame t+1 coords (the ground-truth head motion).
      Homography camera = Homography::identity();
      std::vector<Homography> steps;
      steps.reserve(config.frames_per_video - 1);
      for (int t = 0; t + 1 < config.frames_per_video; ++t) {
        const double scale = config.classes[plan.frame_class[t]].head_scale;
        steps.push_back(head_step(rng, config, scale, cx, cy));
      }

      VideoRecord record;
      record.video_id = video_id;
      record.subject = subject;

      std::ofstream boxes(gt_dir / "boxes.jsonl");
      if (!boxes) throw std::runtime_error("cannot write " + (gt_dir / "boxes.jsonl").string());
      json homs = json::array();

      for (int t = 0; t < config.frames_per_video; ++t) {
        const PlacedObject obj = place_object(config, plan, t);
        const GrayImage cov = coverage_image(config, obj);
        const Image frame = render_frame(config, bg, camera, obj, cov);
        write_ppm(frames_dir / frame_name("frame", t, "ppm"), frame);

        record.frame_paths.push_back(subject + "/v" + std::to_string(v) + "/frames/" +
                                     frame_name("frame", t, "ppm"));
        record.frame_labels.push_back(plan.frame_class[t]);

        // Coverage mask and bounding box at this frame.
        GrayImage mask(frame.width, frame.height);
        int x0 = frame.width, y0 = frame.height, x1 = 0, y1 = 0;
        for (int y = 0; y < frame.height; ++y) {
          for (int x = 0; x < frame.width; ++x) {
            const size_t i = static_cast<size_t>(y) * frame.width + x;
            mask.data[i] = cov.data[i] >= 0.5f ? 1.0f : 0.0f;
            if (mask.data[i] > 0.0f) {
              x0 = std::min(x0, x);
              y0 = std::min(y0, y);
              x1 = std::max(x1, x + 1);
              y1 = std::max(y1, y + 1);
            }
          }
        }
        if (x0 >= x1) x0 = y0 = x1 = y1 = 0;
        write_pgm(gt_dir / frame_name("mask", t, "pgm"), mask);
        boxes << json{{"frame", t}, {"x0", x0}, {"y0", y0}, {"x1", x1}, {"y1", y1}}.dump()
              << "\n";

        if (t + 1 < config.frames_per_video) {
          const Homography& H = steps[t];
          const bool same_segment = plan.segment_of_frame[t] == plan.segment_of_frame[t + 1];

          FlowField flow(frame.width, frame.height);
          for (int y = 0; y < frame.height; ++y) {
            for (int x = 0; x < frame.width; ++x) {
              const size_t i = static_cast<size_t>(y) * frame.width + x;
              const Point2 moved =
                  apply_homography(H, {static_cast<double>(x), static_cast<double>(y)});
              if (same_segment && mask.data[i] > 0.5f) {
                flow.u[i] = static_cast<float>(obj.velocity.x);
                flow.v[i] = static_cast<float>(obj.velocity.y);
              } else {
                flow.u[i] = static_cast<float>(moved.x - x);
                flow.v[i] = static_cast<float>(moved.y - y);
              }
            }
          }
          write_flo(gt_dir / frame_name("flow", t, "flo"), flow);

          std::vector<double> hflat;
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) hflat.push_back(H.h[r][c]);
          homs.push_back({{"frame", t}, {"h", hflat}});

          camera = camera.compose(H.inverse());
        }
      }

      std::ofstream hout(gt_dir / "homographies.json");
      if (!hout) {
        throw std::runtime_error("cannot write " + (gt_dir / "homographies.json").string());
      }
      hout << homs.dump(2) << "\n";

      manifest.videos.push_back(std::move(record));
    }
  }

  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace egoact
