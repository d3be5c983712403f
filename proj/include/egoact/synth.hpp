#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoact/manifest.hpp"

namespace egoact {

enum class ObjectShape { kNone, kSquare, kDisk, kCross, kTriangle };
enum class MotionKind { kStatic, kOrbit, kSlide };

ObjectShape parse_shape(const std::string& name);
std::string to_string(ObjectShape shape);
MotionKind parse_motion(const std::string& name);
std::string to_string(MotionKind motion);

struct ClassSpec {
  std::string name;
  ObjectShape shape = ObjectShape::kSquare;
  std::array<float, 3> color = {0.9f, 0.2f, 0.2f};
  MotionKind motion = MotionKind::kOrbit;
  double velocity_x = 0.0;  // px/frame, slide motion only
  double velocity_y = 0.0;
  double head_scale = 1.0;  // multiplier on the head-motion amplitudes
};

/// Scene recipe: an analytic sinusoid background warped by a random-walk
/// "head motion" homography, with one foreground object per class segment.
/// Objects ride in frame coordinates: orbit classes share a slow circular
/// drift (shape is the only cue), slide classes share one shape and differ
/// by velocity (motion is the only cue). Sliding objects wrap on an inner
/// torus so they never leave the central region of the frame.
struct SynthConfig {
  int width = 72;
  int height = 72;
  int num_subjects = 4;
  int videos_per_subject = 3;
  int frames_per_video = 198;

  double object_half = 7.0;  // half-extent of the object, px
  int object_margin = 17;    // inner-torus inset from the frame border, px

  double orbit_radius = 6.0;
  double orbit_step = 0.15;  // radians/frame

  // Per-frame head-motion step amplitudes (uniform in +-amplitude).
  double head_translation = 0.8;  // px
  double head_rotation = 0.008;  // radians
  double head_log_scale = 0.004;
  double head_perspective = 2e-6;

  std::vector<ClassSpec> classes;  // see default_synth_config()

  void validate() const;
};

/// The six stock classes: hold_{square,disk,cross} (object identity, shared
/// orbit) and slide_{right,left,down} (shared triangle, distinct velocity;
/// right/left form an opposite pair).
SynthConfig default_synth_config();

/// Writes, under out_dir:
///   <subject>/<video>/frames/frame_NNNN.ppm
///   <subject>/<video>/gt/flow_NNNN.flo          frame t -> t+1
///   <subject>/<video>/gt/mask_NNNN.pgm          object coverage at frame t
///   <subject>/<video>/gt/boxes.jsonl            per-frame object bounds
///   <subject>/<video>/gt/homographies.json      per-transition head motion
///   manifest.jsonl
/// Deterministic: identical (config, seed) produce identical bytes. Object
/// flow in the sidecars is the unwrapped velocity, so it is approximate on
/// the rare frames where a sliding object wraps across the inner torus.
DatasetManifest generate_synthetic_dataset(const SynthConfig& config,
                                           const std::filesystem::path& out_dir,
                                           std::uint64_t seed);

}  // namespace egoact
