#pragma once

#include <optional>
#include <vector>

#include "egoact/image.hpp"

namespace egoact {

/// Dense per-pixel motion field: pixel (x, y) in the first frame moves to
/// (x + u, y + v) in the second.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct FlowParams {
  float alpha = 15.0f;           // smoothness weight, in 8-bit intensity units
  float pyramid_factor = 0.5f;   // per-level downscale, in (0,1)
  int min_level_size = 16;       // coarsest pyramid level keeps min side >= this
  int warps_per_level = 3;
  int solver_iterations = 50;    // Gauss-Seidel sweeps per warp
  float convergence_tol = 1e-4f; // early stop when max update falls below

  void validate() const;
};

/// Per-sweep energy traces, one entry per (level, warp).
struct FlowSolveStats {
  struct Trace {
    int level = 0;
    int warp = 0;
    std::vector<double> energies;
  };
  std::vector<Trace> traces;
};

/// Level 0 is the input; each following level is low-pass filtered and
/// resampled by pyramid_factor. Images smaller than min_level_size yield a
/// single-level pyramid.
std::vector<GrayImage> build_pyramid(const GrayImage& img, const FlowParams& params);

/// out(p) = bilinear sample of img at p + flow(p), border-clamped.
GrayImage warp_image(const GrayImage& img, const FlowField& flow);

/// Coarse-to-fine Horn-Schunck with iterative warping. Deterministic.
FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const FlowParams& params, FlowSolveStats* stats = nullptr);

/// Discrete Horn-Schunck energy of the increment (du, dv) on top of base
/// flow: sum of squared linearized data term plus alpha * forward-difference
/// smoothness of the total flow. Exposed for the solver's monotonicity tests.
double hs_energy(const std::vector<float>& ix, const std::vector<float>& iy,
                 const std::vector<float>& it, const FlowField& base,
                 const std::vector<float>& du, const std::vector<float>& dv,
                 int width, int height, float alpha);

}  // namespace egoact
