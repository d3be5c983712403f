#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "egoact/flow.hpp"

namespace egoact {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using PointPair = std::pair<Point2, Point2>;

/// 3x3 projective transform, h[2][2] normalized to 1 after fitting.
struct Homography {
  std::array<std::array<double, 3>, 3> h{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Homography identity() { return Homography{}; }
  static Homography translation(double tx, double ty);

  Homography normalized() const;   // scales so h[2][2] == 1
  Homography inverse() const;      // throws on singular matrix
  Homography compose(const Homography& rhs) const;  // this ∘ rhs
};

/// Projective transform with perspective divide. Throws point_at_infinity
/// (std::domain_error) when |w| <= 1e-12.
Point2 apply_homography(const Homography& H, const Point2& p);

struct RansacParams {
  int iterations = 500;
  double inlier_threshold = 1.0;     // pixels, symmetric transfer error
  double min_inlier_fraction = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Grid-sampled correspondences (p, p + flow(p)) at interior points with the
/// given stride.
std::vector<PointPair> sample_correspondences(const FlowField& flow, int grid_step);

struct HomographyFit {
  Homography H;
  std::vector<bool> inlier_mask;
  double inlier_fraction = 0.0;
};

/// RANSAC over 4-point minimal samples, models by normalized DLT (Hartley
/// normalization), final model refit on all inliers by least squares.
/// Deterministic given params.seed. Throws std::runtime_error when fewer
/// than 4 pairs are given, the final inlier set is degenerate, or the inlier
/// fraction falls below params.min_inlier_fraction.
HomographyFit fit_homography(const std::vector<PointPair>& pairs, const RansacParams& params);

/// The flow field a homography induces over a w x h frame: f(p) = H(p) - p.
FlowField homography_flow(const Homography& H, int width, int height);

/// out(p) = flow(p) - (H(p) - p), pixelwise.
FlowField compensate_flow(const FlowField& flow, const Homography& H);

struct CompensationRecord {
  Homography H;
  double inlier_fraction = 0.0;
  bool fallback_identity = false;  // fit failed, flow left uncompensated
};

struct CompensationResult {
  std::vector<FlowField> flows;
  std::vector<CompensationRecord> records;
};

/// Per-frame pipeline: sample correspondences from the flow, fit H, subtract
/// its induced field. Fit failures fall back to the identity (no
/// compensation) and are flagged in the record. Per-frame RANSAC seeds are
/// params.seed + frame index, so any parallel schedule gives identical
/// output.
CompensationResult compensate_sequence(const std::vector<FlowField>& flows,
                                       const RansacParams& params, int grid_step = 8,
                                       int jobs = 1);

}  // namespace egoact
