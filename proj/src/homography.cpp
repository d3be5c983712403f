#include "egoact/homography.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

#include "egoact/rng.hpp"
#include "egoact/threading.hpp"

namespace egoact {

Homography Homography::translation(double tx, double ty) {
  Homography H;
  H.h[0][2] = tx;
  H.h[1][2] = ty;
  return H;
}

Homography Homography::normalized() const {
  const double w = h[2][2];
  if (std::abs(w) < 1e-15) throw std::runtime_error("Homography: h33 is zero");
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.h[r][c] = h[r][c] / w;
  return out;
}

namespace {

Eigen::Matrix3d to_eigen(const Homography& H) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = H.h[r][c];
  return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
  Homography H;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) H.h[r][c] = m(r, c);
  return H;
}

}  // namespace

Homography Homography::inverse() const {
  const Eigen::Matrix3d m = to_eigen(*this);
  if (std::abs(m.determinant()) < 1e-15) {
    throw std::runtime_error("Homography: singular matrix has no inverse");
  }
  return from_eigen(m.inverse());
}

Homography Homography::compose(const Homography& rhs) const {
  return from_eigen(to_eigen(*this) * to_eigen(rhs));
}

Point2 apply_homography(const Homography& H, const Point2& p) {
  const double w = H.h[2][0] * p.x + H.h[2][1] * p.y + H.h[2][2];
  if (std::abs(w) <= 1e-12) {
    throw std::domain_error("apply_homography: point maps to infinity");
  }
  return Point2{(H.h[0][0] * p.x + H.h[0][1] * p.y + H.h[0][2]) / w,
                (H.h[1][0] * p.x + H.h[1][1] * p.y + H.h[1][2]) / w};
}

void RansacParams::validate() const {
  if (iterations < 1) throw std::invalid_argument("RansacParams: iterations must be >= 1");
  if (!(inlier_threshold > 0.0)) {
    throw std::invalid_argument("RansacParams: inlier_threshold must be positive");
  }
}

std::vector<PointPair> sample_correspondences(const FlowField& flow, int grid_step) {
  if (grid_step < 1) throw std::invalid_argument("sample_correspondences: grid_step must be >= 1");
  std::vector<PointPair> pairs;
  for (int y = grid_step; y < flow.height - 1; y += grid_step) {
    for (int x = grid_step; x < flow.width - 1; x += grid_step) {
      const std::size_t i = flow.index(x, y);
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      const Point2 q{p.x + flow.u[i], p.y + flow.v[i]};
      pairs.emplace_back(p, q);
    }
  }
  return pairs;
}

namespace {

struct Normalization {
  // Similarity transform: translate centroid to origin, scale mean distance
  // to sqrt(2).
  double cx = 0.0, cy = 0.0, scale = 1.0;

  Point2 apply(const Point2& p) const { return {scale * (p.x - cx), scale * (p.y - cy)}; }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
    T(0, 0) = scale;
    T(1, 1) = scale;
    T(0, 2) = -scale * cx;
    T(1, 2) = -scale * cy;
    return T;
  }
};

Normalization hartley_normalization(const std::vector<PointPair>& pairs,
                                    const std::vector<int>& idx, bool second) {
  Normalization n;
  for (const int i : idx) {
    const Point2& p = second ? pairs[i].second : pairs[i].first;
    n.cx += p.x;
    n.cy += p.y;
  }
  n.cx /= static_cast<double>(idx.size());
  n.cy /= static_cast<double>(idx.size());
  double mean_dist = 0.0;
  for (const int i : idx) {
    const Point2& p = second ? pairs[i].second : pairs[i].first;
    mean_dist += std::hypot(p.x - n.cx, p.y - n.cy);
  }
  mean_dist /= static_cast<double>(idx.size());
  n.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  return n;
}

// Direct linear transform on the selected pairs. Returns false when the
// design matrix is rank deficient (collinear sample).
bool dlt(const std::vector<PointPair>& pairs, const std::vector<int>& idx, Homography& out) {
  const Normalization n1 = hartley_normalization(pairs, idx, false);
  const Normalization n2 = hartley_normalization(pairs, idx, true);

  Eigen::MatrixXd A(2 * static_cast<int>(idx.size()), 9);
  int row = 0;
  for (const int i : idx) {
    const Point2 p = n1.apply(pairs[i].first);
    const Point2 q = n2.apply(pairs[i].second);
    A.row(row++) << -p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x;
    A.row(row++) << 0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A homography has 8 dof; the second-smallest singular value must be
  // clearly nonzero or the sample is degenerate.
  if (sv(7) < 1e-9 * sv(0)) return false;

  Eigen::Matrix3d Hn;
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  const Eigen::Matrix3d H = n2.matrix().inverse() * Hn * n1.matrix();
  if (std::abs(H(2, 2)) < 1e-12) return false;
  out = from_eigen(H / H(2, 2));
  return true;
}

// Symmetric transfer error: forward residual plus backward residual.
double symmetric_transfer_error(const Homography& H, const Homography& Hinv,
                                const PointPair& pair) {
  const Point2 fwd = apply_homography(H, pair.first);
  const Point2 bwd = apply_homography(Hinv, pair.second);
  const double ef = std::hypot(fwd.x - pair.second.x, fwd.y - pair.second.y);
  const double eb = std::hypot(bwd.x - pair.first.x, bwd.y - pair.first.y);
  return ef + eb;
}

}  // namespace

HomographyFit fit_homography(const std::vector<PointPair>& pairs, const RansacParams& params) {
  params.validate();
  const int n = static_cast<int>(pairs.size());
  if (n < 4) throw std::runtime_error("fit_homography: need at least 4 correspondences");

  Rng rng(params.seed);
  std::vector<int> best_inliers;
  Homography best_H;
  std::vector<int> sample(4);
  for (int iter = 0; iter < params.iterations; ++iter) {
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        sample[k] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        fresh = true;
        for (int j = 0; j < k; ++j) fresh = fresh && sample[j] != sample[k];
      } while (!fresh);
    }
    Homography H;
    if (!dlt(pairs, sample, H)) continue;
    Homography Hinv;
    try {
      Hinv = H.inverse();
    } catch (const std::runtime_error&) {
      continue;
    }
    std::vector<int> inliers;
    inliers.reserve(pairs.size());
    for (int i = 0; i < n; ++i) {
      try {
        if (symmetric_transfer_error(H, Hinv, pairs[i]) < params.inlier_threshold) {
          inliers.push_back(i);
        }
      } catch (const std::domain_error&) {
        // point at infinity under this model: not an inlier
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      best_H = H;
    }
  }

  if (best_inliers.size() < 4) {
    throw std::runtime_error("fit_homography: no model with at least 4 inliers");
  }
  const double fraction = static_cast<double>(best_inliers.size()) / static_cast<double>(n);
  if (fraction < params.min_inlier_fraction) {
    throw std::runtime_error("fit_homography: inlier fraction below minimum");
  }

  // Least-squares refit on the full consensus set.
  Homography refit = best_H;
  if (!dlt(pairs, best_inliers, refit)) {
    throw std::runtime_error("fit_homography: degenerate final inlier set");
  }
  const Homography refit_inv = refit.inverse();
  HomographyFit result;
  result.H = refit.normalized();
  result.inlier_mask.assign(pairs.size(), false);
  std::size_t count = 0;
  for (int i = 0; i < n; ++i) {
    try {
      if (symmetric_transfer_error(result.H, refit_inv, pairs[i]) < params.inlier_threshold) {
        result.inlier_mask[i] = true;
        ++count;
      }
    } catch (const std::domain_error&) {
    }
  }
  result.inlier_fraction = static_cast<double>(count) / static_cast<double>(n);
  return result;
}

FlowField homography_flow(const Homography& H, int width, int height) {
  FlowField out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 q =
          apply_homography(H, {static_cast<double>(x), static_cast<double>(y)});
      const std::size_t i = out.index(x, y);
      out.u[i] = static_cast<float>(q.x - x);
      out.v[i] = static_cast<float>(q.y - y);
    }
  }
  return out;
}

FlowField compensate_flow(const FlowField& flow, const Homography& H) {
  const FlowField ego = homography_flow(H, flow.width, flow.height);
  FlowField out(flow.width, flow.height);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    out.u[i] = flow.u[i] - ego.u[i];
    out.v[i] = flow.v[i] - ego.v[i];
  }
  return out;
}

CompensationResult compensate_sequence(const std::vector<FlowField>& flows,
                                       const RansacParams& params, int grid_step, int jobs) {
  CompensationResult result;
  result.flows.resize(flows.size());
  result.records.resize(flows.size());
  parallel_for(flows.size(), jobs, [&](std::size_t i) {
    RansacParams frame_params = params;
    frame_params.seed = params.seed + i;
    CompensationRecord rec;
    try {
      const auto pairs = sample_correspondences(flows[i], grid_step);
      const HomographyFit fit = fit_homography(pairs, frame_params);
      rec.H = fit.H;
      rec.inlier_fraction = fit.inlier_fraction;
      result.flows[i] = compensate_flow(flows[i], fit.H);
    } catch (const std::exception&) {
      rec.H = Homography::identity();
      rec.fallback_identity = true;
      result.flows[i] = flows[i];
    }
    result.records[i] = rec;
  });
  return result;
}

}  // namespace egoact
