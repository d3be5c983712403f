#include "egoact/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace egoact {

void FlowParams::validate() const {
  if (!(alpha > 0.0f)) throw std::invalid_argument("FlowParams: alpha must be positive");
  if (!(pyramid_factor > 0.0f && pyramid_factor < 1.0f)) {
    throw std::invalid_argument("FlowParams: pyramid_factor must be in (0,1)");
  }
  if (min_level_size < 1 || warps_per_level < 1 || solver_iterations < 1) {
    throw std::invalid_argument("FlowParams: counts must be >= 1");
  }
  if (!(convergence_tol > 0.0f)) {
    throw std::invalid_argument("FlowParams: convergence_tol must be positive");
  }
}

namespace {

// Separable Gaussian low-pass, border-replicated. Sigma follows the usual
// anti-aliasing rule for the downsample factor.
GrayImage gaussian_blur(const GrayImage& img, float sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    const float w = std::exp(-0.5f * static_cast<float>(i * i) / (sigma * sigma));
    kernel[i + radius] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  GrayImage tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = std::clamp(x + i, 0, img.width - 1);
        acc += kernel[i + radius] * img.at(xi, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = std::clamp(y + i, 0, img.height - 1);
        acc += kernel[i + radius] * tmp.at(x, yi);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

// Half-pixel-centered bilinear resample.
GrayImage resample(const GrayImage& img, int out_w, int out_h) {
  GrayImage out(out_w, out_h);
  const float sx = static_cast<float>(img.width) / static_cast<float>(out_w);
  const float sy = static_cast<float>(img.height) / static_cast<float>(out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
      out.at(x, y) = sample_bilinear(img, src_x, src_y);
    }
  }
  return out;
}

// Upscales a flow field to new dimensions, rescaling vector magnitudes by the
// per-axis size ratio.
FlowField upscale_flow(const FlowField& flow, int out_w, int out_h) {
  FlowField out(out_w, out_h);
  const float rx = static_cast<float>(out_w) / static_cast<float>(flow.width);
  const float ry = static_cast<float>(out_h) / static_cast<float>(flow.height);
  const float sx = 1.0f / rx;
  const float sy = 1.0f / ry;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
      const std::size_t i = out.index(x, y);
      out.u[i] = sample_bilinear_plane(flow.u.data(), flow.width, flow.height, src_x, src_y) * rx;
      out.v[i] = sample_bilinear_plane(flow.v.data(), flow.width, flow.height, src_x, src_y) * ry;
    }
  }
  return out;
}

void central_gradients(const GrayImage& img, std::vector<float>& gx, std::vector<float>& gy) {
  const int w = img.width;
  const int h = img.height;
  gx.assign(img.pixel_count(), 0.0f);
  gy.assign(img.pixel_count(), 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const int ym = std::max(y - 1, 0);
      const int yp = std::min(y + 1, h - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = 0.5f * (img.at(xp, y) - img.at(xm, y));
      gy[i] = 0.5f * (img.at(x, yp) - img.at(x, ym));
    }
  }
}

// One Gauss-Seidel sweep of exact per-pixel 2x2 block coordinate descent on
// the HS quadratic. Returns the largest absolute update.
float gauss_seidel_sweep(const std::vector<float>& ix, const std::vector<float>& iy,
                         const std::vector<float>& it, const FlowField& base,
                         std::vector<float>& du, std::vector<float>& dv,
                         int w, int h, float alpha) {
  float max_delta = 0.0f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      float sum_u = 0.0f;
      float sum_v = 0.0f;
      int neighbors = 0;
      const auto accumulate = [&](int nx, int ny) {
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        sum_u += base.u[j] + du[j];
        sum_v += base.v[j] + dv[j];
        ++neighbors;
      };
      if (x > 0) accumulate(x - 1, y);
      if (x + 1 < w) accumulate(x + 1, y);
      if (y > 0) accumulate(x, y - 1);
      if (y + 1 < h) accumulate(x, y + 1);

      const float gx = ix[i];
      const float gy = iy[i];
      const float an = alpha * static_cast<float>(neighbors);
      const float a11 = gx * gx + an;
      const float a12 = gx * gy;
      const float a22 = gy * gy + an;
      const float b1 = -gx * it[i] + alpha * sum_u - an * base.u[i];
      const float b2 = -gy * it[i] + alpha * sum_v - an * base.v[i];
      const float det = a11 * a22 - a12 * a12;
      const float new_du = (b1 * a22 - b2 * a12) / det;
      const float new_dv = (a11 * b2 - a12 * b1) / det;
      max_delta = std::max(max_delta, std::abs(new_du - du[i]));
      max_delta = std::max(max_delta, std::abs(new_dv - dv[i]));
      du[i] = new_du;
      dv[i] = new_dv;
    }
  }
  return max_delta;
}

}  // namespace

double hs_energy(const std::vector<float>& ix, const std::vector<float>& iy,
                 const std::vector<float>& it, const FlowField& base,
                 const std::vector<float>& du, const std::vector<float>& dv,
                 int width, int height, float alpha) {
  double data = 0.0;
  double smooth = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double r = static_cast<double>(ix[i]) * du[i] +
                       static_cast<double>(iy[i]) * dv[i] + it[i];
      data += r * r;
      const double tu = base.u[i] + du[i];
      const double tv = base.v[i] + dv[i];
      if (x + 1 < width) {
        const std::size_t j = i + 1;
        const double eu = tu - (base.u[j] + du[j]);
        const double ev = tv - (base.v[j] + dv[j]);
        smooth += eu * eu + ev * ev;
      }
      if (y + 1 < height) {
        const std::size_t j = i + width;
        const double eu = tu - (base.u[j] + du[j]);
        const double ev = tv - (base.v[j] + dv[j]);
        smooth += eu * eu + ev * ev;
      }
    }
  }
  return data + static_cast<double>(alpha) * smooth;
}

std::vector<GrayImage> build_pyramid(const GrayImage& img, const FlowParams& params) {
  params.validate();
  if (img.width < 1 || img.height < 1) {
    throw std::invalid_argument("build_pyramid: empty image");
  }
  std::vector<GrayImage> levels;
  levels.push_back(img);
  const float factor = params.pyramid_factor;
  const float sigma = 0.6f * std::sqrt(1.0f / (factor * factor) - 1.0f);
  for (;;) {
    const GrayImage& cur = levels.back();
    const int nw = static_cast<int>(std::lround(cur.width * factor));
    const int nh = static_cast<int>(std::lround(cur.height * factor));
    if (std::min(nw, nh) < params.min_level_size) break;
    levels.push_back(resample(gaussian_blur(cur, sigma), nw, nh));
  }
  return levels;
}

GrayImage warp_image(const GrayImage& img, const FlowField& flow) {
  if (img.width != flow.width || img.height != flow.height) {
    throw std::invalid_argument("warp_image: image/flow dimension mismatch");
  }
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = flow.index(x, y);
      out.at(x, y) = sample_bilinear(img, static_cast<float>(x) + flow.u[i],
                                     static_cast<float>(y) + flow.v[i]);
    }
  }
  return out;
}

FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const FlowParams& params, FlowSolveStats* stats) {
  if (prev.width != next.width || prev.height != next.height) {
    throw std::invalid_argument("compute_flow: frame dimension mismatch");
  }
  // alpha is calibrated against 8-bit intensity units, so the [0,1] inputs
  // are scaled up internally; displacements are unaffected.
  GrayImage prev_scaled = prev;
  GrayImage next_scaled = next;
  for (auto& v : prev_scaled.data) v *= 255.0f;
  for (auto& v : next_scaled.data) v *= 255.0f;
  const auto pyr_prev = build_pyramid(prev_scaled, params);
  const auto pyr_next = build_pyramid(next_scaled, params);

  FlowField flow(pyr_prev.back().width, pyr_prev.back().height);
  std::vector<float> ix, iy, it, du, dv;
  for (int level = static_cast<int>(pyr_prev.size()) - 1; level >= 0; --level) {
    const GrayImage& ref = pyr_prev[static_cast<std::size_t>(level)];
    const GrayImage& tgt = pyr_next[static_cast<std::size_t>(level)];
    if (flow.width != ref.width || flow.height != ref.height) {
      flow = upscale_flow(flow, ref.width, ref.height);
    }
    for (int warp = 0; warp < params.warps_per_level; ++warp) {
      const GrayImage warped = warp_image(tgt, flow);
      central_gradients(warped, ix, iy);
      it.resize(ref.pixel_count());
      for (std::size_t i = 0; i < ref.pixel_count(); ++i) {
        it[i] = warped.data[i] - ref.data[i];
      }
      du.assign(ref.pixel_count(), 0.0f);
      dv.assign(ref.pixel_count(), 0.0f);
      FlowSolveStats::Trace* trace = nullptr;
      if (stats != nullptr) {
        trace = &stats->traces.emplace_back();
        trace->level = level;
        trace->warp = warp;
        trace->energies.push_back(
            hs_energy(ix, iy, it, flow, du, dv, ref.width, ref.height, params.alpha));
      }
      for (int iter = 0; iter < params.solver_iterations; ++iter) {
        const float delta =
            gauss_seidel_sweep(ix, iy, it, flow, du, dv, ref.width, ref.height, params.alpha);
        if (trace != nullptr) {
          trace->energies.push_back(
              hs_energy(ix, iy, it, flow, du, dv, ref.width, ref.height, params.alpha));
        }
        if (delta < params.convergence_tol) break;
      }
      for (std::size_t i = 0; i < ref.pixel_count(); ++i) {
        flow.u[i] += du[i];
        flow.v[i] += dv[i];
      }
    }
  }
  return flow;
}

}  // namespace egoact
