// Python bindings for the core operations. Array conventions: grayscale
// frames are float32 (H, W), color images float32 (H, W, 3) interleaved,
// flow fields float32 (H, W, 2) with the last axis ordered (u, v). The C++
// side stores images planar, so these wrappers transpose at the boundary.

#include <cstdint>
#include <optional>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "egoact/flow.hpp"
#include "egoact/flow_color.hpp"
#include "egoact/flow_io.hpp"
#include "egoact/homography.hpp"
#include "egoact/image.hpp"
#include "egoact/pipeline.hpp"
#include "egoact/preprocess.hpp"
#include "egoact/synth.hpp"

namespace py = pybind11;
using egoact::FlowField;
using egoact::GrayImage;
using egoact::Image;
using nlohmann::json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

GrayImage gray_from_array(const FloatArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a (H, W) array");
  GrayImage img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  std::copy_n(arr.data(), img.data.size(), img.data.begin());
  return img;
}

Image color_from_array(const FloatArray& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw std::invalid_argument("expected a (H, W, 3) array");
  }
  const int h = static_cast<int>(arr.shape(0));
  const int w = static_cast<int>(arr.shape(1));
  Image img(w, h, 3);
  const float* src = arr.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.data[(static_cast<std::size_t>(c) * h + y) * w + x] = *src++;
      }
    }
  }
  return img;
}

py::array color_to_array(const Image& img) {
  py::array_t<float> out({img.height, img.width, img.channels});
  float* dst = out.mutable_data();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        *dst++ = img.data[(static_cast<std::size_t>(c) * img.height + y) * img.width + x];
      }
    }
  }
  return out;
}

FlowField flow_from_array(const FloatArray& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 2) {
    throw std::invalid_argument("expected a (H, W, 2) flow array");
  }
  FlowField flow(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  const float* src = arr.data();
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    flow.u[i] = src[2 * i];
    flow.v[i] = src[2 * i + 1];
  }
  return flow;
}

py::array flow_to_array(const FlowField& flow) {
  py::array_t<float> out({flow.height, flow.width, 2});
  float* dst = out.mutable_data();
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    dst[2 * i] = flow.u[i];
    dst[2 * i + 1] = flow.v[i];
  }
  return out;
}

py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
      return out;
    }
    default:
      throw std::runtime_error("unconvertible json value");
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-stream egocentric action recognition core operations";

  m.def(
      "compute_flow",
      [](const FloatArray& prev, const FloatArray& next, double alpha, double pyramid_factor,
         int min_level_size, int warps_per_level, int solver_iterations,
         double convergence_tol) {
        egoact::FlowParams params;
        params.alpha = alpha;
        params.pyramid_factor = pyramid_factor;
        params.min_level_size = min_level_size;
        params.warps_per_level = warps_per_level;
        params.solver_iterations = solver_iterations;
        params.convergence_tol = convergence_tol;
        return flow_to_array(
            egoact::compute_flow(gray_from_array(prev), gray_from_array(next), params));
      },
      py::arg("prev"), py::arg("next"), py::arg("alpha") = 15.0,
      py::arg("pyramid_factor") = 0.5, py::arg("min_level_size") = 16,
      py::arg("warps_per_level") = 3, py::arg("solver_iterations") = 50,
      py::arg("convergence_tol") = 1e-4,
      "Coarse-to-fine Horn-Schunck flow between two grayscale frames.");

  m.def(
      "compensate",
      [](const FloatArray& flow_arr, int iterations, double inlier_threshold,
         double min_inlier_fraction, std::uint64_t seed, int grid_step) {
        egoact::RansacParams params;
        params.iterations = iterations;
        params.inlier_threshold = inlier_threshold;
        params.min_inlier_fraction = min_inlier_fraction;
        params.seed = seed;
        const auto result =
            egoact::compensate_sequence({flow_from_array(flow_arr)}, params, grid_step, 1);
        py::array_t<double> H({3, 3});
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) H.mutable_at(r, c) = result.records[0].H.h[r][c];
        }
        py::dict out;
        out["flow"] = flow_to_array(result.flows[0]);
        out["homography"] = H;
        out["inlier_fraction"] = result.records[0].inlier_fraction;
        out["fallback_identity"] = result.records[0].fallback_identity;
        return out;
      },
      py::arg("flow"), py::arg("iterations") = 500, py::arg("inlier_threshold") = 1.0,
      py::arg("min_inlier_fraction") = 0.4, py::arg("seed") = 0, py::arg("grid_step") = 8,
      "Fit a homography to the flow by RANSAC and subtract its induced field.");

  m.def(
      "flow_to_color",
      [](const FloatArray& flow_arr, std::optional<float> max_norm) {
        return color_to_array(egoact::flow_to_color(flow_from_array(flow_arr), max_norm));
      },
      py::arg("flow"), py::arg("max_norm") = std::nullopt,
      "Middlebury color rendering; max_norm fixes the saturation radius.");

  m.def(
      "read_flo", [](const std::filesystem::path& path) {
        return flow_to_array(egoact::read_flo(path));
      },
      py::arg("path"));
  m.def(
      "write_flo",
      [](const std::filesystem::path& path, const FloatArray& flow) {
        egoact::write_flo(path, flow_from_array(flow));
      },
      py::arg("path"), py::arg("flow"));

  m.def(
      "read_ppm", [](const std::filesystem::path& path) {
        return color_to_array(egoact::read_ppm(path));
      },
      py::arg("path"));

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out_dir, std::uint64_t seed) {
        const auto manifest = egoact::generate_synthetic_dataset(
            egoact::default_synth_config(), out_dir, seed);
        py::dict out;
        out["manifest"] = (out_dir / "manifest.jsonl").string();
        out["videos"] = manifest.videos.size();
        out["labels"] = manifest.label_map.names;
        return out;
      },
      py::arg("out_dir"), py::arg("seed") = 0,
      "Render the stock six-class synthetic dataset to a directory.");

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config_path, int jobs,
         bool deterministic, std::optional<std::uint64_t> seed) {
        egoact::PipelineConfig cfg = egoact::load_pipeline_config(config_path);
        if (seed.has_value()) cfg.seed = *seed;
        egoact::RunOptions opt;
        opt.jobs = jobs;
        opt.deterministic = deterministic;
        egoact::Pipeline pipeline(std::move(cfg), opt);
        json report;
        {
          py::gil_scoped_release release;
          report = pipeline.run_stage(stage);
        }
        return json_to_py(report);
      },
      py::arg("stage"), py::arg("config_path"), py::arg("jobs") = 1,
      py::arg("deterministic") = false, py::arg("seed") = std::nullopt,
      "Run one pipeline stage and return its report as a dict.");
}
