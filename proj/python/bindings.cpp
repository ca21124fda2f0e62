// Copyright 2026 The lidarprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lidarprobe/config.hpp"
#include "lidarprobe/errors.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/neighbor_index.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/pipeline.hpp"
#include "lidarprobe/preprocess.hpp"
#include "lidarprobe/reproduce.hpp"

namespace py = pybind11;
using namespace lidarprobe;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Eigen::Ref<const RowPoints>& m) {
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

RowPoints to_matrix(const std::vector<Vec3>& pts) {
  RowPoints m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

PointCloud make_cloud(const Eigen::Ref<const RowPoints>& points) {
  return PointCloud(to_points(points), FrameId::base());
}

pipeline::StageOptions options_from(const std::optional<std::filesystem::path>& config_path,
                                    std::optional<std::filesystem::path> debug_dir) {
  pipeline::StageOptions opts;
  if (config_path) opts.config = load_pipeline_config(*config_path);
  opts.debug_dir = std::move(debug_dir);
  return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Python bindings for the lidarprobe library";
  m.attr("__version__") = LIDARPROBE_VERSION;

  static py::exception<Error> error_type(m, "LidarprobeError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });
  m.def("exit_code", [](const std::string& kind) {
    for (int k = 0; k <= static_cast<int>(ErrorKind::kInternal); ++k) {
      if (to_string(static_cast<ErrorKind>(k)) == kind) return exit_code(static_cast<ErrorKind>(k));
    }
    throw py::value_error("unknown error kind " + kind);
  });

  m.def("set_thread_count", &set_thread_count, py::arg("threads"));
  m.def("thread_count", &thread_count);

  m.def(
      "nearest_neighbors",
      [](const Eigen::Ref<const RowPoints>& reference, const Eigen::Ref<const RowPoints>& queries) {
        const std::vector<Vec3> ref = to_points(reference);
        const NeighborIndex index{std::span<const Vec3>(ref)};
        std::vector<std::size_t> idx;
        std::vector<double> dist;
        for (Eigen::Index i = 0; i < queries.rows(); ++i) {
          const auto nb = index.nearest(queries.row(i).transpose());
          idx.push_back(nb.index);
          dist.push_back(std::sqrt(nb.squared_distance));
        }
        return py::make_tuple(idx, dist);
      },
      py::arg("reference"), py::arg("queries"), "Nearest reference index and distance for each query point.");

  m.def(
      "voxel_downsample",
      [](const Eigen::Ref<const RowPoints>& points, double voxel) {
        return to_matrix(preprocess::voxel_downsample(make_cloud(points), voxel).points());
      },
      py::arg("points"), py::arg("voxel_size"));
  m.def(
      "dbscan_labels",
      [](const Eigen::Ref<const RowPoints>& points, double eps, std::size_t min_points) {
        const std::vector<Vec3> pts = to_points(points);
        return preprocess::dbscan_labels(pts, eps, min_points);
      },
      py::arg("points"), py::arg("eps"), py::arg("min_points"));

  m.def(
      "surface_error",
      [](const Eigen::Ref<const RowPoints>& source, const Eigen::Ref<const RowPoints>& reference,
         double tolerance) {
        const metrics::SurfaceErrorReport r = metrics::surface_error(make_cloud(source), make_cloud(reference),
                                                                     tolerance);
        py::dict d;
        d["e_rmse"] = r.e_rmse;
        d["e_95"] = r.e_95;
        d["coverage"] = r.coverage;
        d["distances"] = r.per_point_distances;
        return d;
      },
      py::arg("source"), py::arg("reference"), py::arg("tolerance") = 0.008);
  m.def("project_marker", &metrics::project_marker, py::arg("sphere_center"), py::arg("surface_point"),
        py::arg("normal"));
  m.def("tangential_error", &metrics::tangential_error, py::arg("projected"), py::arg("surface_point"));
  m.def(
      "icc",
      [](const std::vector<std::vector<double>>& trials, const std::string& form) {
        const metrics::RepeatabilityReport r = metrics::repeatability(trials, metrics::icc_form_from_string(form));
        py::dict d;
        d["icc"] = r.icc;
        d["ms_between"] = r.ms_between;
        d["ms_within"] = r.ms_within;
        d["mean"] = r.per_subject_mean;
        d["sd"] = r.per_subject_sd;
        return d;
      },
      py::arg("trials"), py::arg("form") = "ICC(1,1)");

  m.def(
      "calibration_trial",
      [](double noise_m, std::uint64_t seed) {
        const reproduce::CalibrationRun r = reproduce::run_calibration_trial(noise_m, seed, {});
        py::dict d;
        d["overall_rms_mm"] = r.overall_rms_mm;
        d["translation_error_mm"] = r.translation_error_mm;
        d["rotation_error_deg"] = r.rotation_error_deg;
        d["translation_sigma_mm"] = r.translation_sigma_mm;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("noise_m"), py::arg("seed"), "Simulates a 20-pose session and solves for the extrinsics.");

  m.def(
      "simulate",
      [](const std::filesystem::path& scenario, const std::filesystem::path& out,
         std::optional<std::uint64_t> seed) { pipeline::cmd_simulate(scenario, out, {}, seed); },
      py::arg("scenario"), py::arg("out_dir"), py::arg("seed") = py::none());
  m.def(
      "calibrate",
      [](const std::filesystem::path& dataset, const std::filesystem::path& out,
         std::optional<std::filesystem::path> config) {
        return pipeline::cmd_calibrate(dataset, out, options_from(config, std::nullopt)).overall_rms_mm;
      },
      py::arg("dataset"), py::arg("out_path"), py::arg("config") = py::none(),
      "Runs the calibrate stage and returns the overall RMS residual in mm.");
  m.def(
      "reconstruct",
      [](const std::filesystem::path& recordings, const std::filesystem::path& extrinsics,
         const std::filesystem::path& out, std::optional<std::filesystem::path> config) {
        pipeline::cmd_reconstruct(recordings, extrinsics, out, options_from(config, std::nullopt));
      },
      py::arg("recordings"), py::arg("extrinsics"), py::arg("out_dir"), py::arg("config") = py::none());
  m.def(
      "preprocess",
      [](const std::filesystem::path& raw, const std::filesystem::path& out,
         std::optional<std::filesystem::path> config, std::optional<std::filesystem::path> debug_dir) {
        pipeline::cmd_preprocess(raw, std::nullopt, out, options_from(config, std::move(debug_dir)));
      },
      py::arg("raw_cloud"), py::arg("out_path"), py::arg("config") = py::none(), py::arg("debug_dir") = py::none());
  m.def(
      "match",
      [](const std::filesystem::path& cloud, const std::filesystem::path& template_dir,
         const std::filesystem::path& out, std::optional<std::filesystem::path> config) {
        const registration::ProbePose p = pipeline::cmd_match(cloud, template_dir, out, options_from(config, std::nullopt));
        py::dict d;
        d["position_m"] = p.position;
        d["normal"] = p.normal;
        d["fitness"] = p.outcome.fitness;
        d["scale"] = p.outcome.scale_used;
        d["converged"] = p.converged;
        return d;
      },
      py::arg("cloud"), py::arg("template_dir"), py::arg("out_path"), py::arg("config") = py::none());
}
