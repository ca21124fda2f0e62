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

#ifndef LIDARPROBE_PIPELINE_HPP
#define LIDARPROBE_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/config.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/preprocess.hpp"
#include "lidarprobe/reconstruction.hpp"
#include "lidarprobe/registration.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::pipeline {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const fs::path& path);

/// Provenance record written next to every stage output as
/// `<stage>.manifest.json`. Directory inputs are hashed file by file in
/// sorted relative-path order. Input entries keep the directory name as a
/// prefix and output entries are relative to the output directory. No timestamps or absolute paths are stored.
struct Manifest {
  std::string stage;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::string config_sha256;
  std::uint64_t seed = 0;
};

nlohmann::json manifest_json(const Manifest& manifest);
void write_manifest(const fs::path& dir, const Manifest& manifest);

struct StageOptions {
  PipelineConfig config;
  std::optional<fs::path> debug_dir;
};

/// Builds a template from a phantom without arms or marker: simulated sweep,
/// reconstruction with the true extrinsics, preprocessing. p_T is the
/// analytic PMI.
registration::TemplateModel build_template(const simulator::SimScenario& scenario,
                                           const preprocess::PreprocessConfig& cfg);

/// Extrinsics (lidar -> tcp) from a calibration report or any JSON with an
/// `extrinsics` transform (e.g. a simulator truth.json).
RigidTransform load_extrinsics(const fs::path& path);

/// Reconstruction plus preprocessing, with per-point sensor origins used to
/// orient normals.
struct SurfaceResult {
  reconstruction::AccumulatedSweeps raw;
  preprocess::PreprocessStages stages;
};
SurfaceResult reconstruct_surface(const std::vector<reconstruction::SweepRecording>& recordings,
                                  const RigidTransform& extrinsics, const preprocess::PreprocessConfig& cfg);

/// Viewpoint used to sign the probe normal: one meter along the target normal
/// nearest to p_S (or straight up when the target has no normals).
Vec3 probe_viewpoint(const PointCloud& target, const Vec3& p_s);

struct MatchResult {
  registration::ScaleLoopResult match;
  registration::ProbePose pose;
};
MatchResult match_template(const registration::TemplateModel& model, const PointCloud& target,
                           const registration::RegistrationConfig& cfg);

// Stage commands. Each writes its outputs plus a manifest.
void cmd_simulate(const fs::path& scenario_path, const fs::path& out_dir, const StageOptions& opts,
                  std::optional<std::uint64_t> seed_override);
calibration::CalibrationReport cmd_calibrate(const fs::path& dataset_dir, const fs::path& out_path,
                                             const StageOptions& opts);
/// Writes raw_cloud.ply and raw_origins.ply into out_dir.
void cmd_reconstruct(const fs::path& recording_dir, const fs::path& extrinsics_path, const fs::path& out_dir,
                     const StageOptions& opts);
/// Sensor origins default to raw_origins.ply beside the raw cloud; without
/// them normals are oriented toward the cloud centroid lifted by one meter.
void cmd_preprocess(const fs::path& raw_cloud, const std::optional<fs::path>& origins, const fs::path& out_path,
                    const StageOptions& opts);
registration::ProbePose cmd_match(const fs::path& cloud_path, const fs::path& template_dir,
                                  const fs::path& out_path, const StageOptions& opts);
/// Writes surface_error.json and distance_histogram.csv.
metrics::SurfaceErrorReport cmd_eval_clouds(const fs::path& source, const fs::path& reference,
                                            const fs::path& out_dir, const StageOptions& opts);
/// Reads `subject,trial,e_parallel_mm` rows; writes repeatability.json and per_subject.csv.
metrics::RepeatabilityReport cmd_eval_trials(const fs::path& trials_csv, const fs::path& out_dir,
                                             const StageOptions& opts);

/// Parses a trials CSV into subjects (first-appearance order) x trials (sorted by trial id).
std::vector<std::vector<double>> read_trials_csv(const fs::path& path, std::vector<std::string>* subjects);

}  // namespace lidarprobe::pipeline

#endif  // LIDARPROBE_PIPELINE_HPP
