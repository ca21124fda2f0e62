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

#ifndef LIDARPROBE_REPRODUCE_HPP
#define LIDARPROBE_REPRODUCE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lidarprobe/config.hpp"
#include "lidarprobe/registration.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::reproduce {

/// Derives a per-run seed from the study seed and run coordinates.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t study, std::uint64_t a, std::uint64_t b = 0);

struct CalibrationRun {
  double noise_mm = 0.0;
  int repetition = 0;
  double overall_rms_mm = 0.0;
  double mean_per_pose_rms_mm = 0.0;
  Vec3 translation_error_mm = Vec3::Zero();
  double rotation_error_deg = 0.0;
  Vec3 rotation_error_axis_deg = Vec3::Zero();
  Vec3 translation_sigma_mm = Vec3::Zero();
  Vec3 rotation_sigma_deg = Vec3::Zero();
  int iterations = 0;
  bool converged = false;
};

/// One simulated calibration session and solve with the default extrinsics.
CalibrationRun run_calibration_trial(double noise_m, std::uint64_t seed, const calibration::SolverConfig& solver,
                                     calibration::CalibrationResult* result = nullptr);

struct SweepConfiguration {
  std::string name;
  simulator::SweepSessionConfig sweep;
};

/// The five sensor configurations of the surface study.
std::vector<SweepConfiguration> sweep_configurations();

struct SurfaceRun {
  std::string phantom;
  std::string configuration;
  std::size_t raw_points = 0;
  std::size_t output_points = 0;
  double e_rmse_mm = 0.0;
  double e_95_mm = 0.0;
  double coverage = 0.0;
  double f_icp = 0.0;
  double e_icp_mm = 0.0;
  double chest_fraction = 0.0;
};

SurfaceRun run_surface_trial(simulator::PhantomKind kind, const SweepConfiguration& config, double noise_m,
                             const RigidTransform& extrinsics, std::uint64_t seed, const PipelineConfig& cfg);

struct Subject {
  std::string name;
  simulator::PhantomParams phantom;
};

/// Five phantom subjects (three male, two female) with a marker sphere at the PMI.
std::vector<Subject> repeatability_subjects();

/// Default male or female template, built deterministically from `seed`.
registration::TemplateModel default_template(simulator::PhantomKind kind, std::uint64_t seed,
                                             const preprocess::PreprocessConfig& cfg);

struct ProbeTrial {
  std::string subject;
  int trial = 0;
  double e_parallel_mm = 0.0;
  double pmi_distance_mm = 0.0;
  double normal_error_deg = 0.0;
  double fitness = 0.0;
  double inlier_rmse_mm = 0.0;
  double scale = 1.0;
  bool converged = false;
};

ProbeTrial run_probe_trial(const Subject& subject, const registration::TemplateModel& model, int trial,
                           double noise_m, const RigidTransform& extrinsics, std::uint64_t seed,
                           const PipelineConfig& cfg);

struct ReproduceReport {
  std::vector<CalibrationRun> calibration;
  std::vector<std::size_t> residual_histogram;
  double residual_histogram_lo_mm = -6.0;
  double residual_histogram_width_mm = 0.5;
  std::size_t residual_underflow = 0;
  std::size_t residual_overflow = 0;
  RigidTransform calibrated_extrinsics = simulator::default_true_extrinsics();
  std::vector<SurfaceRun> surface;
  std::vector<ProbeTrial> probe;
  std::vector<std::string> subjects;
  metrics::RepeatabilityReport repeatability;
  bool has_repeatability = false;
};

ReproduceReport run_reproduce(const PipelineConfig& cfg);

/// Writes report.md, summary.json and the CSV tables. File names only; no
/// timestamps, so identical reports produce identical bytes.
void write_bundle(const std::filesystem::path& dir, const ReproduceReport& report, const PipelineConfig& cfg);

}  // namespace lidarprobe::reproduce

#endif  // LIDARPROBE_REPRODUCE_HPP
