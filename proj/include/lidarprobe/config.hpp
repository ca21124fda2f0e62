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

#ifndef LIDARPROBE_CONFIG_HPP
#define LIDARPROBE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/preprocess.hpp"
#include "lidarprobe/registration.hpp"

namespace lidarprobe {

struct MetricsConfig {
  double coverage_tolerance = 0.008;
  metrics::IccForm icc_form = metrics::IccForm::kOneWayRandom;
};

struct StudyToggles {
  bool calibration = true;
  bool surface = true;
  bool repeatability = true;
};

struct ReproduceConfig {
  std::vector<double> calibration_noise_mm{0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
  int calibration_repetitions = 5;
  double surface_noise_mm = 2.0;
  double repeatability_noise_mm = 2.0;
  int trials_per_subject = 3;
  StudyToggles studies;
};

/// Every tunable of every stage. Unknown keys are rejected at load time.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;
  calibration::SolverConfig calibration;
  preprocess::PreprocessConfig preprocess;
  registration::RegistrationConfig registration;
  MetricsConfig metrics;
  ReproduceConfig reproduce;
  std::filesystem::path template_dir;

  void validate() const;
};

void update_from_json(const nlohmann::json& j, PipelineConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON serialization.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace lidarprobe

#endif  // LIDARPROBE_CONFIG_HPP
