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

#include "lidarprobe/config.hpp"

#include <cmath>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/json_reader.hpp"
#include "lidarprobe/pipeline.hpp"

namespace lidarprobe {

void PipelineConfig::validate() const {
  if (threads < 0) fail(ErrorKind::kInvalidInput, "config: threads must be >= 0");
  calibration.validate();
  preprocess.validate();
  registration.validate();
  if (!(metrics.coverage_tolerance > 0.0)) {
    fail(ErrorKind::kInvalidInput, "config: metrics.coverage_tolerance must be positive");
  }
  if (reproduce.calibration_noise_mm.empty()) {
    fail(ErrorKind::kInvalidInput, "config: reproduce.calibration_noise_mm must not be empty");
  }
  for (double n : reproduce.calibration_noise_mm) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      fail(ErrorKind::kInvalidInput, "config: reproduce.calibration_noise_mm entries must be >= 0");
    }
  }
  if (reproduce.calibration_repetitions < 1) {
    fail(ErrorKind::kInvalidInput, "config: reproduce.calibration_repetitions must be >= 1");
  }
  if (reproduce.trials_per_subject < 2) {
    fail(ErrorKind::kInvalidInput, "config: reproduce.trials_per_subject must be >= 2");
  }
  if (!(reproduce.surface_noise_mm >= 0.0) || !(reproduce.repeatability_noise_mm >= 0.0)) {
    fail(ErrorKind::kInvalidInput, "config: reproduce noise levels must be >= 0");
  }
}

void update_from_json(const nlohmann::json& j, PipelineConfig& cfg) {
  JsonObjectReader r(j, "config");
  r.get("seed", cfg.seed);
  r.get("threads", cfg.threads);
  if (const nlohmann::json* c = r.child("calibration")) calibration::update_from_json(*c, cfg.calibration);
  if (const nlohmann::json* c = r.child("preprocess")) preprocess::update_from_json(*c, cfg.preprocess);
  if (const nlohmann::json* c = r.child("registration")) registration::update_from_json(*c, cfg.registration);
  if (const nlohmann::json* c = r.child("metrics")) {
    JsonObjectReader m(*c, "config.metrics");
    m.get("coverage_tolerance", cfg.metrics.coverage_tolerance);
    std::string form;
    if (m.get("icc_form", form)) cfg.metrics.icc_form = metrics::icc_form_from_string(form);
    m.finish();
  }
  if (const nlohmann::json* c = r.child("reproduce")) {
    JsonObjectReader m(*c, "config.reproduce");
    m.get("calibration_noise_mm", cfg.reproduce.calibration_noise_mm);
    m.get("calibration_repetitions", cfg.reproduce.calibration_repetitions);
    m.get("surface_noise_mm", cfg.reproduce.surface_noise_mm);
    m.get("repeatability_noise_mm", cfg.reproduce.repeatability_noise_mm);
    m.get("trials_per_subject", cfg.reproduce.trials_per_subject);
    if (const nlohmann::json* s = m.child("studies")) {
      JsonObjectReader t(*s, "config.reproduce.studies");
      t.get("calibration", cfg.reproduce.studies.calibration);
      t.get("surface", cfg.reproduce.studies.surface);
      t.get("repeatability", cfg.reproduce.studies.repeatability);
      t.finish();
    }
    m.finish();
  }
  std::string template_dir;
  if (r.get("template_dir", template_dir)) cfg.template_dir = template_dir;
  r.finish();
  cfg.validate();
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"seed", cfg.seed},
          {"threads", cfg.threads},
          {"calibration", calibration::to_json(cfg.calibration)},
          {"preprocess", preprocess::to_json(cfg.preprocess)},
          {"registration", registration::to_json(cfg.registration)},
          {"metrics",
           {{"coverage_tolerance", cfg.metrics.coverage_tolerance},
            {"icc_form", metrics::to_string(cfg.metrics.icc_form)}}},
          {"reproduce",
           {{"calibration_noise_mm", cfg.reproduce.calibration_noise_mm},
            {"calibration_repetitions", cfg.reproduce.calibration_repetitions},
            {"surface_noise_mm", cfg.reproduce.surface_noise_mm},
            {"repeatability_noise_mm", cfg.reproduce.repeatability_noise_mm},
            {"trials_per_subject", cfg.reproduce.trials_per_subject},
            {"studies",
             {{"calibration", cfg.reproduce.studies.calibration},
              {"surface", cfg.reproduce.studies.surface},
              {"repeatability", cfg.reproduce.studies.repeatability}}}}},
          {"template_dir", cfg.template_dir.string()}};
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig cfg;
  update_from_json(io::read_json(path), cfg);
  return cfg;
}

std::string config_hash(const PipelineConfig& cfg) { return pipeline::sha256_hex(to_json(cfg).dump()); }

}  // namespace lidarprobe
