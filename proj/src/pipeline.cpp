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

#include "lidarprobe/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/mesh.hpp"

namespace lidarprobe::pipeline {

namespace {

std::string to_hex(const unsigned char* data, unsigned int len) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(data[i]);
  return os.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      fail(ErrorKind::kInternal, "SHA-256 initialization failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx_, data, len) != 1) fail(ErrorKind::kInternal, "SHA-256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) fail(ErrorKind::kInternal, "SHA-256 finalization failed");
    return to_hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool is_manifest(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > 14 && name.ends_with(".manifest.json");
}

nlohmann::json hash_entries(const fs::path& p, bool keep_root) {
  nlohmann::json out = nlohmann::json::array();
  if (fs::is_directory(p)) {
    for (const fs::path& f : sorted_files(p)) {
      if (is_manifest(f)) continue;
      const fs::path rel = keep_root ? p.filename() / fs::relative(f, p) : fs::relative(f, p);
      out.push_back({{"path", rel.generic_string()}, {"sha256", file_sha256(f)}});
    }
  } else {
    out.push_back({{"path", p.filename().generic_string()}, {"sha256", file_sha256(p)}});
  }
  return out;
}

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) fail(ErrorKind::kIo, std::string(what) + " not found: '" + p.string() + "'");
}

void write_stage(const fs::path& dir, const std::string& name, const PointCloud& cloud) {
  io::write_ply(dir / name, cloud, io::PlyFormat::kBinaryLittleEndian);
}

PointCloud sensor_origin_cloud(const reconstruction::AccumulatedSweeps& raw) {
  return PointCloud(raw.sensor_origins, raw.cloud.frame());
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for hashing");
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize n = in.gcount();
    if (n > 0) h.update(buf.data(), static_cast<std::size_t>(n));
  }
  return h.hex();
}

nlohmann::json manifest_json(const Manifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const fs::path& p : m.inputs) {
    for (auto& e : hash_entries(p, true)) inputs.push_back(e);
  }
  nlohmann::json outputs = nlohmann::json::array();
  for (const fs::path& p : m.outputs) {
    for (auto& e : hash_entries(p, false)) outputs.push_back(e);
  }
  return {{"format", "lidarprobe.manifest/1"},
          {"stage", m.stage},
          {"version", LIDARPROBE_VERSION},
          {"config_sha256", m.config_sha256},
          {"seed", m.seed},
          {"inputs", inputs},
          {"outputs", outputs}};
}

void write_manifest(const fs::path& dir, const Manifest& manifest) {
  io::write_json(dir / (manifest.stage + ".manifest.json"), manifest_json(manifest));
}

registration::TemplateModel build_template(const simulator::SimScenario& scenario,
                                           const preprocess::PreprocessConfig& cfg) {
  simulator::PhantomParams params = scenario.phantom;
  params.with_arms = false;
  params.with_marker = false;
  const simulator::Phantom phantom = simulator::generate_phantom(params);
  if (!phantom.pmi) fail(ErrorKind::kInvalidInput, "template phantoms must be chest phantoms");
  const mesh::RayCaster caster(phantom.mesh);
  const simulator::SweepSession session = simulator::run_sweep_session(
      phantom, caster, scenario.sensor, scenario.true_extrinsics, scenario.sweep, scenario.seed);
  const SurfaceResult surface = reconstruct_surface(session.recordings, scenario.true_extrinsics, cfg);
  registration::TemplateModel model;
  model.cloud = surface.stages.surface;
  model.cloud.set_frame(FrameId::template_frame());
  model.probe_point = *phantom.pmi;
  model.sex_variant = params.kind == simulator::PhantomKind::kFemale ? registration::SexVariant::kFemale
                                                                      : registration::SexVariant::kMale;
  model.name = scenario.template_name.empty() ? simulator::to_string(params.kind) : scenario.template_name;
  model.voxel_size = cfg.voxel_size;
  model.validate();
  return model;
}

RigidTransform load_extrinsics(const fs::path& path) {
  const nlohmann::json j = io::read_json(path);
  if (!j.is_object() || !j.contains("extrinsics")) {
    fail(ErrorKind::kInvalidInput, "'" + path.string() + "' has no 'extrinsics' transform");
  }
  const RigidTransform x = io::transform_from_json(j.at("extrinsics"));
  if (x.from_frame() != FrameId::lidar() || x.to_frame() != FrameId::tcp()) {
    fail(ErrorKind::kFrame, "extrinsics in '" + path.string() + "' must map lidar -> tcp");
  }
  return x;
}

SurfaceResult reconstruct_surface(const std::vector<reconstruction::SweepRecording>& recordings,
                                  const RigidTransform& extrinsics, const preprocess::PreprocessConfig& cfg) {
  SurfaceResult out;
  out.raw = reconstruction::accumulate_sweeps_detailed(recordings, extrinsics);
  const preprocess::ViewpointField field(out.raw.cloud.points(), out.raw.sensor_origins);
  out.stages = preprocess::preprocess_pipeline_stages(out.raw.cloud, cfg, field);
  return out;
}

Vec3 probe_viewpoint(const PointCloud& target, const Vec3& p_s) {
  if (!target.has_normals() || target.empty()) return p_s + Vec3::UnitZ();
  const NeighborIndex index(target);
  return p_s + target.normals()[index.nearest(p_s).index];
}

MatchResult match_template(const registration::TemplateModel& model, const PointCloud& target,
                           const registration::RegistrationConfig& cfg) {
  MatchResult out;
  out.match = registration::match_with_scale_loop(model, target, cfg);
  const Vec3 p_s = registration::transfer_probe_point(out.match.outcome, out.match.variant, target);
  out.pose = registration::probe_pose(out.match, target, cfg.probe_k, probe_viewpoint(target, p_s));
  return out;
}

void cmd_simulate(const fs::path& scenario_path, const fs::path& out_dir, const StageOptions& opts,
                  std::optional<std::uint64_t> seed_override) {
  require_exists(scenario_path, "scenario file");
  simulator::SimScenario scenario = simulator::scenario_from_json(io::read_json(scenario_path));
  if (seed_override) scenario.seed = *seed_override;
  fs::create_directories(out_dir);
  switch (scenario.kind) {
    case simulator::ScenarioKind::kCalibration: {
      const simulator::CalibrationSession session = simulator::run_calibration_session(
          scenario.phantom, scenario.sensor, scenario.true_extrinsics, scenario.calibration, scenario.seed);
      simulator::write_calibration_session(out_dir, session, scenario.sensor);
      break;
    }
    case simulator::ScenarioKind::kSweep: {
      const simulator::Phantom phantom = simulator::generate_phantom(scenario.phantom);
      const mesh::RayCaster caster(phantom.mesh);
      const simulator::SweepSession session = simulator::run_sweep_session(
          phantom, caster, scenario.sensor, scenario.true_extrinsics, scenario.sweep, scenario.seed);
      simulator::write_sweep_session(out_dir, session, phantom, scenario.sensor);
      break;
    }
    case simulator::ScenarioKind::kTemplate:
      registration::write_template(out_dir, build_template(scenario, opts.config.preprocess));
      break;
  }
  io::write_json(out_dir / "scenario.json", simulator::to_json(scenario));
  write_manifest(out_dir, {"simulate", {scenario_path}, {out_dir}, config_hash(opts.config), scenario.seed});
}

calibration::CalibrationReport cmd_calibrate(const fs::path& dataset_dir, const fs::path& out_path,
                                             const StageOptions& opts) {
  require_exists(dataset_dir, "calibration dataset");
  const calibration::CalibrationDataset ds = calibration::load_calibration_dataset(dataset_dir, opts.config.calibration);
  const auto obs = calibration::prepare_observations(ds.poses, ds.sector, ds.solver);
  std::optional<calibration::CalibrationParams> init;
  if (ds.mount_guess) init = calibration::initial_params(obs, *ds.mount_guess);
  const calibration::CalibrationResult result = calibration::solve_extrinsics(obs, init, ds.solver);
  const calibration::CalibrationReport report = calibration::calibration_report(result);
  const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  io::write_json(out_path, report.to_json());
  const fs::path residuals = dir / (out_path.stem().string() + "_residuals.csv");
  io::write_text(residuals, calibration::residuals_csv(result));
  write_manifest(dir, {"calibrate", {dataset_dir}, {out_path, residuals}, config_hash(opts.config),
                       opts.config.seed});
  return report;
}

void cmd_reconstruct(const fs::path& recording_dir, const fs::path& extrinsics_path, const fs::path& out_dir,
                     const StageOptions& opts) {
  require_exists(recording_dir, "recording directory");
  require_exists(extrinsics_path, "extrinsics file");
  const RigidTransform x = load_extrinsics(extrinsics_path);
  const auto recordings = reconstruction::read_recordings(recording_dir);
  const reconstruction::AccumulatedSweeps raw = reconstruction::accumulate_sweeps_detailed(recordings, x);
  fs::create_directories(out_dir);
  write_stage(out_dir, "raw_cloud.ply", raw.cloud);
  write_stage(out_dir, "raw_origins.ply", sensor_origin_cloud(raw));
  if (opts.debug_dir) {
    fs::create_directories(*opts.debug_dir);
    write_stage(*opts.debug_dir, "a_raw.ply", raw.cloud);
  }
  write_manifest(out_dir, {"reconstruct", {recording_dir, extrinsics_path},
                           {out_dir / "raw_cloud.ply", out_dir / "raw_origins.ply"}, config_hash(opts.config),
                           opts.config.seed});
}

void cmd_preprocess(const fs::path& raw_cloud, const std::optional<fs::path>& origins, const fs::path& out_path,
                    const StageOptions& opts) {
  require_exists(raw_cloud, "raw cloud");
  const PointCloud raw = io::read_cloud(raw_cloud);
  fs::path origin_path = origins ? *origins : raw_cloud.parent_path() / "raw_origins.ply";
  std::vector<fs::path> inputs{raw_cloud};
  std::optional<preprocess::ViewpointField> field;
  if (fs::exists(origin_path)) {
    const PointCloud o = io::read_cloud(origin_path);
    if (o.size() != raw.size()) {
      fail(ErrorKind::kInvalidInput, "sensor origin count does not match the raw cloud");
    }
    field.emplace(raw.points(), o.points());
    inputs.push_back(origin_path);
  } else if (origins) {
    fail(ErrorKind::kIo, "sensor origins not found: '" + origin_path.string() + "'");
  } else {
    field.emplace(raw.empty() ? Vec3(Vec3::UnitZ()) : Vec3(raw.centroid() + Vec3::UnitZ()));
  }
  const preprocess::PreprocessStages st = preprocess::preprocess_pipeline_stages(raw, opts.config.preprocess, *field);
  const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_stage(dir, out_path.filename().string(), st.surface);
  if (opts.debug_dir) {
    const fs::path& d = *opts.debug_dir;
    fs::create_directories(d);
    write_stage(d, "a_raw.ply", raw);
    write_stage(d, "b1_downsampled.ply", st.downsampled);
    write_stage(d, "b2_statistical_outliers_removed.ply", st.sor);
    write_stage(d, "b3_radius_outliers_removed.ply", st.ror);
    write_stage(d, "b4_largest_cluster.ply", st.cluster);
    write_stage(d, "b5_surface.ply", st.surface);
  }
  write_manifest(dir, {"preprocess", inputs, {out_path}, config_hash(opts.config), opts.config.seed});
}

registration::ProbePose cmd_match(const fs::path& cloud_path, const fs::path& template_dir,
                                  const fs::path& out_path, const StageOptions& opts) {
  require_exists(cloud_path, "target cloud");
  require_exists(template_dir, "template directory");
  PointCloud target = io::read_cloud(cloud_path);
  target.set_frame(FrameId::base());
  const registration::TemplateModel model = registration::read_template(template_dir);
  const MatchResult r = match_template(model, target, opts.config.registration);
  const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  io::write_json(out_path, registration::to_json(r.pose, r.match));
  if (opts.debug_dir) {
    fs::create_directories(*opts.debug_dir);
    write_stage(*opts.debug_dir, "c_aligned_template.ply",
                transform_cloud(r.match.outcome.transform, r.match.variant.cloud));
    io::write_json(*opts.debug_dir / "d_probe_pose.json", registration::to_json(r.pose, r.match));
  }
  write_manifest(dir, {"match", {cloud_path, template_dir}, {out_path}, config_hash(opts.config),
                       opts.config.seed});
  return r.pose;
}

metrics::SurfaceErrorReport cmd_eval_clouds(const fs::path& source, const fs::path& reference,
                                            const fs::path& out_dir, const StageOptions& opts) {
  require_exists(source, "source cloud");
  require_exists(reference, "reference cloud");
  const PointCloud src = io::read_cloud(source);
  const PointCloud ref = io::read_cloud(reference);
  const metrics::SurfaceErrorReport rep =
      metrics::surface_error(src, ref, opts.config.metrics.coverage_tolerance);
  fs::create_directories(out_dir);
  io::write_json(out_dir / "surface_error.json",
                 {{"format", "lidarprobe.surface-error/1"},
                  {"source_points", src.size()},
                  {"reference_points", ref.size()},
                  {"e_rmse_mm", rep.e_rmse * 1e3},
                  {"e_95_mm", rep.e_95 * 1e3},
                  {"coverage", rep.coverage},
                  {"coverage_tolerance_mm", rep.tolerance * 1e3}});
  std::vector<double> mm(rep.per_point_distances.size());
  for (std::size_t i = 0; i < mm.size(); ++i) mm[i] = rep.per_point_distances[i] * 1e3;
  const metrics::Histogram h = metrics::centered_histogram(mm, 0.0, 20.0, 0.5);
  std::ostringstream csv;
  csv << "bin_center_mm,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    csv << io::format_double(h.center_lo + static_cast<double>(i) * h.bin_width) << ',' << h.counts[i] << '\n';
  }
  csv << "overflow," << h.overflow << '\n';
  io::write_text(out_dir / "distance_histogram.csv", csv.str());
  write_manifest(out_dir, {"eval", {source, reference},
                           {out_dir / "surface_error.json", out_dir / "distance_histogram.csv"},
                           config_hash(opts.config), opts.config.seed});
  return rep;
}

std::vector<std::vector<double>> read_trials_csv(const fs::path& path, std::vector<std::string>* subjects) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kInvalidInput, "trials CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject,trial,e_parallel_mm") {
    fail(ErrorKind::kInvalidInput, "trials CSV header must be 'subject,trial,e_parallel_mm'");
  }
  std::vector<std::string> order;
  std::map<std::string, std::map<long, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 3) {
      fail(ErrorKind::kInvalidInput, "trials CSV line " + std::to_string(lineno) + ": expected 3 fields");
    }
    long trial = 0;
    double value = 0.0;
    try {
      std::size_t pos = 0;
      trial = std::stol(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument("trailing");
      value = std::stod(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidInput, "trials CSV line " + std::to_string(lineno) + ": malformed number");
    }
    if (!rows.count(fields[0])) order.push_back(fields[0]);
    if (!rows[fields[0]].emplace(trial, value).second) {
      fail(ErrorKind::kInvalidInput, "trials CSV line " + std::to_string(lineno) + ": duplicate trial");
    }
  }
  std::vector<std::vector<double>> out;
  for (const std::string& s : order) {
    std::vector<double> v;
    for (const auto& [trial, value] : rows[s]) v.push_back(value);
    out.push_back(std::move(v));
  }
  if (subjects != nullptr) *subjects = order;
  return out;
}

metrics::RepeatabilityReport cmd_eval_trials(const fs::path& trials_csv, const fs::path& out_dir,
                                             const StageOptions& opts) {
  require_exists(trials_csv, "trials CSV");
  std::vector<std::string> subjects;
  const auto trials = read_trials_csv(trials_csv, &subjects);
  const metrics::RepeatabilityReport rep = metrics::repeatability(trials, opts.config.metrics.icc_form);
  fs::create_directories(out_dir);
  nlohmann::json per_subject = nlohmann::json::array();
  std::ostringstream csv;
  csv << "subject,trial,e_parallel_mm,subject_mean_mm,subject_sd_mm\n";
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    per_subject.push_back({{"subject", subjects[s]},
                           {"mean_mm", rep.per_subject_mean[s]},
                           {"sd_mm", rep.per_subject_sd[s]},
                           {"trials_mm", trials[s]}});
    for (std::size_t t = 0; t < trials[s].size(); ++t) {
      csv << subjects[s] << ',' << t + 1 << ',' << io::format_double(trials[s][t]) << ','
          << io::format_double(rep.per_subject_mean[s]) << ',' << io::format_double(rep.per_subject_sd[s]) << '\n';
    }
  }
  io::write_json(out_dir / "repeatability.json", {{"format", "lidarprobe.repeatability/1"},
                                                  {"icc_form", metrics::to_string(rep.form)},
                                                  {"icc", rep.icc},
                                                  {"ms_between", rep.ms_between},
                                                  {"ms_within", rep.ms_within},
                                                  {"subjects", per_subject}});
  io::write_text(out_dir / "per_subject.csv", csv.str());
  write_manifest(out_dir, {"eval", {trials_csv}, {out_dir / "repeatability.json", out_dir / "per_subject.csv"},
                           config_hash(opts.config), opts.config.seed});
  return rep;
}

}  // namespace lidarprobe::pipeline
