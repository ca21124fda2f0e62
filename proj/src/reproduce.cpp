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

#include "lidarprobe/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/mesh.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/neighbor_index.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/pipeline.hpp"

namespace lidarprobe::reproduce {

namespace {

constexpr std::uint64_t kCalibrationStudy = 1;
constexpr std::uint64_t kSurfaceStudy = 2;
constexpr std::uint64_t kProbeStudy = 3;
constexpr std::uint64_t kReferenceCalibration = 4;
constexpr double kReferenceCalibrationNoise = 0.0015;

// Reference values from a hardware mannequin study and human trials, shown
// beside the simulated results.
constexpr const char* kRefRmse = "2.78 ± 0.21";
constexpr const char* kRefE95 = "4.86 ± 0.36";
constexpr const char* kRefCoverage = "96.8";
constexpr const char* kRefFitness = "0.976 ± 0.012";
constexpr const char* kRefIcpRmse = "2.82";
constexpr double kRefSubjectMean[5] = {26.32, 24.48, 28.00, 23.75, 26.14};
constexpr double kRefSubjectSd[5] = {3.93, 2.81, 0.30, 3.15, 1.72};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) {
    if (!s.empty() && s[0] == '-') s.erase(0, 1);
  }
  return s;
}

std::string num(double v) { return io::format_double(v); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

simulator::PhantomParams scaled_chest(simulator::PhantomKind kind, double width, double length, double height) {
  simulator::PhantomParams p = simulator::default_phantom(kind);
  p.chest.half_width = width;
  p.chest.half_length = length;
  p.chest.half_height = height;
  p.with_marker = true;
  return p;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t study, std::uint64_t a, std::uint64_t b) {
  CounterRng rng(seed, study, (a << 20) ^ b);
  return rng.next();
}

CalibrationRun run_calibration_trial(double noise_m, std::uint64_t seed, const calibration::SolverConfig& solver,
                                     calibration::CalibrationResult* result) {
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise_m;
  const simulator::PhantomParams board = simulator::default_phantom(simulator::PhantomKind::kPlate);
  const simulator::CalibrationSession session = simulator::run_calibration_session(
      board, sensor, simulator::default_true_extrinsics(), simulator::CalibrationSessionConfig{}, seed);
  const auto obs = calibration::prepare_observations(session.poses, session.sector, solver);
  const calibration::CalibrationResult res =
      calibration::solve_extrinsics(obs, calibration::initial_params(obs, session.mount_guess), solver);
  CalibrationRun run;
  run.noise_mm = noise_m * 1e3;
  run.overall_rms_mm = res.overall_rms * 1e3;
  run.mean_per_pose_rms_mm = mean_of(res.per_pose_rms) * 1e3;
  run.translation_error_mm = (res.extrinsics.translation() - session.true_extrinsics.translation()) * 1e3;
  const Vec3 dw = so3_log(session.true_extrinsics.rotation().transpose() * res.extrinsics.rotation());
  run.rotation_error_deg = rad2deg(dw.norm());
  run.rotation_error_axis_deg = dw * (180.0 / kPi);
  run.translation_sigma_mm = res.translation_sigma * 1e3;
  run.rotation_sigma_deg = res.rotation_sigma * (180.0 / kPi);
  run.iterations = res.iterations;
  run.converged = res.converged;
  if (result != nullptr) *result = res;
  return run;
}

std::vector<SweepConfiguration> sweep_configurations() {
  std::vector<SweepConfiguration> out;
  simulator::SweepSessionConfig base;
  out.push_back({"C1 clearance 300 mm, roll 10 deg", base});
  simulator::SweepSessionConfig c = base;
  c.clearance = 0.25;
  out.push_back({"C2 clearance 250 mm, roll 10 deg", c});
  c = base;
  c.clearance = 0.35;
  out.push_back({"C3 clearance 350 mm, roll 10 deg", c});
  c = base;
  c.roll_deg = 0.0;
  out.push_back({"C4 clearance 300 mm, roll 0 deg", c});
  c = base;
  c.roll_deg = 15.0;
  c.speed = 0.08;
  out.push_back({"C5 clearance 300 mm, roll 15 deg, 80 mm/s", c});
  return out;
}

SurfaceRun run_surface_trial(simulator::PhantomKind kind, const SweepConfiguration& config, double noise_m,
                             const RigidTransform& extrinsics, std::uint64_t seed, const PipelineConfig& cfg) {
  const simulator::Phantom phantom = simulator::generate_phantom(simulator::default_phantom(kind));
  const mesh::RayCaster caster(phantom.mesh);
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise_m;
  const simulator::SweepSession session = simulator::run_sweep_session(
      phantom, caster, sensor, simulator::default_true_extrinsics(), config.sweep, seed);
  const pipeline::SurfaceResult surface = pipeline::reconstruct_surface(session.recordings, extrinsics, cfg.preprocess);
  const PointCloud& out = surface.stages.surface;
  const PointCloud gt = simulator::ground_truth_cloud(phantom);
  const metrics::SurfaceErrorReport e = metrics::surface_error(out, gt, cfg.metrics.coverage_tolerance);

  const registration::PreparedTarget target(gt, cfg.registration, false);
  const registration::RegistrationOutcome icp = registration::icp_refine(
      out, target, RigidTransform::identity(out.frame(), gt.frame()), cfg.registration);

  const mesh::LabeledSamples scene = simulator::labeled_scene(phantom);
  const NeighborIndex scene_index{std::span<const Vec3>(scene.points)};
  std::size_t chest = 0;
  for (const Vec3& p : out.points()) {
    if (scene.labels[scene_index.nearest(p).index] == mesh::SurfaceLabel::kChest) ++chest;
  }
  SurfaceRun run;
  run.phantom = simulator::to_string(kind);
  run.configuration = config.name;
  run.raw_points = surface.raw.cloud.size();
  run.output_points = out.size();
  run.e_rmse_mm = e.e_rmse * 1e3;
  run.e_95_mm = e.e_95 * 1e3;
  run.coverage = e.coverage;
  run.f_icp = icp.fitness;
  run.e_icp_mm = icp.inlier_rmse * 1e3;
  run.chest_fraction = out.empty() ? 0.0 : static_cast<double>(chest) / static_cast<double>(out.size());
  return run;
}

std::vector<Subject> repeatability_subjects() {
  using simulator::PhantomKind;
  std::vector<Subject> out;
  simulator::PhantomParams s1 = simulator::default_phantom(PhantomKind::kMale);
  s1.with_marker = true;
  out.push_back({"S1", s1});
  out.push_back({"S2", scaled_chest(PhantomKind::kMale, 0.185, 0.24, 0.12)});
  simulator::PhantomParams s3 = scaled_chest(PhantomKind::kMale, 0.158, 0.205, 0.10);
  s3.chest.pectoral_prominence = 0.07;
  out.push_back({"S3", s3});
  simulator::PhantomParams s4 = simulator::default_phantom(PhantomKind::kFemale);
  s4.with_marker = true;
  out.push_back({"S4", s4});
  simulator::PhantomParams s5 = scaled_chest(PhantomKind::kFemale, 0.145, 0.195, 0.095);
  s5.chest.breast_prominence = 0.26;
  out.push_back({"S5", s5});
  return out;
}

registration::TemplateModel default_template(simulator::PhantomKind kind, std::uint64_t seed,
                                             const preprocess::PreprocessConfig& cfg) {
  simulator::SimScenario sc;
  sc.kind = simulator::ScenarioKind::kTemplate;
  sc.seed = seed;
  sc.phantom = simulator::default_phantom(kind);
  sc.phantom.with_arms = false;
  sc.template_name = simulator::to_string(kind);
  return pipeline::build_template(sc, cfg);
}

ProbeTrial run_probe_trial(const Subject& subject, const registration::TemplateModel& model, int trial,
                           double noise_m, const RigidTransform& extrinsics, std::uint64_t seed,
                           const PipelineConfig& cfg) {
  const simulator::Phantom phantom = simulator::generate_phantom(subject.phantom);
  if (!phantom.marker_center || !phantom.chest) {
    fail(ErrorKind::kInvalidInput, "repeatability subjects need a chest phantom with a marker");
  }
  const mesh::RayCaster caster(phantom.mesh);
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise_m;
  const simulator::SweepSession session = simulator::run_sweep_session(
      phantom, caster, sensor, simulator::default_true_extrinsics(), simulator::SweepSessionConfig{}, seed);
  const pipeline::SurfaceResult surface = pipeline::reconstruct_surface(session.recordings, extrinsics, cfg.preprocess);
  const pipeline::MatchResult m = pipeline::match_template(model, surface.stages.surface, cfg.registration);
  const Vec3 p_par = metrics::project_marker(*phantom.marker_center, m.pose.position, m.pose.normal);
  ProbeTrial t;
  t.subject = subject.name;
  t.trial = trial;
  t.e_parallel_mm = metrics::tangential_error(p_par, m.pose.position) * 1e3;
  t.pmi_distance_mm = (m.pose.position - *phantom.pmi).norm() * 1e3;
  const Vec3 truth_normal = phantom.chest->normal(m.pose.position);
  t.normal_error_deg = rad2deg(std::acos(std::clamp(truth_normal.dot(m.pose.normal), -1.0, 1.0)));
  t.fitness = m.match.outcome.fitness;
  t.inlier_rmse_mm = m.match.outcome.inlier_rmse * 1e3;
  t.scale = m.match.outcome.scale_used;
  t.converged = m.match.converged;
  return t;
}

ReproduceReport run_reproduce(const PipelineConfig& cfg) {
  cfg.validate();
  ReproduceReport rep;
  const ReproduceConfig& rc = cfg.reproduce;

  if (rc.studies.calibration) {
    for (std::size_t i = 0; i < rc.calibration_noise_mm.size(); ++i) {
      for (int r = 0; r < rc.calibration_repetitions; ++r) {
        CalibrationRun run = run_calibration_trial(rc.calibration_noise_mm[i] * 1e-3,
                                                   derive_seed(cfg.seed, kCalibrationStudy, i, r), cfg.calibration);
        run.repetition = r;
        rep.calibration.push_back(run);
      }
    }
  }

  calibration::CalibrationResult reference;
  run_calibration_trial(kReferenceCalibrationNoise, derive_seed(cfg.seed, kReferenceCalibration, 0),
                        cfg.calibration, &reference);
  rep.calibrated_extrinsics = reference.extrinsics;
  const metrics::CalibrationStats stats = metrics::calibration_stats(reference.residuals);
  rep.residual_histogram = stats.histogram.counts;
  rep.residual_histogram_lo_mm = stats.histogram.center_lo * 1e3;
  rep.residual_histogram_width_mm = stats.histogram.bin_width * 1e3;
  rep.residual_underflow = stats.histogram.underflow;
  rep.residual_overflow = stats.histogram.overflow;

  if (rc.studies.surface) {
    const auto configs = sweep_configurations();
    const simulator::PhantomKind kinds[2] = {simulator::PhantomKind::kMale, simulator::PhantomKind::kFemale};
    for (int k = 0; k < 2; ++k) {
      for (std::size_t c = 0; c < configs.size(); ++c) {
        rep.surface.push_back(run_surface_trial(kinds[k], configs[c], rc.surface_noise_mm * 1e-3,
                                                rep.calibrated_extrinsics,
                                                derive_seed(cfg.seed, kSurfaceStudy, k, c), cfg));
      }
    }
  }

  if (rc.studies.repeatability) {
    const registration::TemplateModel male = default_template(simulator::PhantomKind::kMale, 0, cfg.preprocess);
    const registration::TemplateModel female = default_template(simulator::PhantomKind::kFemale, 0, cfg.preprocess);
    const auto subjects = repeatability_subjects();
    std::vector<std::vector<double>> matrix;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      const registration::TemplateModel& model =
          subjects[s].phantom.kind == simulator::PhantomKind::kFemale ? female : male;
      std::vector<double> row;
      for (int t = 0; t < rc.trials_per_subject; ++t) {
        ProbeTrial trial = run_probe_trial(subjects[s], model, t + 1, rc.repeatability_noise_mm * 1e-3,
                                           rep.calibrated_extrinsics, derive_seed(cfg.seed, kProbeStudy, s, t), cfg);
        row.push_back(trial.e_parallel_mm);
        rep.probe.push_back(trial);
      }
      matrix.push_back(row);
      rep.subjects.push_back(subjects[s].name);
    }
    rep.repeatability = metrics::repeatability(matrix, cfg.metrics.icc_form);
    rep.has_repeatability = true;
  }
  return rep;
}

void write_bundle(const std::filesystem::path& dir, const ReproduceReport& rep, const PipelineConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::ostringstream md;
  md << "# lidarprobe reproduction report\n\n";
  md << "Seed " << cfg.seed << ". All data are simulated. Reference columns list values measured on "
        "hardware with a mannequin and human volunteers; they are shown for scale and are not targets.\n\n";

  // Calibration study.
  std::ostringstream cal_csv;
  cal_csv << "noise_mm,repetition,overall_rms_mm,mean_per_pose_rms_mm,tx_err_mm,ty_err_mm,tz_err_mm,"
             "rotation_err_deg,sigma_tx_mm,sigma_ty_mm,sigma_tz_mm,sigma_rx_deg,sigma_ry_deg,sigma_rz_deg,"
             "iterations,converged\n";
  for (const CalibrationRun& r : rep.calibration) {
    cal_csv << num(r.noise_mm) << ',' << r.repetition << ',' << num(r.overall_rms_mm) << ','
            << num(r.mean_per_pose_rms_mm) << ',' << num(r.translation_error_mm.x()) << ','
            << num(r.translation_error_mm.y()) << ',' << num(r.translation_error_mm.z()) << ','
            << num(r.rotation_error_deg) << ',' << num(r.translation_sigma_mm.x()) << ','
            << num(r.translation_sigma_mm.y()) << ',' << num(r.translation_sigma_mm.z()) << ','
            << num(r.rotation_sigma_deg.x()) << ',' << num(r.rotation_sigma_deg.y()) << ','
            << num(r.rotation_sigma_deg.z()) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
  }
  if (!rep.calibration.empty()) {
    md << "## Extrinsic calibration recovery\n\n";
    md << "20 poses against a 600 mm x 900 mm planar board, " << cfg.reproduce.calibration_repetitions
       << " seeded sessions per noise level.\n\n";
    md << "| range noise (mm) | overall RMS (mm) | max abs translation error (mm) | max rotation error (deg) "
          "| mean translation sigma (mm) | reference overall RMS (mm) |\n";
    md << "|---|---|---|---|---|---|\n";
    std::vector<double> levels;
    for (const CalibrationRun& r : rep.calibration) {
      if (std::find(levels.begin(), levels.end(), r.noise_mm) == levels.end()) levels.push_back(r.noise_mm);
    }
    for (double level : levels) {
      std::vector<double> rms;
      double max_t = 0.0;
      double max_r = 0.0;
      Vec3 sigma = Vec3::Zero();
      int n = 0;
      for (const CalibrationRun& r : rep.calibration) {
        if (r.noise_mm != level) continue;
        rms.push_back(r.overall_rms_mm);
        max_t = std::max(max_t, r.translation_error_mm.cwiseAbs().maxCoeff());
        max_r = std::max(max_r, r.rotation_error_deg);
        sigma += r.translation_sigma_mm;
        ++n;
      }
      sigma /= n;
      md << "| " << fixed(level, 2) << " | " << fixed(mean_of(rms), 3) << " | " << fixed(max_t, 4) << " | "
         << fixed(max_r, 4) << " | " << fixed(sigma.x(), 3) << ", " << fixed(sigma.y(), 3) << ", "
         << fixed(sigma.z(), 3) << " | " << (level == 1.5 ? "1.82" : "") << " |\n";
    }
    md << '\n';
  }
  io::write_text(dir / "calibration_study.csv", cal_csv.str());

  std::ostringstream hist_csv;
  hist_csv << "bin_center_mm,count\n";
  hist_csv << "underflow," << rep.residual_underflow << '\n';
  for (std::size_t i = 0; i < rep.residual_histogram.size(); ++i) {
    hist_csv << fixed(rep.residual_histogram_lo_mm + static_cast<double>(i) * rep.residual_histogram_width_mm, 2)
             << ',' << rep.residual_histogram[i] << '\n';
  }
  hist_csv << "overflow," << rep.residual_overflow << '\n';
  io::write_text(dir / "calibration_residual_histogram.csv", hist_csv.str());
  md << "## Point-to-plane residual histogram\n\n";
  md << "Reference calibration at 1.5 mm range noise; these extrinsics feed the surface and probe studies. "
        "Bin counts are in `calibration_residual_histogram.csv`.\n\n";
  md << "Recovered translation (mm): " << fixed(rep.calibrated_extrinsics.translation().x() * 1e3, 3) << ", "
     << fixed(rep.calibrated_extrinsics.translation().y() * 1e3, 3) << ", "
     << fixed(rep.calibrated_extrinsics.translation().z() * 1e3, 3) << "\n\n";

  // Surface study.
  std::ostringstream surf_csv;
  surf_csv << "phantom,configuration,raw_points,output_points,e_rmse_mm,e_95_mm,coverage_8mm,f_icp,e_icp_mm,"
              "chest_fraction,reference_e_rmse_mm,reference_e_95_mm,reference_coverage_pct\n";
  for (const SurfaceRun& r : rep.surface) {
    surf_csv << r.phantom << ',' << r.configuration << ',' << r.raw_points << ',' << r.output_points << ','
             << num(r.e_rmse_mm) << ',' << num(r.e_95_mm) << ',' << num(r.coverage) << ',' << num(r.f_icp) << ','
             << num(r.e_icp_mm) << ',' << num(r.chest_fraction) << ',' << kRefRmse << ',' << kRefE95 << ','
             << kRefCoverage << '\n';
  }
  io::write_text(dir / "surface_study.csv", surf_csv.str());
  if (!rep.surface.empty()) {
    md << "## Surface reconstruction accuracy\n\n";
    md << "Range noise " << fixed(cfg.reproduce.surface_noise_mm, 1)
       << " mm. Errors are nearest-neighbor distances from the preprocessed cloud to the dense ground-truth "
          "chest surface, without any extra alignment. f_ICP and e_ICP come from a point-to-plane refinement "
          "against the same surface.\n\n";
    md << "| phantom | configuration | e_RMSE (mm) | e_95 (mm) | c_L at 8 mm (%) | f_ICP | e_ICP (mm) "
          "| chest fraction | reference e_RMSE (mm) | reference e_95 (mm) | reference c_L (%) |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    std::vector<double> rmse, e95, cov, fit, eicp;
    for (const SurfaceRun& r : rep.surface) {
      md << "| " << r.phantom << " | " << r.configuration << " | " << fixed(r.e_rmse_mm, 3) << " | "
         << fixed(r.e_95_mm, 3) << " | " << fixed(100.0 * r.coverage, 2) << " | " << fixed(r.f_icp, 4) << " | "
         << fixed(r.e_icp_mm, 3) << " | " << fixed(r.chest_fraction, 4) << " | " << kRefRmse << " | " << kRefE95
         << " | " << kRefCoverage << " |\n";
      rmse.push_back(r.e_rmse_mm);
      e95.push_back(r.e_95_mm);
      cov.push_back(100.0 * r.coverage);
      fit.push_back(r.f_icp);
      eicp.push_back(r.e_icp_mm);
    }
    md << "| all | mean ± SD | " << fixed(mean_of(rmse), 3) << " ± " << fixed(sd_of(rmse), 3) << " | "
       << fixed(mean_of(e95), 3) << " ± " << fixed(sd_of(e95), 3) << " | " << fixed(mean_of(cov), 2) << " | "
       << fixed(mean_of(fit), 4) << " ± " << fixed(sd_of(fit), 4) << " | " << fixed(mean_of(eicp), 3)
       << " | | " << kRefRmse << " | " << kRefE95 << " | " << kRefCoverage << " |\n\n";
    md << "Reference alignment quality: f_ICP " << kRefFitness << ", e_ICP " << kRefIcpRmse << " mm.\n\n";
  }

  // Probe repeatability.
  std::ostringstream trials_csv;
  trials_csv << "subject,trial,e_parallel_mm\n";
  std::ostringstream detail_csv;
  detail_csv << "subject,trial,e_parallel_mm,pmi_distance_mm,normal_error_deg,fitness,inlier_rmse_mm,scale,"
                "converged\n";
  for (const ProbeTrial& t : rep.probe) {
    trials_csv << t.subject << ',' << t.trial << ',' << num(t.e_parallel_mm) << '\n';
    detail_csv << t.subject << ',' << t.trial << ',' << num(t.e_parallel_mm) << ',' << num(t.pmi_distance_mm)
               << ',' << num(t.normal_error_deg) << ',' << num(t.fitness) << ',' << num(t.inlier_rmse_mm) << ','
               << num(t.scale) << ',' << (t.converged ? 1 : 0) << '\n';
  }
  io::write_text(dir / "repeatability_trials.csv", trials_csv.str());
  io::write_text(dir / "repeatability_detail.csv", detail_csv.str());
  std::ostringstream subj_csv;
  subj_csv << "subject,mean_e_parallel_mm,sd_e_parallel_mm,reference_mean_mm,reference_sd_mm\n";
  if (rep.has_repeatability) {
    md << "## Probe point repeatability\n\n";
    md << cfg.reproduce.trials_per_subject << " re-seeded trials per phantom subject at "
       << fixed(cfg.reproduce.repeatability_noise_mm, 1)
       << " mm range noise. e_par is the tangential distance between the marker and the estimated probe "
          "point.\n\n";
    md << "| subject | e_par mean (mm) | e_par SD (mm) | mean fitness | scales | reference mean ± SD (mm) |\n";
    md << "|---|---|---|---|---|---|\n";
    for (std::size_t s = 0; s < rep.subjects.size(); ++s) {
      std::vector<double> fit;
      std::string scales;
      for (const ProbeTrial& t : rep.probe) {
        if (t.subject != rep.subjects[s]) continue;
        fit.push_back(t.fitness);
        if (!scales.empty()) scales += ", ";
        scales += fixed(t.scale, 1);
      }
      const std::string ref =
          s < 5 ? fixed(kRefSubjectMean[s], 2) + " ± " + fixed(kRefSubjectSd[s], 2) : std::string();
      md << "| " << rep.subjects[s] << " | " << fixed(rep.repeatability.per_subject_mean[s], 2) << " | "
         << fixed(rep.repeatability.per_subject_sd[s], 2) << " | " << fixed(mean_of(fit), 4) << " | " << scales
         << " | " << ref << " |\n";
      subj_csv << rep.subjects[s] << ',' << num(rep.repeatability.per_subject_mean[s]) << ','
               << num(rep.repeatability.per_subject_sd[s]) << ',' << (s < 5 ? num(kRefSubjectMean[s]) : "") << ','
               << (s < 5 ? num(kRefSubjectSd[s]) : "") << '\n';
    }
    md << "\n" << metrics::to_string(rep.repeatability.form) << " = " << fixed(rep.repeatability.icc, 4)
       << " (MS_between " << fixed(rep.repeatability.ms_between, 4) << ", MS_within "
       << fixed(rep.repeatability.ms_within, 4) << ").\n";
  }
  io::write_text(dir / "repeatability_summary.csv", subj_csv.str());

  nlohmann::json summary = {{"format", "lidarprobe.reproduce/1"},
                            {"seed", cfg.seed},
                            {"config_sha256", config_hash(cfg)},
                            {"calibrated_extrinsics", io::to_json(rep.calibrated_extrinsics)}};
  if (rep.has_repeatability) {
    summary["repeatability"] = {{"icc_form", metrics::to_string(rep.repeatability.form)},
                                {"icc", rep.repeatability.icc},
                                {"subjects", rep.subjects},
                                {"per_subject_mean_mm", rep.repeatability.per_subject_mean},
                                {"per_subject_sd_mm", rep.repeatability.per_subject_sd}};
  }
  if (!rep.surface.empty()) {
    double worst_rmse = 0.0;
    double worst_e95 = 0.0;
    double min_cov = 1.0;
    for (const SurfaceRun& r : rep.surface) {
      worst_rmse = std::max(worst_rmse, r.e_rmse_mm);
      worst_e95 = std::max(worst_e95, r.e_95_mm);
      min_cov = std::min(min_cov, r.coverage);
    }
    summary["surface"] = {{"runs", rep.surface.size()},
                          {"max_e_rmse_mm", worst_rmse},
                          {"max_e_95_mm", worst_e95},
                          {"min_coverage", min_cov}};
  }
  io::write_json(dir / "summary.json", summary);
  io::write_text(dir / "report.md", md.str());
}

}  // namespace lidarprobe::reproduce
