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

// Acceptance checks over the simulator. Prints one PASS/FAIL line per
// criterion and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/errors.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/neighbor_index.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/pipeline.hpp"
#include "lidarprobe/preprocess.hpp"
#include "lidarprobe/registration.hpp"
#include "lidarprobe/reproduce.hpp"
#include "lidarprobe/simulator.hpp"

namespace fs = std::filesystem;
using namespace lidarprobe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

calibration::SolverConfig solver() { return calibration::SolverConfig{}; }

struct CalSession {
  simulator::CalibrationSession session;
  std::vector<calibration::PoseObservation> obs;
  calibration::CalibrationParams init;
};

CalSession cal_session(double noise, std::uint64_t seed, bool diversity = true) {
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise;
  simulator::CalibrationSessionConfig cfg;
  cfg.diversity = diversity;
  CalSession s;
  s.session = simulator::run_calibration_session(simulator::default_phantom(simulator::PhantomKind::kPlate), sensor,
                                                 simulator::default_true_extrinsics(), cfg, seed);
  s.obs = calibration::prepare_observations(s.session.poses, s.session.sector, solver());
  s.init = calibration::initial_params(s.obs, s.session.mount_guess);
  return s;
}

Outcome c1_exact_calibration() {
  const auto t0 = Clock::now();
  const CalSession s = cal_session(0.0, 1);
  const calibration::CalibrationResult r = calibration::solve_extrinsics(s.obs, s.init, solver());
  const double secs = seconds_since(t0);
  const RigidTransform& truth = s.session.true_extrinsics;
  const double terr = (r.extrinsics.translation() - truth.translation()).cwiseAbs().maxCoeff();
  const double rerr = rotation_angle(truth.rotation().transpose() * r.extrinsics.rotation());
  Outcome o;
  o.pass = s.obs.size() == 20 && terr < 1e-6 && rerr < 1e-6 && r.overall_rms < 1e-9 && secs < 10.0;
  o.detail = "max translation error " + fmt("%.3g m", terr) + ", rotation error " + fmt("%.3g rad", rerr) +
             ", RMS " + fmt("%.3g m", r.overall_rms) + ", " + fmt("%.2f s", secs);
  return o;
}

Outcome c2_noisy_calibration() {
  const auto t0 = Clock::now();
  const int reps = 20;
  double rms_lo = 1e9, rms_hi = 0.0, worst_t = 0.0, worst_r = 0.0;
  Vec3 err2 = Vec3::Zero();
  Vec3 sigma = Vec3::Zero();
  Vec3 rerr2 = Vec3::Zero();
  Vec3 rsigma = Vec3::Zero();
  for (int i = 0; i < reps; ++i) {
    const CalSession s = cal_session(0.0015, 100 + i);
    const calibration::CalibrationResult r = calibration::solve_extrinsics(s.obs, s.init, solver());
    const Vec3 e = r.extrinsics.translation() - s.session.true_extrinsics.translation();
    const Vec3 w = so3_log(s.session.true_extrinsics.rotation().transpose() * r.extrinsics.rotation());
    rms_lo = std::min(rms_lo, r.overall_rms);
    rms_hi = std::max(rms_hi, r.overall_rms);
    worst_t = std::max(worst_t, e.cwiseAbs().maxCoeff());
    worst_r = std::max(worst_r, rad2deg(w.norm()));
    err2 += e.cwiseAbs2();
    sigma += r.translation_sigma;
    rerr2 += w.cwiseAbs2();
    rsigma += r.rotation_sigma;
  }
  const Vec3 observed = (err2 / reps).cwiseSqrt();
  const Vec3 reported = sigma / reps;
  const Vec3 robserved = (rerr2 / reps).cwiseSqrt();
  const Vec3 rreported = rsigma / reps;
  double ratio_lo = 1e9, ratio_hi = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (double ratio : {reported[a] / observed[a], rreported[a] / robserved[a]}) {
      ratio_lo = std::min(ratio_lo, ratio);
      ratio_hi = std::max(ratio_hi, ratio);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = rms_lo >= 0.0012 && rms_hi <= 0.0020 && worst_t <= 0.0015 && worst_r <= 0.3 && ratio_lo >= 0.3 &&
           ratio_hi <= 3.0 && secs < 120.0;
  o.detail = "RMS " + fmt("%.3f", rms_lo * 1e3) + fmt("..%.3f mm", rms_hi * 1e3) + ", max translation error " +
             fmt("%.3f mm", worst_t * 1e3) + ", max rotation error " + fmt("%.3f deg", worst_r) +
             ", sigma/observed " + fmt("%.2f", ratio_lo) + fmt("..%.2f", ratio_hi) + ", " + fmt("%.1f s", secs);
  return o;
}

Outcome c3_degeneracy() {
  int raised = 0;
  int trials = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CalSession s = cal_session(0.001, 300 + seed, false);
    for (bool with_init : {true, false}) {
      ++trials;
      try {
        calibration::solve_extrinsics(s.obs, with_init ? std::optional(s.init) : std::nullopt, solver());
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kDegeneracy) ++raised;
      }
    }
  }
  Outcome o;
  o.pass = raised == trials;
  o.detail = std::to_string(raised) + "/" + std::to_string(trials) + " single-orientation solves raised degeneracy";
  return o;
}

Outcome c4_covariance_scaling() {
  Eigen::Matrix<double, 6, 1> lo = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> hi = Eigen::Matrix<double, 6, 1>::Zero();
  for (int i = 0; i < 10; ++i) {
    for (int level = 0; level < 2; ++level) {
      const CalSession s = cal_session(level == 0 ? 0.001 : 0.002, 400 + i);
      const calibration::CalibrationResult r = calibration::solve_extrinsics(s.obs, s.init, solver());
      Eigen::Matrix<double, 6, 1> v;
      v << r.translation_sigma, r.rotation_sigma;
      (level == 0 ? lo : hi) += v / 10.0;
    }
  }
  double worst = 0.0;
  for (int k = 0; k < 6; ++k) worst = std::max(worst, std::abs(hi[k] / lo[k] / 2.0 - 1.0));
  Outcome o;
  o.pass = worst <= 0.05;
  o.detail = "worst deviation of sigma ratio from 2.0: " + fmt("%.2f%%", 100.0 * worst);
  return o;
}

Outcome c5_reconstruction() {
  const PipelineConfig cfg;
  double worst_rmse = 0.0, worst_e95 = 0.0, min_cov = 1.0, worst_secs = 0.0;
  int runs = 0;
  bool ok = true;
  const auto configs = reproduce::sweep_configurations();
  int k = 0;
  for (simulator::PhantomKind kind : {simulator::PhantomKind::kMale, simulator::PhantomKind::kFemale}) {
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto t0 = Clock::now();
      const reproduce::SurfaceRun r = reproduce::run_surface_trial(
          kind, configs[c], 0.002, simulator::default_true_extrinsics(), 500 + 10 * k + c, cfg);
      const double secs = seconds_since(t0);
      ++runs;
      worst_rmse = std::max(worst_rmse, r.e_rmse_mm);
      worst_e95 = std::max(worst_e95, r.e_95_mm);
      min_cov = std::min(min_cov, r.coverage);
      worst_secs = std::max(worst_secs, secs);
      ok = ok && r.e_rmse_mm <= 3.5 && r.e_95_mm <= 6.0 && r.coverage >= 0.93 && secs < 180.0;
    }
    ++k;
  }
  Outcome o;
  o.pass = ok && runs == 10;
  o.detail = std::to_string(runs) + " runs: max e_RMSE " + fmt("%.2f mm", worst_rmse) + ", max e_95 " +
             fmt("%.2f mm", worst_e95) + ", min coverage " + fmt("%.2f%%", 100.0 * min_cov) +
             ", slowest run " + fmt("%.1f s", worst_secs);
  return o;
}

Outcome c6_selectivity() {
  double min_chest = 1.0;
  int runs = 0;
  for (simulator::PhantomKind kind : {simulator::PhantomKind::kMale, simulator::PhantomKind::kFemale}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const simulator::Phantom ph = simulator::generate_phantom(simulator::default_phantom(kind));
      const mesh::RayCaster caster(ph.mesh);
      simulator::SensorModel sensor;
      sensor.range_noise_sigma = 0.002;
      simulator::SweepSessionConfig sweep;
      sweep.lateral_offset = 0.01 * static_cast<double>(seed);
      const auto session = simulator::run_sweep_session(ph, caster, sensor, simulator::default_true_extrinsics(),
                                                        sweep, 600 + seed);
      const pipeline::SurfaceResult r =
          pipeline::reconstruct_surface(session.recordings, session.true_extrinsics, preprocess::PreprocessConfig{});
      const mesh::LabeledSamples scene = simulator::labeled_scene(ph);
      bool has_bed = false, has_arm = false;
      for (mesh::SurfaceLabel l : scene.labels) {
        has_bed = has_bed || l == mesh::SurfaceLabel::kBed;
        has_arm = has_arm || l == mesh::SurfaceLabel::kArm;
      }
      if (!has_bed || !has_arm) return {false, "labeled scene lacks bed or arm surfaces"};
      const NeighborIndex index{std::span<const Vec3>(scene.points)};
      std::size_t chest = 0;
      for (const Vec3& p : r.stages.cluster.points()) {
        chest += scene.labels[index.nearest(p).index] == mesh::SurfaceLabel::kChest ? 1 : 0;
      }
      min_chest = std::min(min_chest, static_cast<double>(chest) / static_cast<double>(r.stages.cluster.size()));
      ++runs;
    }
  }
  Outcome o;
  o.pass = min_chest >= 0.99;
  o.detail = std::to_string(runs) + " scenes: minimum chest-labeled fraction of the output cluster " +
             fmt("%.4f", min_chest) + " (non-chest " + fmt("%.2f%%)", 100.0 * (1.0 - min_chest));
  return o;
}

double oracle_d2(const Vec3& a, const Vec3& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::vector<Vec3> random_cloud(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 7);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 c(0.1 * static_cast<double>(i % 4), 0.0, 0.0);
    pts.push_back(c + 0.02 * Vec3(rng.normal(), rng.normal(), rng.normal()));
  }
  return pts;
}

Outcome c7_oracles() {
  int mismatches = 0;
  int instances = 0;
  for (std::size_t n : {std::size_t{5}, std::size_t{200}, std::size_t{1000}, std::size_t{2000}}) {
    const std::vector<Vec3> a = random_cloud(n, n);
    const std::vector<Vec3> b = random_cloud(n, n + 1);
    std::vector<std::vector<std::size_t>> nb(n);
    std::vector<Neighbor> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = {0, std::numeric_limits<double>::infinity()};
      for (std::size_t j = 0; j < n; ++j) {
        const double d = oracle_d2(a[i], b[j]);
        if (d < nearest[i].squared_distance) nearest[i] = {j, d};
        if (oracle_d2(a[i], a[j]) <= 0.01 * 0.01) nb[i].push_back(j);
      }
    }
    // Nearest neighbor.
    const NeighborIndex index{std::span<const Vec3>(b)};
    ++instances;
    for (std::size_t i = 0; i < n; ++i) {
      const Neighbor got = index.nearest(a[i]);
      if (got.index != nearest[i].index || got.squared_distance != nearest[i].squared_distance) {
        ++mismatches;
        break;
      }
    }
    // DBSCAN.
    std::vector<int> labels(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (nb[s].size() < 5 || labels[s] >= 0) continue;
      const int id = next++;
      labels[s] = id;
      std::deque<std::size_t> q{s};
      while (!q.empty()) {
        const std::size_t p = q.front();
        q.pop_front();
        for (std::size_t r : nb[p]) {
          if (labels[r] >= 0) continue;
          labels[r] = id;
          if (nb[r].size() >= 5) q.push_back(r);
        }
      }
    }
    ++instances;
    if (preprocess::dbscan_labels(a, 0.01, 5) != labels) ++mismatches;
    // Fitness.
    const PointCloud src(a, FrameId::template_frame());
    const RigidTransform id = RigidTransform::identity(FrameId::template_frame(), FrameId::base());
    const registration::FitnessResult f =
        registration::evaluate_fitness(src, NeighborIndex(PointCloud(b, FrameId::base())), id, 0.01);
    std::size_t inliers = 0;
    double sum = 0.0;
    for (const Neighbor& nbr : nearest) {
      if (nbr.squared_distance <= 0.01 * 0.01) {
        ++inliers;
        sum += nbr.squared_distance;
      }
    }
    ++instances;
    if (f.inliers != inliers || f.fitness != static_cast<double>(inliers) / static_cast<double>(n) ||
        f.inlier_rmse != (inliers ? std::sqrt(sum / static_cast<double>(inliers)) : 0.0)) {
      ++mismatches;
    }
    // Surface error.
    const metrics::SurfaceErrorReport e =
        metrics::surface_error(PointCloud(a, FrameId::base()), PointCloud(b, FrameId::base()), 0.008);
    std::vector<double> d;
    double s2 = 0.0;
    std::size_t within = 0;
    for (const Neighbor& nbr : nearest) {
      d.push_back(std::sqrt(nbr.squared_distance));
      s2 += d.back() * d.back();
      within += d.back() <= 0.008 ? 1 : 0;
    }
    ++instances;
    if (e.per_point_distances != d || e.e_rmse != std::sqrt(s2 / static_cast<double>(n)) ||
        e.e_95 != metrics::quantile_type7(d, 0.95) ||
        e.coverage != static_cast<double>(within) / static_cast<double>(n)) {
      ++mismatches;
    }
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.detail = std::to_string(instances - mismatches) + "/" + std::to_string(instances) +
             " instances identical to double-loop oracles (up to 2000 points)";
  return o;
}

struct ScaleTrial {
  double selected = 0.0;
  double fitness = 0.0;
  bool converged = false;
};

PointCloud swept_surface(const simulator::Phantom& ph, std::uint64_t seed, double noise = 0.002) {
  const mesh::RayCaster caster(ph.mesh);
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise;
  const auto session = simulator::run_sweep_session(ph, caster, sensor, simulator::default_true_extrinsics(),
                                                    simulator::SweepSessionConfig{}, seed);
  return pipeline::reconstruct_surface(session.recordings, session.true_extrinsics, preprocess::PreprocessConfig{})
      .stages.surface;
}

PointCloud scaled_and_moved(const PointCloud& base, double scale, std::uint64_t seed) {
  CounterRng rng(seed, 0x5ca1e);
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const double angle = deg2rad(30.0) * rng.uniform();
  const Vec3 shift = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() * (0.1 * rng.uniform());
  const Mat3 r = so3_exp(angle * axis);
  const Vec3 c = base.centroid();
  std::vector<Vec3> pts;
  std::vector<Vec3> nrm;
  for (std::size_t i = 0; i < base.size(); ++i) {
    pts.push_back(r * (scale * (base.points()[i] - c)) + c + shift);
    nrm.push_back(r * base.normals()[i]);
  }
  return PointCloud(pts, nrm, FrameId::base());
}

Outcome c8_scale_loop() {
  simulator::PhantomParams params = simulator::default_phantom(simulator::PhantomKind::kMale);
  params.with_arms = false;
  const simulator::Phantom ph = simulator::generate_phantom(params);
  const registration::TemplateModel model =
      reproduce::default_template(simulator::PhantomKind::kMale, 0, preprocess::PreprocessConfig{});
  const registration::RegistrationConfig cfg;
  std::string detail;
  bool ok = true;
  for (double scale : {0.85, 1.0, 1.18}) {
    int good = 0;
    for (int t = 0; t < 20; ++t) {
      const PointCloud target =
          scaled_and_moved(swept_surface(ph, 7000 + t), scale, static_cast<std::uint64_t>(1000 * scale) + t);
      try {
        const registration::ScaleLoopResult r = registration::match_with_scale_loop(model, target, cfg);
        const double sel = r.outcome.scale_used;
        // Nearest grid scale; 0.85 sits midway between 0.8 and 0.9, so either is nearest.
        const bool nearest = scale == 0.85 ? (std::abs(sel - 0.8) < 1e-9 || std::abs(sel - 0.9) < 1e-9)
                                           : std::abs(sel - std::round(scale * 10.0) / 10.0) < 1e-9;
        if (r.converged && r.outcome.fitness >= 0.9 && nearest) ++good;
      } catch (const Error&) {
      }
    }
    ok = ok && good >= 18;
    detail += fmt("scale %.2f: ", scale) + std::to_string(good) + "/20; ";
  }
  int false_positive = 0;
  for (int b = 0; b < 5; ++b) {
    const double hw = 0.14 + 0.01 * b;
    const mesh::TriangleMesh box = mesh::box(Vec3(0.5 - hw, -0.2, 0.0), Vec3(0.5 + hw, 0.2, 0.12 + 0.01 * b),
                                             mesh::SurfaceLabel::kChest);
    const mesh::LabeledSamples s = mesh::sample_surface(box, 0.003);
    std::vector<Vec3> top;
    CounterRng rng(b, 0xb0c5);
    for (const Vec3& p : s.points) {
      if (p.z() > 0.005) top.push_back(p + 0.002 * Vec3(rng.normal(), rng.normal(), rng.normal()));
    }
    PointCloud cloud = preprocess::voxel_downsample(PointCloud(top, FrameId::base()), 0.003);
    cloud = preprocess::estimate_normals(cloud, 30, Vec3(0.5, 0.0, 1.0));
    try {
      if (registration::match_with_scale_loop(model, cloud, cfg).converged) ++false_positive;
    } catch (const Error&) {
    }
  }
  ok = ok && false_positive == 0;
  detail += "box control converged " + std::to_string(false_positive) + "/5";
  return {ok, detail};
}

Outcome c9_repeatability() {
  const PipelineConfig cfg;
  const registration::TemplateModel male =
      reproduce::default_template(simulator::PhantomKind::kMale, 0, cfg.preprocess);
  const registration::TemplateModel female =
      reproduce::default_template(simulator::PhantomKind::kFemale, 0, cfg.preprocess);
  const auto subjects = reproduce::repeatability_subjects();
  std::vector<std::vector<double>> matrix;
  bool all_converged = true;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto& model = subjects[s].phantom.kind == simulator::PhantomKind::kFemale ? female : male;
    std::vector<double> row;
    for (int t = 0; t < 3; ++t) {
      const reproduce::ProbeTrial trial = reproduce::run_probe_trial(
          subjects[s], model, t + 1, 0.002, simulator::default_true_extrinsics(), 900 + 10 * s + t, cfg);
      all_converged = all_converged && trial.converged;
      row.push_back(trial.e_parallel_mm);
    }
    matrix.push_back(row);
  }
  const metrics::RepeatabilityReport r = metrics::repeatability(matrix);
  double worst_sd = 0.0;
  std::string detail;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    worst_sd = std::max(worst_sd, r.per_subject_sd[s]);
    detail += subjects[s].name + fmt(" %.2f", r.per_subject_mean[s]) + fmt(" ± %.2f mm; ", r.per_subject_sd[s]);
  }
  Outcome o;
  o.pass = worst_sd <= 4.0 && all_converged;
  o.detail = detail + "max SD " + fmt("%.2f mm", worst_sd) + (all_converged ? "" : "; a trial did not converge");
  return o;
}

Outcome c10_orientation() {
  // Thresholded on the noise-free sensor; the 2 mm figure is reported only.
  double worst[2] = {0.0, 0.0};
  int samples = 0;
  for (int level = 0; level < 2; ++level) {
    for (simulator::PhantomKind kind : {simulator::PhantomKind::kMale, simulator::PhantomKind::kFemale}) {
      simulator::PhantomParams params = simulator::default_phantom(kind);
      params.chest.sternum_and_ribs = false;
      const simulator::Phantom ph = simulator::generate_phantom(params);
      const PointCloud surface = swept_surface(ph, 1100, level == 0 ? 0.0 : 0.002);
      const NeighborIndex index(surface);
      for (double fx : {-0.4, -0.2, 0.0, 0.2, 0.36}) {
        for (double fy : {-0.3, 0.0, 0.12, 0.3}) {
          const Vec3 q = ph.chest->surface_at_footprint(Vec2(fx, fy));
          const Vec3 p_s = surface.points()[index.nearest(q).index];
          const registration::OrientationEstimate e =
              registration::probe_orientation(surface, p_s, 30, pipeline::probe_viewpoint(surface, p_s));
          const double ang = rad2deg(std::acos(std::clamp(e.normal.dot(ph.chest->normal(p_s)), -1.0, 1.0)));
          worst[level] = std::max(worst[level], ang);
          samples += level == 0 ? 1 : 0;
        }
      }
    }
  }
  CounterRng rng(12, 12);
  double worst_identity = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 ps(rng.normal(), rng.normal(), rng.normal());
    const Vec3 sphere = ps + 0.03 * Vec3(rng.normal(), rng.normal(), rng.normal());
    worst_identity = std::max(worst_identity, std::abs((metrics::project_marker(sphere, ps, n) - ps).dot(n)));
  }
  Outcome o;
  o.pass = worst[0] <= 2.0 && worst_identity <= 1e-12;
  o.detail = std::to_string(samples) + " smooth-phantom points: max normal error " + fmt("%.3f deg", worst[0]) +
             " noise-free (" + fmt("%.2f deg", worst[1]) + " at 2 mm, not thresholded); projection identity max " +
             fmt("%.2g", worst_identity);
  return o;
}

Outcome c11_icc() {
  CounterRng rng(13, 13);
  double worst = 0.0;
  double worst_shift = 0.0;
  for (int t = 0; t < 500; ++t) {
    std::vector<std::vector<double>> m(5, std::vector<double>(3));
    for (auto& row : m) {
      const double subject = 25.0 + 4.0 * rng.normal();
      for (double& v : row) v = subject + 2.0 * rng.normal();
    }
    long double grand = 0.0L;
    for (const auto& row : m) {
      for (double v : row) grand += v;
    }
    grand /= 15.0L;
    long double sst = 0.0L, ssb = 0.0L;
    for (const auto& row : m) {
      const long double mean = (static_cast<long double>(row[0]) + row[1] + row[2]) / 3.0L;
      ssb += 3.0L * (mean - grand) * (mean - grand);
      for (double v : row) sst += (v - grand) * (v - grand);
    }
    const double msb = static_cast<double>(ssb / 4.0L);
    const double msw = static_cast<double>((sst - ssb) / 10.0L);
    const double oracle = (msb - msw) / (msb + 2.0 * msw);
    const double got = metrics::repeatability(m).icc;
    worst = std::max(worst, std::abs(got - oracle));
    auto shifted = m;
    const double c = 100.0 * rng.normal();
    for (auto& row : shifted) {
      for (double& v : row) v += c;
    }
    worst_shift = std::max(worst_shift, std::abs(metrics::repeatability(shifted).icc - got));
  }
  Outcome o;
  o.pass = worst <= 1e-10 && worst_shift <= 1e-10;
  o.detail = "500 random 5x3 matrices: max |ICC - ANOVA oracle| " + fmt("%.2g", worst) + ", max shift change " +
             fmt("%.2g", worst_shift);
  return o;
}

std::vector<std::pair<std::string, std::string>> bundle_hashes(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) out.emplace_back(f.filename().string(), pipeline::file_sha256(f));
  return out;
}

Outcome c12_determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  PipelineConfig cfg;
  cfg.seed = 2024;
  std::vector<std::vector<std::pair<std::string, std::string>>> hashes;
  const int threads[3] = {1, 1, 4};
  for (int i = 0; i < 3; ++i) {
    set_thread_count(threads[i]);
    const fs::path dir = work / ("reproduce_" + std::to_string(i));
    fs::remove_all(dir);
    const reproduce::ReproduceReport rep = reproduce::run_reproduce(cfg);
    reproduce::write_bundle(dir, rep, cfg);
    hashes.push_back(bundle_hashes(dir));
  }
  set_thread_count(0);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = !hashes[0].empty() && hashes[0] == hashes[1] && hashes[0] == hashes[2];
  o.detail = std::to_string(hashes[0].size()) + " bundle files; same-seed runs " +
             (hashes[0] == hashes[1] ? "byte-identical" : "DIFFER") + "; --threads 1 vs 4 " +
             (hashes[0] == hashes[2] ? "byte-identical" : "DIFFER") + fmt("; %.0f s for three runs", secs);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidarprobe acceptance checks"};
  std::string work = (fs::temp_directory_path() / "lidarprobe_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for report bundles");
  app.add_option("--only", only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"calibration exact recovery", c1_exact_calibration},
      {"calibration noisy recovery", c2_noisy_calibration},
      {"degeneracy detection", c3_degeneracy},
      {"covariance sanity", c4_covariance_scaling},
      {"reconstruction fidelity", c5_reconstruction},
      {"preprocessing selectivity", c6_selectivity},
      {"brute-force oracles", c7_oracles},
      {"scale-loop convergence", c8_scale_loop},
      {"probe point repeatability", c9_repeatability},
      {"orientation accuracy", c10_orientation},
      {"ICC oracle", c11_icc},
      {"determinism", [&] { return c12_determinism(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %2d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
