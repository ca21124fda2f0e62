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

#include "lidarprobe/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/json_reader.hpp"
#include "lidarprobe/parallel.hpp"

namespace lidarprobe::calibration {

namespace {

using Mat10 = Eigen::Matrix<double, 10, 10>;
using Vec10 = Eigen::Matrix<double, 10, 1>;

struct LineModel {
  Vec2 point = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();
};

double line_distance(const LineModel& line, const Vec2& p) {
  const Vec2 normal(-line.direction.y(), line.direction.x());
  return std::abs(normal.dot(p - line.point));
}

LineModel tls_line(const std::vector<Vec2>& points, const std::vector<std::size_t>& indices) {
  Vec2 centroid = Vec2::Zero();
  for (std::size_t i : indices) centroid += points[i];
  centroid /= static_cast<double>(indices.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (std::size_t i : indices) {
    const Vec2 d = points[i] - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  Vec2 direction = eig.eigenvectors().col(1).normalized();
  if (direction.x() < 0.0 || (direction.x() == 0.0 && direction.y() < 0.0)) direction = -direction;
  return {centroid, direction};
}

std::vector<std::size_t> inliers_of(const LineModel& line, const std::vector<Vec2>& points,
                                    double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (line_distance(line, points[i]) <= threshold) out.push_back(i);
  }
  return out;
}

Vec3 tangent_orthogonal(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(helper).normalized();
}

double angle_between_lines(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c);
}

double max_pairwise_angle(const std::vector<Vec3>& dirs) {
  double best = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      best = std::max(best, angle_between_lines(dirs[i], dirs[j]));
    }
  }
  return best;
}

std::vector<std::size_t> row_offsets(const std::vector<PoseObservation>& data) {
  std::vector<std::size_t> offsets(data.size() + 1, 0);
  for (std::size_t k = 0; k < data.size(); ++k) {
    offsets[k + 1] = offsets[k] + data[k].inliers.size();
  }
  return offsets;
}

double robust_cost(const Eigen::VectorXd& r, double scale) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) cost += cauchy_loss(r[i], scale);
  return cost;
}

}  // namespace

void SolverConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::kInvalidInput, std::string("solver config: ") + name + " must be positive");
    }
  };
  positive(cauchy_scale, "cauchy_scale");
  positive(gradient_tolerance, "gradient_tolerance");
  positive(parameter_tolerance, "parameter_tolerance");
  positive(ransac_threshold, "ransac_threshold");
  positive(degeneracy_normal_spread_min, "degeneracy_normal_spread_min");
  if (max_iterations <= 0) fail(ErrorKind::kInvalidInput, "solver config: max_iterations must be positive");
  if (ransac_iterations <= 0) {
    fail(ErrorKind::kInvalidInput, "solver config: ransac_iterations must be positive");
  }
  if (min_inliers < 2) fail(ErrorKind::kInvalidInput, "solver config: min_inliers must be >= 2");
}

void update_from_json(const nlohmann::json& j, SolverConfig& cfg) {
  JsonObjectReader reader(j, "solver");
  reader.get("cauchy_scale", cfg.cauchy_scale);
  reader.get("max_iterations", cfg.max_iterations);
  reader.get("gradient_tolerance", cfg.gradient_tolerance);
  reader.get("parameter_tolerance", cfg.parameter_tolerance);
  reader.get("ransac_threshold", cfg.ransac_threshold);
  reader.get("ransac_iterations", cfg.ransac_iterations);
  reader.get("min_inliers", cfg.min_inliers);
  reader.get("degeneracy_normal_spread_min", cfg.degeneracy_normal_spread_min);
  reader.get("seed", cfg.seed);
  reader.finish();
  cfg.validate();
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return {{"cauchy_scale", cfg.cauchy_scale},
          {"max_iterations", cfg.max_iterations},
          {"gradient_tolerance", cfg.gradient_tolerance},
          {"parameter_tolerance", cfg.parameter_tolerance},
          {"ransac_threshold", cfg.ransac_threshold},
          {"ransac_iterations", cfg.ransac_iterations},
          {"min_inliers", cfg.min_inliers},
          {"degeneracy_normal_spread_min", cfg.degeneracy_normal_spread_min},
          {"seed", cfg.seed}};
}

LineFitResult fit_line(const std::vector<Vec2>& points, const SolverConfig& cfg,
                       std::uint64_t stream) {
  cfg.validate();
  const std::size_t n = points.size();
  const auto min_inliers = static_cast<std::size_t>(cfg.min_inliers);
  if (n < min_inliers || n < 2) {
    fail(ErrorKind::kNotEnoughData, "line fit needs at least " + std::to_string(min_inliers) +
                                        " valid samples, got " + std::to_string(n));
  }

  const auto iterations = static_cast<std::size_t>(cfg.ransac_iterations);
  std::vector<std::size_t> counts(iterations, 0);
  std::vector<double> scores(iterations, std::numeric_limits<double>::infinity());
  std::vector<LineModel> models(iterations);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t it = 0; it < static_cast<std::ptrdiff_t>(iterations); ++it) {
    CounterRng rng(cfg.seed, stream, static_cast<std::uint64_t>(it));
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    const Vec2 delta = points[j] - points[i];
    const double len = delta.norm();
    if (len < 1e-9) continue;
    const LineModel model{points[i], delta / len};
    std::size_t count = 0;
    double score = 0.0;
    for (const Vec2& p : points) {
      const double dist = line_distance(model, p);
      if (dist <= cfg.ransac_threshold) {
        ++count;
        score += dist * dist;
      }
    }
    counts[it] = count;
    scores[it] = score;
    models[it] = model;
  }

  std::size_t best = 0;
  for (std::size_t it = 1; it < iterations; ++it) {
    if (counts[it] > counts[best] || (counts[it] == counts[best] && scores[it] < scores[best])) {
      best = it;
    }
  }
  if (counts[best] < min_inliers) {
    fail(ErrorKind::kDegenerateScan, "no line model with at least " + std::to_string(min_inliers) +
                                         " inliers (best: " + std::to_string(counts[best]) + ")");
  }

  std::vector<std::size_t> inliers = inliers_of(models[best], points, cfg.ransac_threshold);
  LineModel line = tls_line(points, inliers);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::size_t> next = inliers_of(line, points, cfg.ransac_threshold);
    if (next == inliers || next.size() < min_inliers) break;
    inliers = std::move(next);
    line = tls_line(points, inliers);
  }
  // Refitting can move the line slightly; keep only points that satisfy the
  // threshold against the final line.
  std::erase_if(inliers, [&](std::size_t i) {
    return line_distance(line, points[i]) > cfg.ransac_threshold;
  });
  if (inliers.size() < min_inliers) {
    fail(ErrorKind::kDegenerateScan, "line refit left fewer than " + std::to_string(min_inliers) +
                                         " inliers");
  }

  LineFitResult result;
  result.inlier_indices = std::move(inliers);
  result.direction = line.direction;
  result.point_on_line = line.point;
  double sq = 0.0;
  for (std::size_t i : result.inlier_indices) {
    const double d = line_distance(line, points[i]);
    sq += d * d;
  }
  result.inlier_rms = std::sqrt(sq / static_cast<double>(result.inlier_indices.size()));
  return result;
}

LineFitResult fit_scan_line(const PolarScan& scan, const SolverConfig& cfg, std::uint64_t stream) {
  std::vector<Vec2> points;
  std::vector<std::size_t> sample_index;
  for (std::size_t i = 0; i < scan.samples.size(); ++i) {
    if (!scan.samples[i].valid) continue;
    const Vec3 p = polar_to_cartesian(scan.samples[i]);
    points.emplace_back(p.x(), p.y());
    sample_index.push_back(i);
  }
  LineFitResult result = fit_line(points, cfg, stream);
  for (std::size_t& idx : result.inlier_indices) idx = sample_index[idx];
  return result;
}

std::vector<PoseObservation> prepare_observations(const std::vector<PoseScanSet>& data,
                                                  const Sector& sector, const SolverConfig& cfg) {
  std::vector<PoseObservation> out;
  out.reserve(data.size());
  for (const PoseScanSet& set : data) {
    if (set.tcp_pose.from_frame() != FrameId::tcp() || set.tcp_pose.to_frame() != FrameId::base()) {
      fail(ErrorKind::kFrame, "pose " + std::to_string(set.pose_index) + " must map tcp -> base");
    }
    PoseObservation obs;
    obs.pose_index = set.pose_index;
    obs.tcp_pose = set.tcp_pose;
    std::vector<Vec2> planar;
    for (const PolarScan& scan : set.scans) {
      const PolarScan filtered = sector_filter(scan, sector.lo, sector.hi);
      for (const PolarSample& s : filtered.samples) {
        if (!s.valid) continue;
        const Vec3 p = polar_to_cartesian(s);
        obs.sector_points.push_back(p);
        planar.emplace_back(p.x(), p.y());
      }
    }
    if (planar.size() < 2) {
      fail(ErrorKind::kNotEnoughData,
           "pose " + std::to_string(set.pose_index) + " has fewer than 2 valid sector samples");
    }
    obs.line = fit_line(planar, cfg, set.pose_index);
    for (std::size_t i : obs.line.inlier_indices) obs.inliers.push_back(obs.sector_points[i]);
    out.push_back(std::move(obs));
  }
  return out;
}

CalibrationParams::Vector CalibrationParams::to_vector() const {
  Vector x;
  x << omega, translation, normal_direction, offset;
  return x;
}

CalibrationParams CalibrationParams::from_vector(const Vector& x) {
  CalibrationParams p;
  p.omega = x.segment<3>(0);
  p.translation = x.segment<3>(3);
  p.normal_direction = x.segment<3>(6);
  p.offset = x[9];
  return p;
}

Vec3 CalibrationParams::unit_normal() const {
  const double norm = normal_direction.norm();
  if (!(norm > 1e-8)) fail(ErrorKind::kInvalidInput, "plane normal direction has norm <= 1e-8");
  return normal_direction / norm;
}

RigidTransform CalibrationParams::extrinsics() const {
  return RigidTransform::from_rotation_vector(omega, translation, FrameId::lidar(), FrameId::tcp());
}

Plane CalibrationParams::plane() const { return Plane::from_unnormalized(normal_direction, offset); }

CalibrationParams initial_params(const std::vector<PoseObservation>& data,
                                 const RigidTransform& mount_guess) {
  std::vector<Vec3> mapped;
  for (const PoseObservation& obs : data) {
    for (const Vec3& p : obs.inliers) {
      mapped.push_back(obs.tcp_pose.apply(mount_guess.apply(p)));
    }
  }
  if (mapped.size() < 3) fail(ErrorKind::kNotEnoughData, "plane initialization needs >= 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : mapped) centroid += p;
  centroid /= static_cast<double>(mapped.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : mapped) scatter += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  Vec3 normal = eig.eigenvectors().col(0).normalized();
  if (normal.z() < 0.0) normal = -normal;

  CalibrationParams params;
  params.omega = so3_log(mount_guess.rotation());
  params.translation = mount_guess.translation();
  params.normal_direction = normal;
  params.offset = -normal.dot(centroid);
  return params;
}

double cauchy_loss(double residual, double scale) {
  const double u = residual / scale;
  return 0.5 * scale * scale * std::log1p(u * u);
}

Eigen::VectorXd residual_stack(const CalibrationParams& params,
                               const std::vector<PoseObservation>& data) {
  const std::vector<std::size_t> offsets = row_offsets(data);
  Eigen::VectorXd r(static_cast<Eigen::Index>(offsets.back()));
  const Mat3 rot = so3_exp(params.omega);
  const Vec3 n = params.unit_normal();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(data.size()); ++k) {
    const PoseObservation& obs = data[k];
    const Mat3& rk = obs.tcp_pose.rotation();
    const Vec3& tk = obs.tcp_pose.translation();
    for (std::size_t i = 0; i < obs.inliers.size(); ++i) {
      const Vec3 xb = rk * (rot * obs.inliers[i] + params.translation) + tk;
      r[static_cast<Eigen::Index>(offsets[k] + i)] = n.dot(xb) + params.offset;
    }
  }
  return r;
}

Eigen::MatrixXd residual_jacobian(const CalibrationParams& params,
                                  const std::vector<PoseObservation>& data) {
  const std::vector<std::size_t> offsets = row_offsets(data);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(offsets.back()), 10);
  const Mat3 rot = so3_exp(params.omega);
  const Mat3 jl = so3_left_jacobian(params.omega);
  const double vnorm = params.normal_direction.norm();
  const Vec3 n = params.unit_normal();
  const Mat3 proj = (Mat3::Identity() - n * n.transpose()) / vnorm;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(data.size()); ++k) {
    const PoseObservation& obs = data[k];
    const Mat3& rk = obs.tcp_pose.rotation();
    const Vec3& tk = obs.tcp_pose.translation();
    const Eigen::RowVector3d n_rk = n.transpose() * rk;
    for (std::size_t i = 0; i < obs.inliers.size(); ++i) {
      const Vec3 q = rot * obs.inliers[i];
      const Vec3 xb = rk * (q + params.translation) + tk;
      const auto row = static_cast<Eigen::Index>(offsets[k] + i);
      jac.block<1, 3>(row, 0) = -n_rk * skew(q) * jl;
      jac.block<1, 3>(row, 3) = n_rk;
      jac.block<1, 3>(row, 6) = (proj * xb).transpose();
      jac(row, 9) = 1.0;
    }
  }
  return jac;
}

Eigen::MatrixXd numeric_jacobian(const CalibrationParams& params,
                                 const std::vector<PoseObservation>& data, double step) {
  const Vec10 x = params.to_vector();
  const std::size_t rows = row_offsets(data).back();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(rows), 10);
  for (int c = 0; c < 10; ++c) {
    Vec10 xp = x;
    Vec10 xm = x;
    xp[c] += step;
    xm[c] -= step;
    jac.col(c) = (residual_stack(CalibrationParams::from_vector(xp), data) -
                  residual_stack(CalibrationParams::from_vector(xm), data)) /
                 (2.0 * step);
  }
  return jac;
}

DegeneracyReport degeneracy_check(const std::vector<PoseObservation>& data,
                                  const SolverConfig& cfg, const Mat3& mount_rotation) {
  DegeneracyReport report;
  report.pose_count = data.size();
  std::vector<Vec3> normals;
  std::vector<Vec3> directions;
  for (const PoseObservation& obs : data) {
    const Mat3 r = obs.tcp_pose.rotation() * mount_rotation;
    normals.push_back(r * Vec3::UnitZ());
    const Vec3 dir_l(obs.line.direction.x(), obs.line.direction.y(), 0.0);
    directions.push_back(r * dir_l);
  }
  report.normal_spread = max_pairwise_angle(normals);
  report.direction_spread = max_pairwise_angle(directions);
  if (report.normal_spread < cfg.degeneracy_normal_spread_min) {
    report.failures.push_back("scan-plane normal spread");
  }
  if (report.direction_spread < cfg.degeneracy_normal_spread_min) {
    report.failures.push_back("line direction spread");
  }
  if (data.size() < 3) report.failures.push_back("pose count");
  report.passed = report.failures.empty();
  return report;
}

CovarianceEstimate estimate_covariance(const CalibrationParams& params,
                                       const std::vector<PoseObservation>& data) {
  const Eigen::VectorXd r = residual_stack(params, data);
  const Eigen::MatrixXd jac = residual_jacobian(params, data);
  const auto rows = r.size();
  if (rows <= 9) fail(ErrorKind::kNotEnoughData, "covariance needs more than 9 residuals");

  const Vec3 n = params.unit_normal();
  const Vec3 b1 = tangent_orthogonal(n);
  const Vec3 b2 = n.cross(b1);
  Eigen::Matrix<double, 3, 2> basis;
  basis << b1, b2;

  Eigen::MatrixXd j9(rows, 9);
  j9.leftCols<6>() = jac.leftCols<6>();
  j9.middleCols<2>(6) = jac.middleCols<3>(6) * basis;
  j9.col(8) = jac.col(9);

  const Eigen::Matrix<double, 9, 9> h = j9.transpose() * j9;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(h);
  const double max_eig = eig.eigenvalues().maxCoeff();
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(max_eig > 0.0) || min_eig <= 1e-12 * max_eig) {
    fail(ErrorKind::kDegeneracy,
         "rank-deficient normal matrix: the pose set does not constrain all mount parameters");
  }
  CovarianceEstimate est;
  est.residual_variance = r.squaredNorm() / static_cast<double>(rows - 9);
  const Eigen::Matrix<double, 9, 9> inv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  est.extrinsic_covariance = est.residual_variance * inv.topLeftCorner<6, 6>();
  for (int i = 0; i < 3; ++i) {
    est.rotation_sigma[i] = std::sqrt(std::max(0.0, est.extrinsic_covariance(i, i)));
    est.translation_sigma[i] = std::sqrt(std::max(0.0, est.extrinsic_covariance(i + 3, i + 3)));
  }
  return est;
}

SolveSummary minimize(const std::vector<PoseObservation>& data, const CalibrationParams& init,
                      const SolverConfig& cfg) {
  cfg.validate();
  CalibrationParams current = init;
  current.normal_direction = current.unit_normal();
  Eigen::VectorXd r = residual_stack(current, data);
  double cost = robust_cost(r, cfg.cauchy_scale);
  if (!std::isfinite(cost)) fail(ErrorKind::kDivergence, "non-finite initial cost");

  const double s2 = cfg.cauchy_scale * cfg.cauchy_scale;
  double lambda = 1e-3;
  SolveSummary summary;
  int iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iterations && !converged; ++iter) {
    const Eigen::MatrixXd jac = residual_jacobian(current, data);
    Eigen::VectorXd w(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) w[i] = 1.0 / (1.0 + r[i] * r[i] / s2);
    const Mat10 h = jac.transpose() * w.asDiagonal() * jac;
    const Vec10 g = jac.transpose() * w.cwiseProduct(r);
    if (g.cwiseAbs().maxCoeff() <= cfg.gradient_tolerance) {
      converged = true;
      break;
    }

    // The scale of v does not change any residual; pin it with a rank-one term.
    Vec10 gauge = Vec10::Zero();
    gauge.segment<3>(6) = current.normal_direction;
    const double diag_mean = h.diagonal().mean();
    const Mat10 h_gauge = h + diag_mean * gauge * gauge.transpose();
    const Vec10 x = current.to_vector();

    bool accepted = false;
    while (!accepted) {
      Mat10 damped = h_gauge;
      for (int i = 0; i < 10; ++i) {
        damped(i, i) += lambda * std::max(h(i, i), 1e-12 * diag_mean);
      }
      const Vec10 delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) fail(ErrorKind::kDivergence, "non-finite solver step");
      const bool tiny = delta.norm() <= cfg.parameter_tolerance * (x.norm() + cfg.parameter_tolerance);
      CalibrationParams trial = CalibrationParams::from_vector(x + delta);
      trial.normal_direction = trial.unit_normal();
      const Eigen::VectorXd r_trial = residual_stack(trial, data);
      const double trial_cost = robust_cost(r_trial, cfg.cauchy_scale);
      if (!std::isfinite(trial_cost)) {
        lambda *= 10.0;
      } else if (trial_cost <= cost) {
        current = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 4.0;
      }
      if (tiny) {
        converged = true;
        break;
      }
      if (lambda > 1e20) {
        fail(ErrorKind::kDivergence, "damping exceeded safeguard without cost decrease");
      }
    }
  }
  summary.params = current;
  summary.cost = cost;
  summary.iterations = iter;
  summary.converged = converged;
  return summary;
}

CalibrationResult solve_extrinsics(const std::vector<PoseObservation>& data,
                                   const std::optional<CalibrationParams>& init,
                                   const SolverConfig& cfg) {
  cfg.validate();
  const Mat3 mount_rotation = init ? so3_exp(init->omega) : Mat3::Identity();
  DegeneracyReport degeneracy = degeneracy_check(data, cfg, mount_rotation);
  if (!degeneracy.passed) {
    std::string names;
    for (const std::string& f : degeneracy.failures) names += (names.empty() ? "" : ", ") + f;
    fail(ErrorKind::kDegeneracy, "degenerate pose set: failed check(s): " + names);
  }

  SolveSummary best;
  if (init) {
    best = minimize(data, *init, cfg);
  } else {
    const double a = deg2rad(30.0);
    bool have = false;
    for (int ix = -1; ix <= 1; ++ix) {
      for (int iy = -1; iy <= 1; ++iy) {
        for (int iz = -1; iz <= 1; ++iz) {
          const Vec3 omega(ix * a, iy * a, iz * a);
          const RigidTransform guess = RigidTransform::from_rotation_vector(
              omega, Vec3::Zero(), FrameId::lidar(), FrameId::tcp());
          SolveSummary s = minimize(data, initial_params(data, guess), cfg);
          if (!have || s.cost < best.cost) {
            best = s;
            have = true;
          }
        }
      }
    }
  }

  CalibrationParams params = best.params;
  params.omega = so3_log(so3_exp(params.omega));
  params.normal_direction = params.unit_normal();
  if (params.normal_direction.z() < 0.0) {
    params.normal_direction = -params.normal_direction;
    params.offset = -params.offset;
  }

  CalibrationResult result;
  result.params = params;
  result.extrinsics = params.extrinsics();
  result.plane = Plane(params.normal_direction, params.offset);
  result.converged = best.converged;
  result.iterations = best.iterations;
  result.final_cost = best.cost;
  result.degeneracy = degeneracy_check(data, cfg, result.extrinsics.rotation());

  const Eigen::VectorXd r = residual_stack(params, data);
  std::size_t offset = 0;
  for (const PoseObservation& obs : data) {
    std::vector<double> pose_res(r.data() + offset, r.data() + offset + obs.inliers.size());
    offset += obs.inliers.size();
    result.residuals.push_back(std::move(pose_res));
    result.inlier_counts.push_back(obs.inliers.size());
    result.pose_indices.push_back(obs.pose_index);
  }
  const metrics::CalibrationStats stats = metrics::calibration_stats(result.residuals);
  result.per_pose_rms = stats.per_pose_rms;
  result.overall_rms = stats.overall_rms;

  const CovarianceEstimate cov = estimate_covariance(params, data);
  result.translation_sigma = cov.translation_sigma;
  result.rotation_sigma = cov.rotation_sigma;
  return result;
}

RigidTransform CalibrationReport::extrinsics() const {
  const Eigen::Quaterniond q(quaternion_xyzw[3], quaternion_xyzw[0], quaternion_xyzw[1],
                             quaternion_xyzw[2]);
  return RigidTransform::from_quaternion(
      q, Vec3(translation_m[0], translation_m[1], translation_m[2]), FrameId::lidar(),
      FrameId::tcp());
}

nlohmann::json CalibrationReport::to_json() const {
  nlohmann::json j;
  j["format"] = "lidarprobe.calibration/1";
  j["extrinsics"] = {{"from", "lidar"},
                     {"to", "tcp"},
                     {"translation_m", translation_m},
                     {"rotation_vector_rad", rotation_vector_rad},
                     {"quaternion_xyzw", quaternion_xyzw}};
  j["plane"] = {{"normal", plane_normal}, {"offset_m", plane_offset_m}};
  j["residuals"] = {{"per_pose_rms_mm", per_pose_rms_mm},
                    {"overall_rms_mm", overall_rms_mm},
                    {"mean_per_pose_rms_mm", mean_per_pose_rms_mm},
                    {"min_per_pose_rms_mm", min_per_pose_rms_mm},
                    {"max_per_pose_rms_mm", max_per_pose_rms_mm},
                    {"sd_per_pose_rms_mm", sd_per_pose_rms_mm},
                    {"inlier_counts", inlier_counts}};
  j["uncertainty"] = {{"translation_sigma_mm", translation_sigma_mm},
                      {"rotation_sigma_deg", rotation_sigma_deg}};
  j["histogram"] = {{"bin_width_mm", histogram_bin_width_mm},
                    {"center_range_mm", histogram_center_range_mm},
                    {"counts", histogram_counts},
                    {"underflow", histogram_underflow},
                    {"overflow", histogram_overflow}};
  j["solver"] = {{"converged", converged}, {"iterations", iterations}};
  j["degeneracy"] = {{"passed", degeneracy_passed},
                     {"normal_spread_deg", normal_spread_deg},
                     {"direction_spread_deg", direction_spread_deg}};
  return j;
}

CalibrationReport CalibrationReport::from_json(const nlohmann::json& j) {
  CalibrationReport rep;
  try {
    if (j.at("format").get<std::string>() != "lidarprobe.calibration/1") {
      fail(ErrorKind::kInvalidInput, "calibration report: unsupported format");
    }
    const auto& ex = j.at("extrinsics");
    rep.translation_m = ex.at("translation_m").get<std::array<double, 3>>();
    rep.rotation_vector_rad = ex.at("rotation_vector_rad").get<std::array<double, 3>>();
    rep.quaternion_xyzw = ex.at("quaternion_xyzw").get<std::array<double, 4>>();
    rep.plane_normal = j.at("plane").at("normal").get<std::array<double, 3>>();
    rep.plane_offset_m = j.at("plane").at("offset_m").get<double>();
    const auto& res = j.at("residuals");
    rep.per_pose_rms_mm = res.at("per_pose_rms_mm").get<std::vector<double>>();
    rep.overall_rms_mm = res.at("overall_rms_mm").get<double>();
    rep.mean_per_pose_rms_mm = res.at("mean_per_pose_rms_mm").get<double>();
    rep.min_per_pose_rms_mm = res.at("min_per_pose_rms_mm").get<double>();
    rep.max_per_pose_rms_mm = res.at("max_per_pose_rms_mm").get<double>();
    rep.sd_per_pose_rms_mm = res.at("sd_per_pose_rms_mm").get<double>();
    rep.inlier_counts = res.at("inlier_counts").get<std::vector<std::size_t>>();
    const auto& unc = j.at("uncertainty");
    rep.translation_sigma_mm = unc.at("translation_sigma_mm").get<std::array<double, 3>>();
    rep.rotation_sigma_deg = unc.at("rotation_sigma_deg").get<std::array<double, 3>>();
    const auto& hist = j.at("histogram");
    rep.histogram_bin_width_mm = hist.at("bin_width_mm").get<double>();
    rep.histogram_center_range_mm = hist.at("center_range_mm").get<std::array<double, 2>>();
    rep.histogram_counts = hist.at("counts").get<std::vector<std::size_t>>();
    rep.histogram_underflow = hist.at("underflow").get<std::size_t>();
    rep.histogram_overflow = hist.at("overflow").get<std::size_t>();
    rep.converged = j.at("solver").at("converged").get<bool>();
    rep.iterations = j.at("solver").at("iterations").get<int>();
    const auto& deg = j.at("degeneracy");
    rep.degeneracy_passed = deg.at("passed").get<bool>();
    rep.normal_spread_deg = deg.at("normal_spread_deg").get<double>();
    rep.direction_spread_deg = deg.at("direction_spread_deg").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("calibration report: ") + e.what());
  }
  return rep;
}

CalibrationReport calibration_report(const CalibrationResult& result) {
  CalibrationReport rep;
  const Vec3& t = result.extrinsics.translation();
  const Vec3 omega = result.extrinsics.rotation_vector().omega;
  const Eigen::Quaterniond q = result.extrinsics.quaternion();
  rep.translation_m = {t.x(), t.y(), t.z()};
  rep.rotation_vector_rad = {omega.x(), omega.y(), omega.z()};
  rep.quaternion_xyzw = {q.x(), q.y(), q.z(), q.w()};
  rep.plane_normal = {result.plane.normal().x(), result.plane.normal().y(),
                      result.plane.normal().z()};
  rep.plane_offset_m = result.plane.offset();

  const metrics::CalibrationStats stats = metrics::calibration_stats(result.residuals);
  for (double v : stats.per_pose_rms) rep.per_pose_rms_mm.push_back(v * 1e3);
  rep.overall_rms_mm = stats.overall_rms * 1e3;
  rep.mean_per_pose_rms_mm = stats.mean_per_pose_rms * 1e3;
  rep.min_per_pose_rms_mm = stats.min_per_pose_rms * 1e3;
  rep.max_per_pose_rms_mm = stats.max_per_pose_rms * 1e3;
  rep.sd_per_pose_rms_mm = stats.sd_per_pose_rms * 1e3;
  for (int i = 0; i < 3; ++i) {
    rep.translation_sigma_mm[i] = result.translation_sigma[i] * 1e3;
    rep.rotation_sigma_deg[i] = rad2deg(result.rotation_sigma[i]);
  }
  rep.inlier_counts = result.inlier_counts;
  rep.converged = result.converged;
  rep.iterations = result.iterations;
  rep.histogram_bin_width_mm = stats.histogram.bin_width * 1e3;
  rep.histogram_center_range_mm = {stats.histogram.center_lo * 1e3, stats.histogram.center_hi * 1e3};
  rep.histogram_counts = stats.histogram.counts;
  rep.histogram_underflow = stats.histogram.underflow;
  rep.histogram_overflow = stats.histogram.overflow;
  rep.degeneracy_passed = result.degeneracy.passed;
  rep.normal_spread_deg = rad2deg(result.degeneracy.normal_spread);
  rep.direction_spread_deg = rad2deg(result.degeneracy.direction_spread);
  return rep;
}

std::string residuals_csv(const CalibrationResult& result) {
  std::ostringstream out;
  out << "pose,index,residual_m\n";
  for (std::size_t k = 0; k < result.residuals.size(); ++k) {
    const std::size_t pose = k < result.pose_indices.size() ? result.pose_indices[k] : k;
    for (std::size_t i = 0; i < result.residuals[k].size(); ++i) {
      out << pose << ',' << i << ',' << io::format_double(result.residuals[k][i]) << '\n';
    }
  }
  return out.str();
}

CalibrationDataset load_calibration_dataset(const std::filesystem::path& dir,
                                            const SolverConfig& base) {
  CalibrationDataset ds;
  ds.solver = base;
  const nlohmann::json session = io::read_json(dir / "session.json");
  JsonObjectReader reader(session, (dir / "session.json").string());
  std::string format;
  reader.get("format", format);
  if (!format.empty() && format != "lidarprobe.calibration-session/1") {
    fail(ErrorKind::kInvalidInput, "session.json: unsupported format '" + format + "'");
  }
  std::array<double, 2> sector_deg{135.0, 225.0};
  reader.get("sector_deg", sector_deg);
  ds.sector = {deg2rad(sector_deg[0]), deg2rad(sector_deg[1])};
  const std::vector<std::string> scan_files = reader.require<std::vector<std::string>>("scan_files");
  if (const nlohmann::json* guess = reader.child("mount_guess")) {
    ds.mount_guess = io::transform_from_json(*guess);
  }
  if (const nlohmann::json* solver = reader.child("solver")) update_from_json(*solver, ds.solver);
  reader.child("scans_per_pose");
  reader.finish();

  const std::vector<io::StampedPose> poses = io::read_pose_log(dir / "poses.csv");
  if (poses.size() != scan_files.size()) {
    fail(ErrorKind::kInvalidInput, "session.json lists " + std::to_string(scan_files.size()) +
                                       " scan files but poses.csv has " +
                                       std::to_string(poses.size()) + " poses");
  }
  for (std::size_t k = 0; k < poses.size(); ++k) {
    PoseScanSet set;
    set.pose_index = k;
    set.tcp_pose = poses[k].pose;
    set.scans = io::read_scan_log(dir / scan_files[k]);
    ds.poses.push_back(std::move(set));
  }
  return ds;
}

}  // namespace lidarprobe::calibration
