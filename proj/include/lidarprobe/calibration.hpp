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

#ifndef LIDARPROBE_CALIBRATION_HPP
#define LIDARPROBE_CALIBRATION_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "lidarprobe/geometry.hpp"
#include "lidarprobe/metrics.hpp"

// Plane-based extrinsic calibration of a 2D scanner to the robot TCP.
//
// Every scan point p (scanner frame, z = 0) observed at TCP pose T_k must lie
// on one fixed board plane n·x + d = 0 in the base frame once mapped through
// the unknown mount X = (R(omega), t):
//
//   r = n^T (R_k (R(omega) p + t) + t_k) + d,     n = v / ||v||
//
// The 10-vector [omega, t, v, d] is estimated by Levenberg-Marquardt on the
// Cauchy-robustified sum of squared residuals.
namespace lidarprobe::calibration {

struct Sector {
  double lo = deg2rad(135.0);
  double hi = deg2rad(225.0);
};

struct SolverConfig {
  double cauchy_scale = 0.0025;  // meters
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-10;
  double ransac_threshold = 0.005;  // meters
  int ransac_iterations = 500;
  int min_inliers = 15;
  double degeneracy_normal_spread_min = deg2rad(5.0);  // radians
  std::uint64_t seed = 0;

  void validate() const;
};

/// Applies the keys present in `j` to `cfg`; unknown keys are rejected.
void update_from_json(const nlohmann::json& j, SolverConfig& cfg);
nlohmann::json to_json(const SolverConfig& cfg);

struct PoseScanSet {
  std::size_t pose_index = 0;
  RigidTransform tcp_pose = RigidTransform::identity(FrameId::tcp(), FrameId::base());
  std::vector<PolarScan> scans;
};

struct LineFitResult {
  std::vector<std::size_t> inlier_indices;
  Vec2 direction = Vec2::UnitX();
  Vec2 point_on_line = Vec2::Zero();
  double inlier_rms = 0.0;
};

/// RANSAC dominant line followed by a total-least-squares refit on the inliers.
/// Inlier indices refer to `points`. `stream` keys the per-iteration random draws.
LineFitResult fit_line(const std::vector<Vec2>& points, const SolverConfig& cfg,
                       std::uint64_t stream = 0);

/// Line fit over the valid samples of an already sector-filtered scan; inlier
/// indices refer to scan.samples.
LineFitResult fit_scan_line(const PolarScan& scan, const SolverConfig& cfg,
                            std::uint64_t stream = 0);

/// Per-pose data after sector filtering, aggregation and line extraction.
struct PoseObservation {
  std::size_t pose_index = 0;
  RigidTransform tcp_pose = RigidTransform::identity(FrameId::tcp(), FrameId::base());
  std::vector<Vec3> sector_points;  // scanner frame, union over the pose's scans
  LineFitResult line;               // indices into sector_points
  std::vector<Vec3> inliers;        // scanner frame
};

std::vector<PoseObservation> prepare_observations(const std::vector<PoseScanSet>& data,
                                                  const Sector& sector, const SolverConfig& cfg);

struct CalibrationParams {
  Vec3 omega = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 normal_direction = Vec3::UnitZ();  // v, unconstrained
  double offset = 0.0;                    // d_B

  using Vector = Eigen::Matrix<double, 10, 1>;
  Vector to_vector() const;
  static CalibrationParams from_vector(const Vector& x);

  Vec3 unit_normal() const;
  RigidTransform extrinsics() const;  // lidar -> tcp
  Plane plane() const;
};

/// Coarse start: the given mount guess plus a plane fitted (PCA) to all inliers
/// mapped through it. The normal points along +z of the base frame.
CalibrationParams initial_params(const std::vector<PoseObservation>& data,
                                 const RigidTransform& mount_guess);

/// Pose-major, inlier-index-minor residual vector (meters).
Eigen::VectorXd residual_stack(const CalibrationParams& params,
                               const std::vector<PoseObservation>& data);
Eigen::MatrixXd residual_jacobian(const CalibrationParams& params,
                                  const std::vector<PoseObservation>& data);
Eigen::MatrixXd numeric_jacobian(const CalibrationParams& params,
                                 const std::vector<PoseObservation>& data, double step = 1e-7);

double cauchy_loss(double residual, double scale);

struct DegeneracyReport {
  bool passed = false;
  std::size_t pose_count = 0;
  double normal_spread = 0.0;     // radians, max pairwise angle of scan-plane normals
  double direction_spread = 0.0;  // radians, max pairwise angle of line directions
  std::vector<std::string> failures;
};

/// Scan-plane normals and line directions are mapped into the base frame
/// through `mount_rotation` (the coarse mount guess).
DegeneracyReport degeneracy_check(const std::vector<PoseObservation>& data,
                                  const SolverConfig& cfg,
                                  const Mat3& mount_rotation = Mat3::Identity());

struct CovarianceEstimate {
  Vec3 translation_sigma = Vec3::Zero();  // meters
  Vec3 rotation_sigma = Vec3::Zero();     // radians
  Eigen::Matrix<double, 6, 6> extrinsic_covariance = Eigen::Matrix<double, 6, 6>::Zero();
  double residual_variance = 0.0;
};

/// sigma^2 (J^T J)^+ marginalized to the six mount parameters. The scale of v
/// is a gauge direction and is projected out before inversion; any further
/// rank deficiency raises a degeneracy error.
CovarianceEstimate estimate_covariance(const CalibrationParams& params,
                                       const std::vector<PoseObservation>& data);

struct CalibrationResult {
  RigidTransform extrinsics = RigidTransform::identity(FrameId::lidar(), FrameId::tcp());
  Plane plane{Vec3::UnitZ(), 0.0};
  CalibrationParams params;
  std::vector<std::vector<double>> residuals;  // per pose, meters
  std::vector<double> per_pose_rms;
  double overall_rms = 0.0;
  Vec3 translation_sigma = Vec3::Zero();
  Vec3 rotation_sigma = Vec3::Zero();
  std::vector<std::size_t> inlier_counts;
  std::vector<std::size_t> pose_indices;
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
  DegeneracyReport degeneracy;
};

struct SolveSummary {
  CalibrationParams params;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Robust LM from a given start. Throws divergence on non-finite cost.
SolveSummary minimize(const std::vector<PoseObservation>& data, const CalibrationParams& init,
                      const SolverConfig& cfg);

/// Full estimate. Without `init`, a 3x3x3 multi-start over +/-30 degrees per
/// axis around the identity rotation is run and the lowest-cost basin kept.
CalibrationResult solve_extrinsics(const std::vector<PoseObservation>& data,
                                   const std::optional<CalibrationParams>& init,
                                   const SolverConfig& cfg);

/// Serialized report. Every field is stored exactly as written so that
/// parse -> serialize is byte-identical.
struct CalibrationReport {
  std::array<double, 3> translation_m{};
  std::array<double, 3> rotation_vector_rad{};
  std::array<double, 4> quaternion_xyzw{};
  std::array<double, 3> plane_normal{};
  double plane_offset_m = 0.0;
  std::vector<double> per_pose_rms_mm;
  double overall_rms_mm = 0.0;
  double mean_per_pose_rms_mm = 0.0;
  double min_per_pose_rms_mm = 0.0;
  double max_per_pose_rms_mm = 0.0;
  double sd_per_pose_rms_mm = 0.0;
  std::array<double, 3> translation_sigma_mm{};
  std::array<double, 3> rotation_sigma_deg{};
  std::vector<std::size_t> inlier_counts;
  bool converged = false;
  int iterations = 0;
  double histogram_bin_width_mm = 0.5;
  std::array<double, 2> histogram_center_range_mm{-6.0, 6.0};
  std::vector<std::size_t> histogram_counts;
  std::size_t histogram_underflow = 0;
  std::size_t histogram_overflow = 0;
  bool degeneracy_passed = false;
  double normal_spread_deg = 0.0;
  double direction_spread_deg = 0.0;

  RigidTransform extrinsics() const;
  nlohmann::json to_json() const;
  static CalibrationReport from_json(const nlohmann::json& j);
};

CalibrationReport calibration_report(const CalibrationResult& result);

/// `pose,index,residual_m` rows in pose-major order.
std::string residuals_csv(const CalibrationResult& result);

struct CalibrationDataset {
  std::vector<PoseScanSet> poses;
  Sector sector;
  SolverConfig solver;
  std::optional<RigidTransform> mount_guess;
};

/// Reads `poses.csv`, the per-pose scan logs and `session.json` from `dir`.
CalibrationDataset load_calibration_dataset(const std::filesystem::path& dir,
                                            const SolverConfig& base = {});

}  // namespace lidarprobe::calibration

#endif  // LIDARPROBE_CALIBRATION_HPP
