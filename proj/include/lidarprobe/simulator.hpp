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

#ifndef LIDARPROBE_SIMULATOR_HPP
#define LIDARPROBE_SIMULATOR_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/geometry.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/mesh.hpp"
#include "lidarprobe/reconstruction.hpp"

// Deterministic synthetic scans of parametric phantoms. All draws come from
// counter-based streams keyed by (seed, scan index, beam index).
namespace lidarprobe::simulator {

enum class PhantomKind { kMale, kFemale, kPlate, kSphere };

std::string to_string(PhantomKind kind);
PhantomKind phantom_kind_from_string(const std::string& name);

/// Supine torso on a bed at z = bed_height. The torso is a superquadric
/// (x: half_width, y: half_length toward the head, z: half_height) centered
/// `center_height` above the bed and modulated radially by anatomical
/// features. Surface positions are addressed by normalized (X, Y) in [-1, 1]
/// over the torso footprint.
struct ChestParams {
  Vec2 center_xy{0.5, 0.0};
  double bed_height = 0.0;
  double half_width = 0.17;
  double half_length = 0.22;
  double half_height = 0.11;
  double center_height = 0.045;
  double exponent_xz = 2.5;
  double exponent_y = 4.0;
  bool sternum_and_ribs = true;
  double sternum_depth = 0.04;  // fraction of the local radius
  double rib_amplitude = 0.012;
  int rib_count = 7;
  double pectoral_prominence = 0.05;
  double breast_prominence = 0.0;
  Vec2 pmi_xy{0.36, 0.12};
  int grid_alpha = 256;
  int grid_beta = 192;

  void validate() const;
};

ChestParams default_chest(PhantomKind kind);

/// Analytic torso surface.
class ChestShape {
 public:
  explicit ChestShape(ChestParams params);

  const ChestParams& params() const noexcept { return params_; }
  Vec3 origin() const;

  /// Surface point along the ray from origin() in `direction`.
  Vec3 surface_along(const Vec3& direction) const;
  /// Surface point at ring angle alpha (0 = +x, pi/2 = up) and latitude beta along y.
  Vec3 surface_at(double alpha, double beta) const;
  /// Top-surface point at normalized footprint coordinates.
  Vec3 surface_at_footprint(const Vec2& xy) const;
  Vec3 pmi() const { return surface_at_footprint(params_.pmi_xy); }

  /// Zero on the surface, negative inside.
  double implicit(const Vec3& p) const;
  /// Unit outward normal of the implicit surface at (or near) p.
  Vec3 normal(const Vec3& p) const;

 private:
  double shape_norm(const Vec3& q) const;
  double modulation(const Vec3& q) const;

  ChestParams params_;
};

struct PhantomParams {
  PhantomKind kind = PhantomKind::kMale;
  ChestParams chest;
  bool with_bed = true;
  bool with_arms = true;
  bool with_marker = false;
  double marker_radius = 0.015;
  Vec2 bed_half_size{0.28, 0.45};
  double arm_radius = 0.035;
  double arm_gap = 0.04;
  Vec3 plate_center{0.5, 0.0, 0.02};
  Vec2 plate_size{0.6, 0.9};
  Vec3 sphere_center{0.5, 0.0, 0.1};
  double sphere_radius = 0.1;
  int sphere_subdivisions = 5;

  void validate() const;
};

PhantomParams default_phantom(PhantomKind kind);
void update_from_json(const nlohmann::json& j, PhantomParams& params);
nlohmann::json to_json(const PhantomParams& params);

struct Phantom {
  PhantomParams params;
  mesh::TriangleMesh mesh;
  std::optional<ChestShape> chest;
  std::optional<Vec3> pmi;
  std::optional<Vec3> marker_center;
  std::optional<Vec3> marker_apex;
};

Phantom generate_phantom(const PhantomParams& params);

/// Dense samples of the phantom's primary surface (chest-labeled, above the
/// bed) with analytic normals where available.
PointCloud ground_truth_cloud(const Phantom& phantom, double spacing = 0.0015);
/// Dense labeled samples of every surface in the scene.
mesh::LabeledSamples labeled_scene(const Phantom& phantom, double spacing = 0.003);

struct SensorModel {
  double angular_step = deg2rad(0.72);
  double range_noise_sigma = 0.0;
  double dropout_probability = 0.0;
  double revolution_period = 0.1;
  double max_range = 12.0;
  calibration::Sector cast_window;  // only beams in this window are emitted

  void validate() const;
};

void update_from_json(const nlohmann::json& j, SensorModel& sensor);
nlohmann::json to_json(const SensorModel& sensor);

using PoseAt = std::function<RigidTransform(double)>;

/// One revolution starting at `scan_timestamp`. Beam i at angle i * angular_step
/// is cast at scan_timestamp + angle / (2 pi) * period using pose_at(t) ∘ extrinsics.
PolarScan cast_scan(const mesh::RayCaster& caster, const SensorModel& sensor,
                    const RigidTransform& extrinsics, const PoseAt& pose_at,
                    double scan_timestamp, std::uint64_t seed, std::uint64_t scan_index);
PolarScan cast_scan(const mesh::RayCaster& caster, const SensorModel& sensor,
                    const RigidTransform& extrinsics, const RigidTransform& tcp_pose,
                    double scan_timestamp, std::uint64_t seed, std::uint64_t scan_index);

/// The nominal holder geometry: scanner -x axis along the tool axis.
Mat3 nominal_mount_rotation();
/// Tool pointing down with the scan plane spanning base x and z.
Mat3 nominal_tcp_rotation();
RigidTransform default_true_extrinsics();
RigidTransform default_mount_guess();

struct CalibrationSessionConfig {
  int pose_count = 20;
  int scans_per_pose = 3;
  double tilt_max_deg = 30.0;
  double yaw_max_deg = 20.0;
  double distance_min = 0.25;
  double distance_max = 0.35;
  double lateral_offset_max = 0.06;
  bool diversity = true;

  void validate() const;
};

void update_from_json(const nlohmann::json& j, CalibrationSessionConfig& cfg);
nlohmann::json to_json(const CalibrationSessionConfig& cfg);

struct CalibrationSession {
  std::vector<calibration::PoseScanSet> poses;
  RigidTransform true_extrinsics = default_true_extrinsics();
  RigidTransform mount_guess = default_mount_guess();
  Plane true_plane{Vec3::UnitZ(), 0.0};
  calibration::Sector sector;
};

CalibrationSession run_calibration_session(const PhantomParams& board, const SensorModel& sensor,
                                           const RigidTransform& true_extrinsics,
                                           const CalibrationSessionConfig& cfg,
                                           std::uint64_t seed);

/// Writes poses.csv, scans/pose_XX.csv, session.json and truth.json.
void write_calibration_session(const std::filesystem::path& dir, const CalibrationSession& session,
                               const SensorModel& sensor);

struct SweepSessionConfig {
  double clearance = 0.30;
  double roll_deg = 10.0;
  double speed = 0.05;
  double margin = 0.03;
  double lateral_offset = 0.0;
  double waypoint_rate = 50.0;
  int sweep_count = 2;

  void validate() const;
};

void update_from_json(const nlohmann::json& j, SweepSessionConfig& cfg);
nlohmann::json to_json(const SweepSessionConfig& cfg);

struct SweepSession {
  std::vector<reconstruction::SweepRecording> recordings;
  RigidTransform true_extrinsics = default_true_extrinsics();
  std::optional<Vec3> marker_apex;
  std::optional<Vec3> pmi;
};

SweepSession run_sweep_session(const Phantom& phantom, const mesh::RayCaster& caster,
                               const SensorModel& sensor, const RigidTransform& true_extrinsics,
                               const SweepSessionConfig& cfg, std::uint64_t seed);

/// Writes the recording directory plus truth.json, gt_cloud.ply and
/// scene_labeled.ply.
void write_sweep_session(const std::filesystem::path& dir, const SweepSession& session,
                         const Phantom& phantom, const SensorModel& sensor);

enum class ScenarioKind { kCalibration, kSweep, kTemplate };

struct SimScenario {
  ScenarioKind kind = ScenarioKind::kSweep;
  std::uint64_t seed = 0;
  PhantomParams phantom;
  SensorModel sensor;
  RigidTransform true_extrinsics = default_true_extrinsics();
  CalibrationSessionConfig calibration;
  SweepSessionConfig sweep;
  std::string template_name;
};

SimScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimScenario& scenario);

}  // namespace lidarprobe::simulator

#endif  // LIDARPROBE_SIMULATOR_HPP
