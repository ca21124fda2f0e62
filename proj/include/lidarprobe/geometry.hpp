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

#ifndef LIDARPROBE_GEOMETRY_HPP
#define LIDARPROBE_GEOMETRY_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lidarprobe {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Symbolic coordinate frame name. Comparisons are exact string equality.
class FrameId {
 public:
  explicit FrameId(std::string name);

  static FrameId base() { return FrameId("base"); }
  static FrameId tcp() { return FrameId("tcp"); }
  static FrameId lidar() { return FrameId("lidar"); }
  static FrameId template_frame() { return FrameId("template"); }
  static FrameId ground_truth() { return FrameId("ground-truth"); }

  const std::string& name() const noexcept { return name_; }
  bool operator==(const FrameId& other) const = default;

 private:
  std::string name_;
};

Mat3 skew(const Vec3& v);

/// Rodrigues exponential map.
Mat3 so3_exp(const Vec3& omega);
/// Inverse of so3_exp; the returned vector has norm in [0, pi].
Vec3 so3_log(const Mat3& rotation);
/// Left Jacobian of SO(3): d/d(delta) exp(omega + delta) ~ exp(J_l delta) exp(omega).
Mat3 so3_left_jacobian(const Vec3& omega);

/// Axis-angle rotation; the vector's magnitude is the angle in radians.
struct RotationVector {
  Vec3 omega = Vec3::Zero();

  Mat3 to_matrix() const { return so3_exp(omega); }
  static RotationVector from_matrix(const Mat3& rotation) { return {so3_log(rotation)}; }
};

/// Rotation angle of R in radians.
double rotation_angle(const Mat3& rotation);

/// SE(3) pose mapping points expressed in `from` into `to`: x_to = R x_from + t.
class RigidTransform {
 public:
  /// Throws invalid-input unless `rotation` is orthonormal with det +1 within 1e-9.
  RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to);

  static RigidTransform identity(FrameId from, FrameId to);
  static RigidTransform from_rotation_vector(const Vec3& omega, const Vec3& translation,
                                             FrameId from, FrameId to);
  /// Unit quaternion; renormalized on construction.
  static RigidTransform from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation,
                                        FrameId from, FrameId to);

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }
  const FrameId& from_frame() const noexcept { return from_; }
  const FrameId& to_frame() const noexcept { return to_; }

  Eigen::Quaterniond quaternion() const;
  RotationVector rotation_vector() const { return RotationVector::from_matrix(rotation_); }
  Eigen::Matrix4d matrix() const;

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;

  RigidTransform with_frames(FrameId from, FrameId to) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
  FrameId from_;
  FrameId to_;
};

/// a ∘ b: maps b.from_frame to a.to_frame. Requires a.from_frame == b.to_frame.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

Vec3 transform_point(const RigidTransform& transform, const Vec3& p);
/// Frame-checked variant: `point_frame` must equal transform.from_frame().
Vec3 transform_point(const RigidTransform& transform, const Vec3& p, const FrameId& point_frame);

/// n·x + d = 0 with unit n.
class Plane {
 public:
  /// Throws invalid-input unless ||normal|| = 1 within 1e-12.
  Plane(const Vec3& normal, double offset);
  /// Normalizes (normal, offset) jointly.
  static Plane from_unnormalized(const Vec3& normal, double offset);

  const Vec3& normal() const noexcept { return normal_; }
  double offset() const noexcept { return offset_; }
  double signed_distance(const Vec3& p) const { return normal_.dot(p) + offset_; }

 private:
  Vec3 normal_;
  double offset_;
};

inline double plane_signed_distance(const Plane& plane, const Vec3& p) {
  return plane.signed_distance(p);
}

/// Wraps an angle into [0, 2pi).
double normalize_angle(double radians);

struct PolarSample {
  double range = 0.0;
  double angle = 0.0;
  double timestamp = 0.0;
  bool valid = false;

  /// Normalizes the angle; invalid samples get range 0.
  static PolarSample make(double range, double angle, double timestamp, bool valid);
};

struct PolarScan {
  std::vector<PolarSample> samples;
  double scan_timestamp = 0.0;

  /// Throws invalid-input unless sample angles are strictly increasing.
  void validate() const;
  std::size_t valid_count() const;
};

/// (r cos θ, r sin θ, 0) in the scanner frame. Throws invalid-input on invalid samples.
Vec3 polar_to_cartesian(const PolarSample& sample);

/// Keeps samples with angle in [lo, hi]; requires 0 <= lo < hi < 2pi.
PolarScan sector_filter(const PolarScan& scan, double lo, double hi);

/// Unordered 3D points in one frame with optional unit normals.
class PointCloud {
 public:
  explicit PointCloud(FrameId frame = FrameId::base()) : frame_(std::move(frame)) {}
  PointCloud(std::vector<Vec3> points, FrameId frame);
  PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals, FrameId frame);

  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<Vec3>& normals() const;
  bool has_normals() const noexcept { return normals_.has_value(); }
  const FrameId& frame() const noexcept { return frame_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  void set_normals(std::vector<Vec3> normals);
  void clear_normals() { normals_.reset(); }
  void set_frame(FrameId frame) { frame_ = std::move(frame); }

  /// Subset in the given index order; normals follow.
  PointCloud select(std::span<const std::size_t> indices) const;
  Vec3 centroid() const;

 private:
  void validate() const;

  std::vector<Vec3> points_;
  std::optional<std::vector<Vec3>> normals_;
  FrameId frame_;
};

/// Applies `transform` to every point (and rotates normals). The cloud's frame
/// must equal transform.from_frame(); the result is in transform.to_frame().
PointCloud transform_cloud(const RigidTransform& transform, const PointCloud& cloud);

}  // namespace lidarprobe

#endif  // LIDARPROBE_GEOMETRY_HPP
