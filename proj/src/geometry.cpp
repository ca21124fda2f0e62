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

#include "lidarprobe/geometry.hpp"

#include <cmath>

#include "lidarprobe/errors.hpp"

namespace lidarprobe {

FrameId::FrameId(std::string name) : name_(std::move(name)) {
  if (name_.empty()) fail(ErrorKind::kInvalidInput, "frame id must be non-empty");
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const Mat3 k = skew(omega);
  double a;
  double b;
  if (theta2 < 1e-12) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v / q.w();
  const double angle = 2.0 * std::atan2(s, q.w());
  return angle * v / s;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const Mat3 k = skew(omega);
  double a;
  double b;
  if (theta2 < 1e-10) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

double rotation_angle(const Mat3& rotation) { return so3_log(rotation).norm(); }

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from,
                               FrameId to)
    : rotation_(rotation), translation_(translation), from_(std::move(from)), to_(std::move(to)) {
  const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation_.determinant();
  if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9)) {
    fail(ErrorKind::kInvalidInput, "rotation is not orthonormal with determinant +1");
  }
  if (!translation_.allFinite()) fail(ErrorKind::kInvalidInput, "translation is not finite");
}

RigidTransform RigidTransform::identity(FrameId from, FrameId to) {
  return {Mat3::Identity(), Vec3::Zero(), std::move(from), std::move(to)};
}

RigidTransform RigidTransform::from_rotation_vector(const Vec3& omega, const Vec3& translation,
                                                    FrameId from, FrameId to) {
  return {so3_exp(omega), translation, std::move(from), std::move(to)};
}

RigidTransform RigidTransform::from_quaternion(const Eigen::Quaterniond& q,
                                               const Vec3& translation, FrameId from, FrameId to) {
  if (!(q.norm() > 0.0)) fail(ErrorKind::kInvalidInput, "zero quaternion");
  return {q.normalized().toRotationMatrix(), translation, std::move(from), std::move(to)};
}

Eigen::Quaterniond RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), to_, from_};
}

RigidTransform RigidTransform::with_frames(FrameId from, FrameId to) const {
  return {rotation_, translation_, std::move(from), std::move(to)};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (!(a.from_frame() == b.to_frame())) {
    fail(ErrorKind::kFrame, "cannot compose: '" + a.from_frame().name() + "' != '" +
                                b.to_frame().name() + "'");
  }
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation(),
          b.from_frame(), a.to_frame()};
}

Vec3 transform_point(const RigidTransform& transform, const Vec3& p) { return transform.apply(p); }

Vec3 transform_point(const RigidTransform& transform, const Vec3& p, const FrameId& point_frame) {
  if (!(transform.from_frame() == point_frame)) {
    fail(ErrorKind::kFrame, "point in frame '" + point_frame.name() +
                                "' but transform expects '" + transform.from_frame().name() + "'");
  }
  return transform.apply(p);
}

Plane::Plane(const Vec3& normal, double offset) : normal_(normal), offset_(offset) {
  if (!(std::abs(normal_.norm() - 1.0) <= 1e-12) || !std::isfinite(offset_)) {
    fail(ErrorKind::kInvalidInput, "plane normal must have unit length");
  }
}

Plane Plane::from_unnormalized(const Vec3& normal, double offset) {
  const double n = normal.norm();
  if (!(n > 0.0)) fail(ErrorKind::kInvalidInput, "plane normal is zero");
  Vec3 unit = normal / n;
  unit.normalize();
  return {unit, offset / n};
}

double normalize_angle(double radians) {
  double a = std::fmod(radians, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

PolarSample PolarSample::make(double range, double angle, double timestamp, bool valid) {
  PolarSample s;
  s.angle = normalize_angle(angle);
  s.timestamp = timestamp;
  s.valid = valid && std::isfinite(range) && range >= 0.0;
  s.range = s.valid ? range : 0.0;
  return s;
}

void PolarScan::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].angle > samples[i - 1].angle)) {
      fail(ErrorKind::kInvalidInput, "scan angles must be strictly increasing");
    }
  }
}

std::size_t PolarScan::valid_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.valid ? 1 : 0;
  return n;
}

Vec3 polar_to_cartesian(const PolarSample& sample) {
  if (!sample.valid) fail(ErrorKind::kInvalidInput, "polar sample is invalid");
  return {sample.range * std::cos(sample.angle), sample.range * std::sin(sample.angle), 0.0};
}

PolarScan sector_filter(const PolarScan& scan, double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi && hi < kTwoPi)) {
    fail(ErrorKind::kInvalidInput, "sector bounds must satisfy 0 <= lo < hi < 2pi");
  }
  PolarScan out;
  out.scan_timestamp = scan.scan_timestamp;
  for (const auto& s : scan.samples) {
    if (s.angle >= lo && s.angle <= hi) out.samples.push_back(s);
  }
  return out;
}

PointCloud::PointCloud(std::vector<Vec3> points, FrameId frame)
    : points_(std::move(points)), frame_(std::move(frame)) {
  validate();
}

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals, FrameId frame)
    : points_(std::move(points)), normals_(std::move(normals)), frame_(std::move(frame)) {
  validate();
}

const std::vector<Vec3>& PointCloud::normals() const {
  if (!normals_) fail(ErrorKind::kMissingNormals, "point cloud has no normals");
  return *normals_;
}

void PointCloud::set_normals(std::vector<Vec3> normals) {
  normals_ = std::move(normals);
  validate();
}

void PointCloud::validate() const {
  for (const auto& p : points_) {
    if (!p.allFinite()) fail(ErrorKind::kInvalidInput, "point cloud contains non-finite points");
  }
  if (normals_) {
    if (normals_->size() != points_.size()) {
      fail(ErrorKind::kInvalidInput, "normal count does not match point count");
    }
    for (const auto& n : *normals_) {
      if (!(std::abs(n.norm() - 1.0) <= 1e-6)) {
        fail(ErrorKind::kInvalidInput, "normals must have unit length");
      }
    }
  }
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  std::vector<Vec3> pts;
  pts.reserve(indices.size());
  for (auto i : indices) pts.push_back(points_.at(i));
  if (!normals_) return {std::move(pts), frame_};
  std::vector<Vec3> nrm;
  nrm.reserve(indices.size());
  for (auto i : indices) nrm.push_back((*normals_)[i]);
  return {std::move(pts), std::move(nrm), frame_};
}

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points_) c += p;
  return points_.empty() ? c : Vec3(c / static_cast<double>(points_.size()));
}

PointCloud transform_cloud(const RigidTransform& transform, const PointCloud& cloud) {
  if (!(transform.from_frame() == cloud.frame())) {
    fail(ErrorKind::kFrame, "cloud in frame '" + cloud.frame().name() +
                                "' but transform expects '" + transform.from_frame().name() + "'");
  }
  std::vector<Vec3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(transform.apply(p));
  if (!cloud.has_normals()) return {std::move(pts), transform.to_frame()};
  std::vector<Vec3> nrm;
  nrm.reserve(cloud.size());
  for (const auto& n : cloud.normals()) nrm.push_back((transform.rotation() * n).normalized());
  return {std::move(pts), std::move(nrm), transform.to_frame()};
}

}  // namespace lidarprobe
