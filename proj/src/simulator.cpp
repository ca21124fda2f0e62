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

#include "lidarprobe/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/json_reader.hpp"
#include "lidarprobe/parallel.hpp"

namespace lidarprobe::simulator {

namespace {

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double frac(double x) { return x - std::floor(x); }

double gauss2(double dx, double dy, double sigma) {
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
nlohmann::json vec_json(const Vec2& v) { return {v.x(), v.y()}; }

template <int N>
void read_vec(JsonObjectReader& r, const std::string& key, Eigen::Matrix<double, N, 1>& out) {
  std::array<double, N> a{};
  if (r.get(key, a)) {
    for (int i = 0; i < N; ++i) out[i] = a[static_cast<std::size_t>(i)];
  }
}

}  // namespace

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::kMale: return "male";
    case PhantomKind::kFemale: return "female";
    case PhantomKind::kPlate: return "plate";
    case PhantomKind::kSphere: return "sphere";
  }
  return "unknown";
}

PhantomKind phantom_kind_from_string(const std::string& name) {
  if (name == "male") return PhantomKind::kMale;
  if (name == "female") return PhantomKind::kFemale;
  if (name == "plate") return PhantomKind::kPlate;
  if (name == "sphere") return PhantomKind::kSphere;
  fail(ErrorKind::kInvalidInput, "unknown phantom kind '" + name + "'");
}

void ChestParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::kInvalidInput, std::string("chest phantom: ") + name + " must be positive");
    }
  };
  positive(half_width, "half_width");
  positive(half_length, "half_length");
  positive(half_height, "half_height");
  positive(exponent_xz, "exponent_xz");
  positive(exponent_y, "exponent_y");
  if (half_width > 0.5 || half_length > 0.6 || half_height > 0.3) {
    fail(ErrorKind::kInvalidInput, "chest phantom: torso dimensions out of range");
  }
  if (exponent_xz < 2.0 || exponent_xz > 6.0 || exponent_y < 2.0 || exponent_y > 8.0) {
    fail(ErrorKind::kInvalidInput, "chest phantom: exponents must lie in [2, 6] and [2, 8]");
  }
  if (center_height < 0.0 || center_height >= half_height) {
    fail(ErrorKind::kInvalidInput, "chest phantom: center_height must lie in [0, half_height)");
  }
  if (sternum_depth < 0.0 || sternum_depth > 0.2 || rib_amplitude < 0.0 || rib_amplitude > 0.05 ||
      pectoral_prominence < 0.0 || pectoral_prominence > 0.3 || breast_prominence < 0.0 ||
      breast_prominence > 0.5 || rib_count < 0) {
    fail(ErrorKind::kInvalidInput, "chest phantom: feature amplitudes out of range");
  }
  if (std::abs(pmi_xy.x()) >= 0.9 || std::abs(pmi_xy.y()) >= 0.9) {
    fail(ErrorKind::kInvalidInput, "chest phantom: pmi_xy must lie inside (-0.9, 0.9)^2");
  }
  if (grid_alpha < 8 || grid_beta < 8 || grid_alpha > 4096 || grid_beta > 4096) {
    fail(ErrorKind::kInvalidInput, "chest phantom: grid resolution out of range");
  }
}

ChestParams default_chest(PhantomKind kind) {
  ChestParams p;
  if (kind == PhantomKind::kFemale) {
    p.half_width = 0.155;
    p.half_length = 0.21;
    p.half_height = 0.10;
    p.center_height = 0.04;
    p.sternum_and_ribs = false;
    p.pectoral_prominence = 0.0;
    p.breast_prominence = 0.22;
    p.pmi_xy = Vec2(0.36, 0.04);
  }
  return p;
}

ChestShape::ChestShape(ChestParams params) : params_(std::move(params)) { params_.validate(); }

Vec3 ChestShape::origin() const {
  return {params_.center_xy.x(), params_.center_xy.y(), params_.bed_height + params_.center_height};
}

double ChestShape::shape_norm(const Vec3& q) const {
  const double e = params_.exponent_xz;
  const double ey = params_.exponent_y;
  const double sx = std::pow(std::abs(q.x() / params_.half_width), e);
  const double sz = std::pow(std::abs(q.z() / params_.half_height), e);
  const double sy = std::pow(std::abs(q.y() / params_.half_length), ey);
  return std::pow(std::pow(sx + sz, ey / e) + sy, 1.0 / ey);
}

double ChestShape::modulation(const Vec3& q) const {
  const double s = shape_norm(q);
  if (!(s > 0.0)) return 0.0;
  const double x = q.x() / s / params_.half_width;
  const double y = q.y() / s / params_.half_length;
  const double z = q.z() / s / params_.half_height;
  const double zp = std::max(z, 0.0);
  double m = 0.0;
  if (params_.sternum_and_ribs) {
    const double band = sigmoid((y + 0.35) / 0.06) * sigmoid((0.85 - y) / 0.06);
    m -= params_.sternum_depth * std::exp(-(x / 0.08) * (x / 0.08)) * band * zp * zp;
    const double lateral = std::exp(-std::pow((x - 0.55) / 0.22, 2)) +
                           std::exp(-std::pow((x + 0.55) / 0.22, 2));
    m += params_.rib_amplitude * std::cos(kPi * params_.rib_count * y) * lateral * band * zp;
  }
  if (params_.pectoral_prominence > 0.0) {
    m += params_.pectoral_prominence *
         (gauss2(x - 0.42, y - 0.38, 0.18) + gauss2(x + 0.42, y - 0.38, 0.18)) * zp * zp;
  }
  if (params_.breast_prominence > 0.0) {
    m += params_.breast_prominence *
         (gauss2(x - 0.42, y - 0.30, 0.15) + gauss2(x + 0.42, y - 0.30, 0.15)) * zp * zp;
  }
  return m;
}

Vec3 ChestShape::surface_along(const Vec3& direction) const {
  const double s = shape_norm(direction);
  if (!(s > 0.0)) fail(ErrorKind::kInvalidInput, "chest surface query along a zero direction");
  return origin() + (1.0 + modulation(direction)) / s * direction;
}

Vec3 ChestShape::surface_at(double alpha, double beta) const {
  const Vec3 dir(std::cos(alpha) * std::cos(beta), std::sin(beta), std::sin(alpha) * std::cos(beta));
  return surface_along(dir);
}

Vec3 ChestShape::surface_at_footprint(const Vec2& xy) const {
  const double e = params_.exponent_xz;
  const double ey = params_.exponent_y;
  const double inner = std::pow(1.0 - std::pow(std::abs(xy.y()), ey), e / ey) - std::pow(std::abs(xy.x()), e);
  if (!(inner > 0.0)) fail(ErrorKind::kInvalidInput, "footprint coordinate outside the torso");
  const double z = std::pow(inner, 1.0 / e);
  return surface_along(Vec3(params_.half_width * xy.x(), params_.half_length * xy.y(),
                            params_.half_height * z));
}

double ChestShape::implicit(const Vec3& p) const {
  const Vec3 q = p - origin();
  const double s = shape_norm(q);
  if (!(s > 0.0)) return -1.0;
  return s / (1.0 + modulation(q)) - 1.0;
}

Vec3 ChestShape::normal(const Vec3& p) const {
  const double h = 1e-6;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 dp = Vec3::Zero();
    dp[a] = h;
    g[a] = (implicit(p + dp) - implicit(p - dp)) / (2.0 * h);
  }
  return g.normalized();
}

void PhantomParams::validate() const {
  if (kind == PhantomKind::kMale || kind == PhantomKind::kFemale) chest.validate();
  if (!(marker_radius > 0.0) || marker_radius > 0.05) {
    fail(ErrorKind::kInvalidInput, "phantom: marker_radius must lie in (0, 0.05]");
  }
  if (!(bed_half_size.x() > 0.0) || !(bed_half_size.y() > 0.0) || !(arm_radius > 0.0) ||
      arm_gap < 0.0) {
    fail(ErrorKind::kInvalidInput, "phantom: bed and arm dimensions must be positive");
  }
  if (!(plate_size.x() > 0.0) || !(plate_size.y() > 0.0)) {
    fail(ErrorKind::kInvalidInput, "phantom: plate size must be positive");
  }
  if (!(sphere_radius > 0.0) || sphere_subdivisions < 0 || sphere_subdivisions > 7) {
    fail(ErrorKind::kInvalidInput, "phantom: invalid sphere parameters");
  }
}

PhantomParams default_phantom(PhantomKind kind) {
  PhantomParams p;
  p.kind = kind;
  p.chest = default_chest(kind);
  return p;
}

void update_from_json(const nlohmann::json& j, PhantomParams& params) {
  JsonObjectReader r(j, "phantom");
  std::string kind;
  if (r.get("kind", kind)) {
    params.kind = phantom_kind_from_string(kind);
    params.chest = default_chest(params.kind);
  }
  if (const nlohmann::json* c = r.child("chest")) {
    JsonObjectReader cr(*c, "phantom.chest");
    ChestParams& ch = params.chest;
    read_vec<2>(cr, "center_xy", ch.center_xy);
    cr.get("bed_height", ch.bed_height);
    cr.get("half_width", ch.half_width);
    cr.get("half_length", ch.half_length);
    cr.get("half_height", ch.half_height);
    cr.get("center_height", ch.center_height);
    cr.get("exponent_xz", ch.exponent_xz);
    cr.get("exponent_y", ch.exponent_y);
    cr.get("sternum_and_ribs", ch.sternum_and_ribs);
    cr.get("sternum_depth", ch.sternum_depth);
    cr.get("rib_amplitude", ch.rib_amplitude);
    cr.get("rib_count", ch.rib_count);
    cr.get("pectoral_prominence", ch.pectoral_prominence);
    cr.get("breast_prominence", ch.breast_prominence);
    read_vec<2>(cr, "pmi_xy", ch.pmi_xy);
    cr.get("grid_alpha", ch.grid_alpha);
    cr.get("grid_beta", ch.grid_beta);
    cr.finish();
  }
  r.get("with_bed", params.with_bed);
  r.get("with_arms", params.with_arms);
  r.get("with_marker", params.with_marker);
  r.get("marker_radius", params.marker_radius);
  read_vec<2>(r, "bed_half_size", params.bed_half_size);
  r.get("arm_radius", params.arm_radius);
  r.get("arm_gap", params.arm_gap);
  read_vec<3>(r, "plate_center", params.plate_center);
  read_vec<2>(r, "plate_size", params.plate_size);
  read_vec<3>(r, "sphere_center", params.sphere_center);
  r.get("sphere_radius", params.sphere_radius);
  r.get("sphere_subdivisions", params.sphere_subdivisions);
  r.finish();
  params.validate();
}

nlohmann::json to_json(const PhantomParams& p) {
  const ChestParams& c = p.chest;
  return {{"kind", to_string(p.kind)},
          {"chest",
           {{"center_xy", vec_json(c.center_xy)},
            {"bed_height", c.bed_height},
            {"half_width", c.half_width},
            {"half_length", c.half_length},
            {"half_height", c.half_height},
            {"center_height", c.center_height},
            {"exponent_xz", c.exponent_xz},
            {"exponent_y", c.exponent_y},
            {"sternum_and_ribs", c.sternum_and_ribs},
            {"sternum_depth", c.sternum_depth},
            {"rib_amplitude", c.rib_amplitude},
            {"rib_count", c.rib_count},
            {"pectoral_prominence", c.pectoral_prominence},
            {"breast_prominence", c.breast_prominence},
            {"pmi_xy", vec_json(c.pmi_xy)},
            {"grid_alpha", c.grid_alpha},
            {"grid_beta", c.grid_beta}}},
          {"with_bed", p.with_bed},
          {"with_arms", p.with_arms},
          {"with_marker", p.with_marker},
          {"marker_radius", p.marker_radius},
          {"bed_half_size", vec_json(p.bed_half_size)},
          {"arm_radius", p.arm_radius},
          {"arm_gap", p.arm_gap},
          {"plate_center", vec_json(p.plate_center)},
          {"plate_size", vec_json(p.plate_size)},
          {"sphere_center", vec_json(p.sphere_center)},
          {"sphere_radius", p.sphere_radius},
          {"sphere_subdivisions", p.sphere_subdivisions}};
}

namespace {

constexpr double kAlphaLo = -0.7;
constexpr double kAlphaHi = kPi + 0.7;

mesh::TriangleMesh chest_mesh(const ChestShape& shape) {
  const ChestParams& p = shape.params();
  const int na = p.grid_alpha;
  const int nb = p.grid_beta;
  mesh::TriangleMesh m;
  m.vertices.reserve(static_cast<std::size_t>((na + 1) * (nb + 1)));
  for (int i = 0; i <= na; ++i) {
    const double alpha = kAlphaLo + (kAlphaHi - kAlphaLo) * i / na;
    for (int j = 0; j <= nb; ++j) {
      const double beta = -kPi / 2 + kPi * j / nb;
      Vec3 v = shape.surface_at(alpha, beta);
      v.z() = std::max(v.z(), p.bed_height);
      m.vertices.push_back(v);
    }
  }
  const auto idx = [nb](int i, int j) { return static_cast<std::uint32_t>(i * (nb + 1) + j); };
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      m.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  m.labels.assign(m.faces.size(), mesh::SurfaceLabel::kChest);
  return m;
}

}  // namespace

Phantom generate_phantom(const PhantomParams& params) {
  params.validate();
  Phantom ph;
  ph.params = params;
  switch (params.kind) {
    case PhantomKind::kPlate: {
      ph.mesh = mesh::rectangle(params.plate_size.x(), params.plate_size.y(), mesh::SurfaceLabel::kChest);
      for (Vec3& v : ph.mesh.vertices) v += params.plate_center;
      break;
    }
    case PhantomKind::kSphere: {
      ph.mesh = mesh::icosphere(params.sphere_center, params.sphere_radius, params.sphere_subdivisions,
                                mesh::SurfaceLabel::kChest);
      break;
    }
    case PhantomKind::kMale:
    case PhantomKind::kFemale: {
      const ChestShape shape(params.chest);
      const ChestParams& c = params.chest;
      ph.mesh = chest_mesh(shape);
      ph.pmi = shape.pmi();
      if (params.with_bed) {
        const Vec3 lo(c.center_xy.x() - params.bed_half_size.x(),
                      c.center_xy.y() - params.bed_half_size.y(), c.bed_height - 0.05);
        const Vec3 hi(c.center_xy.x() + params.bed_half_size.x(),
                      c.center_xy.y() + params.bed_half_size.y(), c.bed_height);
        ph.mesh.append(mesh::box(lo, hi, mesh::SurfaceLabel::kBed));
      }
      if (params.with_arms) {
        const double offset = c.half_width + params.arm_gap + params.arm_radius;
        for (double side : {-1.0, 1.0}) {
          const Vec3 center(c.center_xy.x() + side * offset, c.center_xy.y(),
                            c.bed_height + params.arm_radius);
          ph.mesh.append(mesh::cylinder_y(center, params.arm_radius, 1.6 * c.half_length, 48,
                                          mesh::SurfaceLabel::kArm));
        }
      }
      if (params.with_marker) {
        const Vec3 n = shape.normal(*ph.pmi);
        mesh::TriangleMesh marker =
            mesh::icosphere(Vec3::Zero(), params.marker_radius, 3, mesh::SurfaceLabel::kMarker);
        const Mat3 align = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n).toRotationMatrix();
        const Vec3 center = *ph.pmi + params.marker_radius * n;
        for (Vec3& v : marker.vertices) v = center + align * v;
        ph.marker_center = center;
        ph.marker_apex = *ph.pmi + 2.0 * params.marker_radius * n;
        ph.mesh.append(marker);
      }
      ph.chest = shape;
      break;
    }
  }
  ph.mesh.validate();
  return ph;
}

PointCloud ground_truth_cloud(const Phantom& phantom, double spacing) {
  if (!(spacing > 0.0)) fail(ErrorKind::kInvalidInput, "ground-truth spacing must be positive");
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  if (phantom.chest) {
    const ChestShape& shape = *phantom.chest;
    const ChestParams& c = shape.params();
    const int na = static_cast<int>(std::ceil((kAlphaHi - kAlphaLo) * std::max(c.half_width, c.half_height) / spacing));
    const int nb = static_cast<int>(std::ceil(kPi * c.half_length / spacing));
    for (int i = 0; i < na; ++i) {
      const double alpha = kAlphaLo + (kAlphaHi - kAlphaLo) * (i + 0.5) / na;
      for (int j = 0; j < nb; ++j) {
        const double beta = -kPi / 2 + kPi * (j + 0.5) / nb;
        const Vec3 p = shape.surface_at(alpha, beta);
        if (p.z() < c.bed_height) continue;
        points.push_back(p);
        normals.push_back(shape.normal(p));
      }
    }
  } else {
    const mesh::LabeledSamples s = mesh::sample_surface(phantom.mesh, spacing, mesh::SurfaceLabel::kChest);
    for (const Vec3& p : s.points) {
      points.push_back(p);
      if (phantom.params.kind == PhantomKind::kSphere) {
        normals.push_back((p - phantom.params.sphere_center).normalized());
      } else {
        normals.push_back(Vec3::UnitZ());
      }
    }
  }
  return PointCloud(std::move(points), std::move(normals), FrameId::ground_truth());
}

mesh::LabeledSamples labeled_scene(const Phantom& phantom, double spacing) {
  mesh::LabeledSamples out;
  const PointCloud gt = ground_truth_cloud(phantom, spacing);
  out.points = gt.points();
  out.labels.assign(gt.size(), mesh::SurfaceLabel::kChest);
  for (mesh::SurfaceLabel label :
       {mesh::SurfaceLabel::kArm, mesh::SurfaceLabel::kBed, mesh::SurfaceLabel::kMarker}) {
    const mesh::LabeledSamples s = mesh::sample_surface(phantom.mesh, spacing, label);
    out.points.insert(out.points.end(), s.points.begin(), s.points.end());
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

void SensorModel::validate() const {
  if (!(angular_step > 0.0) || angular_step > kPi) {
    fail(ErrorKind::kInvalidInput, "sensor: angular_step must lie in (0, pi]");
  }
  if (!(range_noise_sigma >= 0.0)) fail(ErrorKind::kInvalidInput, "sensor: noise sigma must be >= 0");
  if (!(dropout_probability >= 0.0 && dropout_probability < 1.0)) {
    fail(ErrorKind::kInvalidInput, "sensor: dropout_probability must lie in [0, 1)");
  }
  if (!(revolution_period > 0.0) || !(max_range > 0.0)) {
    fail(ErrorKind::kInvalidInput, "sensor: period and max_range must be positive");
  }
  if (!(cast_window.lo >= 0.0 && cast_window.lo < cast_window.hi && cast_window.hi < kTwoPi)) {
    fail(ErrorKind::kInvalidInput, "sensor: cast window must satisfy 0 <= lo < hi < 2pi");
  }
}

void update_from_json(const nlohmann::json& j, SensorModel& s) {
  JsonObjectReader r(j, "sensor");
  double step_deg = rad2deg(s.angular_step);
  if (r.get("angular_step_deg", step_deg)) s.angular_step = deg2rad(step_deg);
  r.get("range_noise_sigma_m", s.range_noise_sigma);
  r.get("dropout_probability", s.dropout_probability);
  r.get("revolution_period_s", s.revolution_period);
  r.get("max_range_m", s.max_range);
  std::array<double, 2> window{rad2deg(s.cast_window.lo), rad2deg(s.cast_window.hi)};
  if (r.get("cast_window_deg", window)) s.cast_window = {deg2rad(window[0]), deg2rad(window[1])};
  r.finish();
  s.validate();
}

nlohmann::json to_json(const SensorModel& s) {
  return {{"angular_step_deg", rad2deg(s.angular_step)},
          {"range_noise_sigma_m", s.range_noise_sigma},
          {"dropout_probability", s.dropout_probability},
          {"revolution_period_s", s.revolution_period},
          {"max_range_m", s.max_range},
          {"cast_window_deg", {rad2deg(s.cast_window.lo), rad2deg(s.cast_window.hi)}}};
}

PolarScan cast_scan(const mesh::RayCaster& caster, const SensorModel& sensor,
                    const RigidTransform& extrinsics, const PoseAt& pose_at,
                    double scan_timestamp, std::uint64_t seed, std::uint64_t scan_index) {
  const auto first = static_cast<long>(std::ceil(sensor.cast_window.lo / sensor.angular_step - 1e-9));
  const auto last = static_cast<long>(std::floor(sensor.cast_window.hi / sensor.angular_step + 1e-9));
  PolarScan scan;
  scan.scan_timestamp = scan_timestamp;
  for (long i = std::max(first, 0L); i <= last; ++i) {
    const double theta = static_cast<double>(i) * sensor.angular_step;
    if (theta >= kTwoPi) break;
    const double t = scan_timestamp + theta / kTwoPi * sensor.revolution_period;
    const RigidTransform lidar = compose(pose_at(t), extrinsics);
    const Vec3 dir = lidar.rotation() * Vec3(std::cos(theta), std::sin(theta), 0.0);
    CounterRng rng(seed, scan_index, static_cast<std::uint64_t>(i));
    const bool dropped = rng.uniform() < sensor.dropout_probability;
    const double noise = rng.normal() * sensor.range_noise_sigma;
    const auto hit = caster.cast(lidar.translation(), dir, sensor.max_range);
    double range = 0.0;
    bool valid = false;
    if (hit && !dropped) {
      range = hit->distance + noise;
      valid = range > 0.0 && range <= sensor.max_range;
    }
    scan.samples.push_back(PolarSample::make(valid ? range : 0.0, theta, t, valid));
  }
  return scan;
}

PolarScan cast_scan(const mesh::RayCaster& caster, const SensorModel& sensor,
                    const RigidTransform& extrinsics, const RigidTransform& tcp_pose,
                    double scan_timestamp, std::uint64_t seed, std::uint64_t scan_index) {
  return cast_scan(
      caster, sensor, extrinsics, [&](double) { return tcp_pose; }, scan_timestamp, seed,
      scan_index);
}

Mat3 nominal_mount_rotation() {
  Mat3 r;
  r.col(0) = Vec3(0.0, 0.0, -1.0);
  r.col(1) = Vec3(0.0, 1.0, 0.0);
  r.col(2) = Vec3(1.0, 0.0, 0.0);
  return r;
}

Mat3 nominal_tcp_rotation() { return rot_z(kPi / 2) * rot_x(kPi); }

RigidTransform default_true_extrinsics() {
  const Mat3 r = nominal_mount_rotation() * so3_exp(Vec3(0.03, -0.02, 0.045));
  return RigidTransform(r, Vec3(0.035, -0.02, -0.06), FrameId::lidar(), FrameId::tcp());
}

RigidTransform default_mount_guess() {
  return RigidTransform(nominal_mount_rotation(), Vec3(0.03, -0.015, -0.05), FrameId::lidar(),
                        FrameId::tcp());
}

void CalibrationSessionConfig::validate() const {
  if (pose_count < 1 || pose_count > 1000 || scans_per_pose < 1 || scans_per_pose > 100) {
    fail(ErrorKind::kInvalidInput, "calibration session: pose_count/scans_per_pose out of range");
  }
  if (tilt_max_deg < 0.0 || tilt_max_deg > 60.0 || yaw_max_deg < 0.0 || yaw_max_deg > 90.0) {
    fail(ErrorKind::kInvalidInput, "calibration session: tilt/yaw bounds out of range");
  }
  if (!(distance_min > 0.0) || distance_max < distance_min || lateral_offset_max < 0.0) {
    fail(ErrorKind::kInvalidInput, "calibration session: invalid distances");
  }
}

void update_from_json(const nlohmann::json& j, CalibrationSessionConfig& c) {
  JsonObjectReader r(j, "calibration");
  r.get("pose_count", c.pose_count);
  r.get("scans_per_pose", c.scans_per_pose);
  r.get("tilt_max_deg", c.tilt_max_deg);
  r.get("yaw_max_deg", c.yaw_max_deg);
  r.get("distance_min_m", c.distance_min);
  r.get("distance_max_m", c.distance_max);
  r.get("lateral_offset_max_m", c.lateral_offset_max);
  r.get("diversity", c.diversity);
  r.finish();
  c.validate();
}

nlohmann::json to_json(const CalibrationSessionConfig& c) {
  return {{"pose_count", c.pose_count},
          {"scans_per_pose", c.scans_per_pose},
          {"tilt_max_deg", c.tilt_max_deg},
          {"yaw_max_deg", c.yaw_max_deg},
          {"distance_min_m", c.distance_min},
          {"distance_max_m", c.distance_max},
          {"lateral_offset_max_m", c.lateral_offset_max},
          {"diversity", c.diversity}};
}

CalibrationSession run_calibration_session(const PhantomParams& board, const SensorModel& sensor,
                                           const RigidTransform& true_extrinsics,
                                           const CalibrationSessionConfig& cfg,
                                           std::uint64_t seed) {
  cfg.validate();
  sensor.validate();
  if (board.kind != PhantomKind::kPlate) {
    fail(ErrorKind::kInvalidInput, "calibration sessions require a plate phantom");
  }
  const Phantom phantom = generate_phantom(board);
  const mesh::RayCaster caster(phantom.mesh);

  CalibrationSession session;
  session.true_extrinsics = true_extrinsics;
  session.true_plane = Plane(Vec3::UnitZ(), -board.plate_center.z());
  const auto k_count = static_cast<std::size_t>(cfg.pose_count);
  const auto spp = static_cast<std::size_t>(cfg.scans_per_pose);
  session.poses.resize(k_count);

  // Low-discrepancy sequences spread tilts, yaw, distance and offsets.
  const double g1 = 0.6180339887498949;
  const double g2 = 0.7548776662466927;
  const double g3 = 0.5698402909980532;
  const double g4 = 0.4142135623730950;
  const double g5 = 0.3247179572447460;
  const double g6 = 0.2207440846057596;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double kk = static_cast<double>(k);
    double tx = 0.0;
    double ty = 0.0;
    double yaw = 0.0;
    if (cfg.diversity) {
      tx = deg2rad(cfg.tilt_max_deg) * (2.0 * frac(kk * g1 + 0.13) - 1.0);
      ty = deg2rad(cfg.tilt_max_deg) * (2.0 * frac(kk * g2 + 0.41) - 1.0);
      yaw = deg2rad(cfg.yaw_max_deg) * (2.0 * frac(kk * g3 + 0.77) - 1.0);
    }
    const double dist = cfg.distance_min + (cfg.distance_max - cfg.distance_min) * frac(kk * g4 + 0.29);
    const Vec3 offset(cfg.lateral_offset_max * (2.0 * frac(kk * g5 + 0.61) - 1.0),
                      cfg.lateral_offset_max * (2.0 * frac(kk * g6 + 0.07) - 1.0), 0.0);
    const Mat3 rk = rot_z(yaw) * rot_x(tx) * rot_y(ty) * nominal_tcp_rotation();
    const Mat3 rl = rk * true_extrinsics.rotation();
    const Vec3 beam = rl * Vec3(-1.0, 0.0, 0.0);
    const double along = dist / std::max(std::abs(beam.z()), 0.2);
    const Vec3 lidar_origin = board.plate_center + offset - along * beam;
    const Vec3 tcp_position = lidar_origin - rk * true_extrinsics.translation();
    calibration::PoseScanSet& set = session.poses[k];
    set.pose_index = k;
    set.tcp_pose = RigidTransform(rk, tcp_position, FrameId::tcp(), FrameId::base());
    set.scans.resize(spp);
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(k_count * spp); ++idx) {
    const std::size_t k = static_cast<std::size_t>(idx) / spp;
    const std::size_t s = static_cast<std::size_t>(idx) % spp;
    calibration::PoseScanSet& set = session.poses[k];
    const double ts = static_cast<double>(k) + static_cast<double>(s) * sensor.revolution_period;
    set.scans[s] = cast_scan(caster, sensor, true_extrinsics, set.tcp_pose, ts, seed,
                             static_cast<std::uint64_t>(idx));
  }
  return session;
}

void write_calibration_session(const std::filesystem::path& dir, const CalibrationSession& session,
                               const SensorModel& sensor) {
  std::filesystem::create_directories(dir / "scans");
  std::vector<io::StampedPose> poses;
  nlohmann::json scan_files = nlohmann::json::array();
  for (const calibration::PoseScanSet& set : session.poses) {
    poses.push_back({static_cast<double>(set.pose_index), set.tcp_pose});
    std::ostringstream name;
    name << "scans/pose_" << (set.pose_index < 10 ? "0" : "") << set.pose_index << ".csv";
    io::write_scan_log(dir / name.str(), set.scans);
    scan_files.push_back(name.str());
  }
  io::write_pose_log(dir / "poses.csv", poses);
  const std::size_t spp = session.poses.empty() ? 0 : session.poses.front().scans.size();
  io::write_json(dir / "session.json",
                 {{"format", "lidarprobe.calibration-session/1"},
                  {"sector_deg", {rad2deg(session.sector.lo), rad2deg(session.sector.hi)}},
                  {"scans_per_pose", spp},
                  {"scan_files", scan_files},
                  {"mount_guess", io::to_json(session.mount_guess)}});
  io::write_json(dir / "truth.json",
                 {{"format", "lidarprobe.truth/1"},
                  {"kind", "calibration"},
                  {"extrinsics", io::to_json(session.true_extrinsics)},
                  {"plane",
                   {{"normal", vec_json(session.true_plane.normal())},
                    {"offset_m", session.true_plane.offset()}}},
                  {"sensor", to_json(sensor)}});
}

void SweepSessionConfig::validate() const {
  if (!(clearance > 0.0) || !(speed > 0.0) || margin < 0.0 || !(waypoint_rate > 0.0)) {
    fail(ErrorKind::kInvalidInput, "sweep session: clearance, speed and waypoint rate must be positive");
  }
  if (std::abs(roll_deg) > 45.0 || sweep_count < 1 || sweep_count > 16) {
    fail(ErrorKind::kInvalidInput, "sweep session: roll or sweep count out of range");
  }
}

void update_from_json(const nlohmann::json& j, SweepSessionConfig& c) {
  JsonObjectReader r(j, "sweep");
  r.get("clearance_m", c.clearance);
  r.get("roll_deg", c.roll_deg);
  r.get("speed_mps", c.speed);
  r.get("margin_m", c.margin);
  r.get("lateral_offset_m", c.lateral_offset);
  r.get("waypoint_rate_hz", c.waypoint_rate);
  r.get("sweep_count", c.sweep_count);
  r.finish();
  c.validate();
}

nlohmann::json to_json(const SweepSessionConfig& c) {
  return {{"clearance_m", c.clearance},         {"roll_deg", c.roll_deg},
          {"speed_mps", c.speed},               {"margin_m", c.margin},
          {"lateral_offset_m", c.lateral_offset}, {"waypoint_rate_hz", c.waypoint_rate},
          {"sweep_count", c.sweep_count}};
}

SweepSession run_sweep_session(const Phantom& phantom, const mesh::RayCaster& caster,
                               const SensorModel& sensor, const RigidTransform& true_extrinsics,
                               const SweepSessionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  sensor.validate();
  const auto [lo, hi] = phantom.mesh.bounds(mesh::SurfaceLabel::kChest);
  const double top = hi.z();
  const double cx = 0.5 * (lo.x() + hi.x()) + cfg.lateral_offset;
  const double y_lo = lo.y() - cfg.margin;
  const double y_hi = hi.y() + cfg.margin;
  const double duration = (y_hi - y_lo) / cfg.speed;
  if (duration < 2.0 * sensor.revolution_period) {
    fail(ErrorKind::kInvalidInput, "sweep session: sweep shorter than two revolutions");
  }

  SweepSession session;
  session.true_extrinsics = true_extrinsics;
  session.marker_apex = phantom.marker_apex;
  session.pmi = phantom.pmi;

  std::uint64_t scan_counter = 0;
  for (int sw = 0; sw < cfg.sweep_count; ++sw) {
    const double roll = deg2rad(sw % 2 == 0 ? cfg.roll_deg : -cfg.roll_deg);
    const bool forward = sw % 2 == 0;
    const Mat3 rk = rot_y(roll) * nominal_tcp_rotation();
    const double t0 = static_cast<double>(sw) * (duration + 2.0);
    const auto position_at = [&](double t) {
      const double u = (t - t0) / duration;
      const double y = forward ? y_lo + u * (y_hi - y_lo) : y_hi - u * (y_hi - y_lo);
      const Vec3 lidar_origin(cx, y, top + cfg.clearance);
      return Vec3(lidar_origin - rk * true_extrinsics.translation());
    };

    reconstruction::SweepRecording rec;
    rec.trajectory.clearance = cfg.clearance;
    const auto n_wp = static_cast<int>(std::ceil(duration * cfg.waypoint_rate));
    for (int w = 0; w <= n_wp; ++w) {
      const double t = w == n_wp ? t0 + duration : t0 + w / cfg.waypoint_rate;
      rec.trajectory.waypoints.push_back(
          {t, RigidTransform(rk, position_at(t), FrameId::tcp(), FrameId::base())});
    }
    rec.trajectory.validate();

    const auto n_scans =
        static_cast<std::size_t>(std::floor((duration - sensor.revolution_period) / sensor.revolution_period)) + 1;
    rec.scans.resize(n_scans);
    const reconstruction::SweepTrajectory& traj = rec.trajectory;
    const PoseAt pose_at = [&traj](double t) { return reconstruction::interpolate_pose(traj, t); };
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n_scans); ++s) {
      const double ts = t0 + static_cast<double>(s) * sensor.revolution_period;
      rec.scans[static_cast<std::size_t>(s)] =
          cast_scan(caster, sensor, true_extrinsics, pose_at, ts, seed,
                    scan_counter + static_cast<std::uint64_t>(s));
    }
    scan_counter += n_scans;
    session.recordings.push_back(std::move(rec));
  }
  return session;
}

void write_sweep_session(const std::filesystem::path& dir, const SweepSession& session,
                         const Phantom& phantom, const SensorModel& sensor) {
  reconstruction::write_recordings(dir, session.recordings);
  nlohmann::json truth = {{"format", "lidarprobe.truth/1"},
                          {"kind", "sweep"},
                          {"extrinsics", io::to_json(session.true_extrinsics)},
                          {"phantom", to_json(phantom.params)},
                          {"sensor", to_json(sensor)}};
  if (session.marker_apex) truth["marker_apex_m"] = vec_json(*session.marker_apex);
  if (session.pmi) {
    truth["pmi_m"] = vec_json(*session.pmi);
    if (phantom.chest) truth["pmi_normal"] = vec_json(phantom.chest->normal(*session.pmi));
  }
  io::write_json(dir / "truth.json", truth);
  io::write_ply(dir / "gt_cloud.ply", ground_truth_cloud(phantom), io::PlyFormat::kBinaryLittleEndian);
  const mesh::LabeledSamples scene = labeled_scene(phantom);
  std::vector<int> labels;
  labels.reserve(scene.labels.size());
  for (mesh::SurfaceLabel l : scene.labels) labels.push_back(static_cast<int>(l));
  io::write_ply(dir / "scene_labeled.ply", PointCloud(scene.points, FrameId::ground_truth()),
                io::PlyFormat::kBinaryLittleEndian, &labels);
}

SimScenario scenario_from_json(const nlohmann::json& j) {
  SimScenario sc;
  JsonObjectReader r(j, "scenario");
  const std::string kind = r.require<std::string>("kind");
  if (kind == "calibration") {
    sc.kind = ScenarioKind::kCalibration;
    sc.phantom = default_phantom(PhantomKind::kPlate);
    sc.sensor.range_noise_sigma = 0.0015;
  } else if (kind == "sweep") {
    sc.kind = ScenarioKind::kSweep;
    sc.sensor.range_noise_sigma = 0.002;
  } else if (kind == "template") {
    sc.kind = ScenarioKind::kTemplate;
    sc.phantom.with_arms = false;
  } else {
    fail(ErrorKind::kInvalidInput, "scenario: unknown kind '" + kind + "'");
  }
  r.get("seed", sc.seed);
  if (const nlohmann::json* p = r.child("phantom")) update_from_json(*p, sc.phantom);
  if (const nlohmann::json* s = r.child("sensor")) update_from_json(*s, sc.sensor);
  if (const nlohmann::json* x = r.child("true_extrinsics")) {
    sc.true_extrinsics = io::transform_from_json(*x);
    if (sc.true_extrinsics.from_frame() != FrameId::lidar() ||
        sc.true_extrinsics.to_frame() != FrameId::tcp()) {
      fail(ErrorKind::kFrame, "scenario: true_extrinsics must map lidar -> tcp");
    }
  }
  if (const nlohmann::json* c = r.child("calibration")) update_from_json(*c, sc.calibration);
  if (const nlohmann::json* s = r.child("sweep")) update_from_json(*s, sc.sweep);
  r.get("template_name", sc.template_name);
  r.finish();
  if (sc.kind == ScenarioKind::kTemplate && sc.template_name.empty()) {
    sc.template_name = to_string(sc.phantom.kind);
  }
  return sc;
}

nlohmann::json to_json(const SimScenario& sc) {
  const char* kind = sc.kind == ScenarioKind::kCalibration ? "calibration"
                     : sc.kind == ScenarioKind::kSweep     ? "sweep"
                                                           : "template";
  nlohmann::json j = {{"kind", kind},
                      {"seed", sc.seed},
                      {"phantom", to_json(sc.phantom)},
                      {"sensor", to_json(sc.sensor)},
                      {"true_extrinsics", io::to_json(sc.true_extrinsics)},
                      {"calibration", to_json(sc.calibration)},
                      {"sweep", to_json(sc.sweep)}};
  if (!sc.template_name.empty()) j["template_name"] = sc.template_name;
  return j;
}

}  // namespace lidarprobe::simulator
