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

#include "lidarprobe/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/json_reader.hpp"

namespace lidarprobe::reconstruction {

void SweepTrajectory::validate() const {
  if (waypoints.empty()) fail(ErrorKind::kInvalidInput, "sweep trajectory has no waypoints");
  if (!(clearance > 0.0)) fail(ErrorKind::kInvalidInput, "sweep clearance must be positive");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (!(waypoints[i].timestamp > waypoints[i - 1].timestamp)) {
      fail(ErrorKind::kInvalidInput, "sweep waypoint timestamps must be strictly increasing");
    }
  }
  for (const io::StampedPose& wp : waypoints) {
    if (wp.pose.from_frame() != FrameId::tcp() || wp.pose.to_frame() != FrameId::base()) {
      fail(ErrorKind::kFrame, "sweep waypoints must map tcp -> base");
    }
  }
}

double SweepTrajectory::start_time() const {
  validate();
  return waypoints.front().timestamp;
}

double SweepTrajectory::end_time() const {
  validate();
  return waypoints.back().timestamp;
}

void SweepRecording::validate() const {
  trajectory.validate();
  const double lo = trajectory.waypoints.front().timestamp;
  const double hi = trajectory.waypoints.back().timestamp;
  for (const PolarScan& scan : scans) {
    scan.validate();
    if (scan.scan_timestamp < lo || scan.scan_timestamp > hi) {
      fail(ErrorKind::kOutOfRange, "scan timestamp outside the trajectory span");
    }
  }
}

RigidTransform interpolate_pose(const SweepTrajectory& trajectory, double t) {
  const auto& wps = trajectory.waypoints;
  if (wps.empty()) fail(ErrorKind::kInvalidInput, "sweep trajectory has no waypoints");
  if (!(t >= wps.front().timestamp && t <= wps.back().timestamp)) {
    fail(ErrorKind::kOutOfRange, "time " + std::to_string(t) + " outside trajectory span [" +
                                     std::to_string(wps.front().timestamp) + ", " +
                                     std::to_string(wps.back().timestamp) + "]");
  }
  const auto upper = std::upper_bound(wps.begin(), wps.end(), t,
                                      [](double v, const io::StampedPose& p) { return v < p.timestamp; });
  const std::size_t hi = static_cast<std::size_t>(upper - wps.begin());
  const io::StampedPose& a = wps[hi - 1];
  if (t == a.timestamp || hi == wps.size()) return a.pose;
  const io::StampedPose& b = wps[hi];
  const double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
  const Vec3 translation = (1.0 - u) * a.pose.translation() + u * b.pose.translation();
  const Eigen::Quaterniond q = a.pose.quaternion().slerp(u, b.pose.quaternion());
  return RigidTransform::from_quaternion(q, translation, a.pose.from_frame(), a.pose.to_frame());
}

void assign_sample_timestamps(PolarScan& scan, double revolution_period) {
  for (PolarSample& s : scan.samples) {
    s.timestamp = scan.scan_timestamp + s.angle / kTwoPi * revolution_period;
  }
}

AccumulatedSweeps accumulate_sweeps_detailed(const std::vector<SweepRecording>& recordings,
                                             const RigidTransform& extrinsics) {
  if (recordings.empty()) fail(ErrorKind::kInvalidInput, "no sweep recordings given");
  if (extrinsics.from_frame() != FrameId::lidar() || extrinsics.to_frame() != FrameId::tcp()) {
    fail(ErrorKind::kFrame, "extrinsics must map lidar -> tcp");
  }

  struct Item {
    double timestamp;
    Vec3 point;
    Vec3 origin;
    double range;
  };
  std::vector<std::vector<Item>> per_scan;
  for (const SweepRecording& rec : recordings) {
    rec.trajectory.validate();
    const std::size_t base = per_scan.size();
    per_scan.resize(base + rec.scans.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(rec.scans.size()); ++s) {
      const PolarScan filtered =
          sector_filter(rec.scans[s], rec.trajectory.sector.lo, rec.trajectory.sector.hi);
      std::vector<Item>& items = per_scan[base + static_cast<std::size_t>(s)];
      for (const PolarSample& sample : filtered.samples) {
        if (!sample.valid) continue;
        const RigidTransform sensor = compose(interpolate_pose(rec.trajectory, sample.timestamp), extrinsics);
        const Vec3 p = sensor.apply(polar_to_cartesian(sample));
        items.push_back({sample.timestamp, p, sensor.translation(), sample.range});
      }
    }
  }
  std::vector<Item> all;
  for (auto& items : per_scan) all.insert(all.end(), items.begin(), items.end());
  if (all.empty()) fail(ErrorKind::kEmptyReconstruction, "sweeps contain no valid in-sector samples");
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) {
    return std::tie(a.timestamp, a.point.x(), a.point.y(), a.point.z()) <
           std::tie(b.timestamp, b.point.x(), b.point.y(), b.point.z());
  });

  AccumulatedSweeps out;
  std::vector<Vec3> points;
  points.reserve(all.size());
  for (const Item& it : all) {
    points.push_back(it.point);
    out.sensor_origins.push_back(it.origin);
    out.ranges.push_back(it.range);
    out.timestamps.push_back(it.timestamp);
  }
  out.cloud = PointCloud(std::move(points), FrameId::base());
  return out;
}

PointCloud accumulate_sweeps(const std::vector<SweepRecording>& recordings,
                             const RigidTransform& extrinsics) {
  return accumulate_sweeps_detailed(recordings, extrinsics).cloud;
}

std::vector<Vec3> sensor_viewpoints(const std::vector<SweepRecording>& recordings,
                                    const RigidTransform& extrinsics, std::size_t stride) {
  stride = std::max<std::size_t>(stride, 1);
  std::vector<Vec3> out;
  for (const SweepRecording& rec : recordings) {
    for (std::size_t s = 0; s < rec.scans.size(); s += stride) {
      const double t = std::clamp(rec.scans[s].scan_timestamp, rec.trajectory.start_time(),
                                  rec.trajectory.end_time());
      out.push_back(compose(interpolate_pose(rec.trajectory, t), extrinsics).translation());
    }
  }
  return out;
}

void write_recordings(const std::filesystem::path& dir,
                      const std::vector<SweepRecording>& recordings) {
  std::filesystem::create_directories(dir);
  nlohmann::json sweeps = nlohmann::json::array();
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    const std::string name = "sweep_" + std::to_string(i);
    const SweepRecording& rec = recordings[i];
    std::filesystem::create_directories(dir / name);
    io::write_pose_log(dir / name / "trajectory.csv", rec.trajectory.waypoints);
    io::write_scan_log(dir / name / "scans.csv", rec.scans);
    sweeps.push_back({{"directory", name},
                      {"clearance_m", rec.trajectory.clearance},
                      {"sector_deg", {rad2deg(rec.trajectory.sector.lo), rad2deg(rec.trajectory.sector.hi)}}});
  }
  io::write_json(dir / "recording.json",
                 {{"format", "lidarprobe.recording/1"}, {"sweeps", sweeps}});
}

std::vector<SweepRecording> read_recordings(const std::filesystem::path& dir) {
  const nlohmann::json doc = io::read_json(dir / "recording.json");
  JsonObjectReader reader(doc, (dir / "recording.json").string());
  const std::string format = reader.require<std::string>("format");
  if (format != "lidarprobe.recording/1") {
    fail(ErrorKind::kInvalidInput, "recording.json: unsupported format '" + format + "'");
  }
  const nlohmann::json* sweeps = reader.child("sweeps");
  reader.finish();
  if (sweeps == nullptr || !sweeps->is_array() || sweeps->empty()) {
    fail(ErrorKind::kInvalidInput, "recording.json: 'sweeps' must be a non-empty array");
  }
  std::vector<SweepRecording> out;
  for (const nlohmann::json& entry : *sweeps) {
    JsonObjectReader sweep(entry, "recording.json sweep");
    const std::string name = sweep.require<std::string>("directory");
    SweepRecording rec;
    sweep.get("clearance_m", rec.trajectory.clearance);
    std::array<double, 2> sector{135.0, 225.0};
    sweep.get("sector_deg", sector);
    sweep.finish();
    rec.trajectory.sector = {deg2rad(sector[0]), deg2rad(sector[1])};
    rec.trajectory.waypoints = io::read_pose_log(dir / name / "trajectory.csv");
    rec.scans = io::read_scan_log(dir / name / "scans.csv");
    rec.trajectory.validate();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace lidarprobe::reconstruction
