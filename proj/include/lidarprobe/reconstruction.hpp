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

#ifndef LIDARPROBE_RECONSTRUCTION_HPP
#define LIDARPROBE_RECONSTRUCTION_HPP

#include <filesystem>
#include <vector>

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/geometry.hpp"
#include "lidarprobe/io.hpp"

namespace lidarprobe::reconstruction {

struct SweepTrajectory {
  std::vector<io::StampedPose> waypoints;  // tcp -> base, strictly increasing timestamps
  double clearance = 0.3;                  // meters
  calibration::Sector sector;

  void validate() const;
  double start_time() const;
  double end_time() const;
};

struct SweepRecording {
  SweepTrajectory trajectory;
  std::vector<PolarScan> scans;  // sample timestamps carry the intra-revolution time

  void validate() const;
};

/// Linear interpolation of translation and slerp of rotation between the
/// bracketing waypoints. Throws out-of-range outside the trajectory span.
RigidTransform interpolate_pose(const SweepTrajectory& trajectory, double t);

/// Sets every sample timestamp to scan_timestamp + angle / (2 pi) * period.
void assign_sample_timestamps(PolarScan& scan, double revolution_period);

struct AccumulatedSweeps {
  PointCloud cloud{FrameId::base()};
  std::vector<Vec3> sensor_origins;  // per point, base frame
  std::vector<double> ranges;        // per point, meters
  std::vector<double> timestamps;    // per point, seconds
};

/// Maps every valid in-sector sample through the pose interpolated at the
/// sample's timestamp and the given extrinsics (lidar -> tcp). Points are
/// ordered by (timestamp, x, y, z) so the result does not depend on the order
/// of the recordings.
AccumulatedSweeps accumulate_sweeps_detailed(const std::vector<SweepRecording>& recordings,
                                             const RigidTransform& extrinsics);
PointCloud accumulate_sweeps(const std::vector<SweepRecording>& recordings,
                             const RigidTransform& extrinsics);

/// Sensor origins (base frame) at each scan's timestamp, every `stride` scans.
std::vector<Vec3> sensor_viewpoints(const std::vector<SweepRecording>& recordings,
                                    const RigidTransform& extrinsics, std::size_t stride = 1);

/// Recording directory: `recording.json` listing sweep subdirectories, each
/// holding `trajectory.csv` (pose log) and `scans.csv` (scan log).
void write_recordings(const std::filesystem::path& dir,
                      const std::vector<SweepRecording>& recordings);
std::vector<SweepRecording> read_recordings(const std::filesystem::path& dir);

}  // namespace lidarprobe::reconstruction

#endif  // LIDARPROBE_RECONSTRUCTION_HPP
