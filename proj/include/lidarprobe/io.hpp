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

#ifndef LIDARPROBE_IO_HPP
#define LIDARPROBE_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidarprobe/geometry.hpp"

namespace lidarprobe::io {

namespace fs = std::filesystem;

enum class PlyFormat { kAscii, kBinaryLittleEndian };

struct PlyData {
  PointCloud cloud;
  std::optional<std::vector<int>> labels;
};

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

/// Writes x, y, z (and nx, ny, nz when present) as 64-bit floats. The frame
/// name is stored as a `comment frame <name>` header line.
void write_ply(const fs::path& path, const PointCloud& cloud, PlyFormat format = PlyFormat::kAscii,
               const std::vector<int>* labels = nullptr);
PlyData read_ply(const fs::path& path);

/// CSV fallback with header `x,y,z[,nx,ny,nz]`.
void write_cloud_csv(const fs::path& path, const PointCloud& cloud);
PointCloud read_cloud_csv(const fs::path& path, const FrameId& frame = FrameId::base());

/// Dispatches on extension (.ply or .csv).
PointCloud read_cloud(const fs::path& path);
void write_cloud(const fs::path& path, const PointCloud& cloud, PlyFormat format = PlyFormat::kAscii);

/// Scan log: header `timestamp,theta,range,valid`. A new scan starts whenever
/// theta does not increase.
void write_scan_log(const fs::path& path, const std::vector<PolarScan>& scans);
std::vector<PolarScan> read_scan_log(const fs::path& path);

struct StampedPose {
  double timestamp = 0.0;
  RigidTransform pose;
};

/// Pose log: header `timestamp,tx,ty,tz,qx,qy,qz,qw` (unit quaternion, scalar last).
void write_pose_log(const fs::path& path, const std::vector<StampedPose>& poses);
std::vector<StampedPose> read_pose_log(const fs::path& path, const FrameId& from = FrameId::tcp(),
                                       const FrameId& to = FrameId::base());

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
nlohmann::json read_json(const fs::path& path);
/// Two-space indented dump with trailing newline.
void write_json(const fs::path& path, const nlohmann::json& value);

nlohmann::json to_json(const RigidTransform& transform);
RigidTransform transform_from_json(const nlohmann::json& value);

nlohmann::json vec3_to_json(const Vec3& v);
/// Reads a 3-element numeric array; `context` names the field in errors.
Vec3 vec3_from_json(const nlohmann::json& value, const std::string& context);

}  // namespace lidarprobe::io

#endif  // LIDARPROBE_IO_HPP
