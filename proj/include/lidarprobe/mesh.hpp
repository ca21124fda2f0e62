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

#ifndef LIDARPROBE_MESH_HPP
#define LIDARPROBE_MESH_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lidarprobe/geometry.hpp"

namespace lidarprobe::mesh {

enum class SurfaceLabel : int { kChest = 0, kArm = 1, kBed = 2, kMarker = 3 };

std::string to_string(SurfaceLabel label);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<SurfaceLabel> labels;  // one per face

  std::size_t face_count() const noexcept { return faces.size(); }
  void append(const TriangleMesh& other);
  /// Throws invalid-input on out-of-range indices, label count mismatch or
  /// non-finite vertices.
  void validate() const;
  /// Axis-aligned bounds over the vertices referenced by faces with `label`.
  std::pair<Vec3, Vec3> bounds(std::optional<SurfaceLabel> label = std::nullopt) const;
};

/// Two-triangle rectangle in the z = 0 plane centered at the origin.
TriangleMesh rectangle(double size_x, double size_y, SurfaceLabel label);
/// Subdivided icosahedron projected onto the sphere. One vertex lies on +z.
TriangleMesh icosphere(const Vec3& center, double radius, int subdivisions, SurfaceLabel label);
/// Capped cylinder along the y axis.
TriangleMesh cylinder_y(const Vec3& center, double radius, double length, int segments,
                        SurfaceLabel label);
/// Axis-aligned box.
TriangleMesh box(const Vec3& lo, const Vec3& hi, SurfaceLabel label);

struct RayHit {
  double distance = 0.0;
  std::size_t face = 0;
  SurfaceLabel label = SurfaceLabel::kChest;
};

/// Moller-Trumbore intersection; returns the ray parameter t > 0 or nullopt.
std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a,
                                         const Vec3& b, const Vec3& c);

/// Nearest-hit ray caster. Meshes above `bvh_threshold` faces use a bounding
/// volume hierarchy, smaller ones a linear scan. Equal distances resolve to
/// the lower face index, so both paths return identical hits.
class RayCaster {
 public:
  explicit RayCaster(TriangleMesh mesh, std::size_t bvh_threshold = 10000);

  const TriangleMesh& mesh() const noexcept { return mesh_; }
  bool uses_bvh() const noexcept { return !nodes_.empty(); }

  std::optional<RayHit> cast(const Vec3& origin, const Vec3& direction, double max_range) const;
  std::optional<RayHit> cast_brute_force(const Vec3& origin, const Vec3& direction,
                                         double max_range) const;

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void consider(std::size_t face, const Vec3& origin, const Vec3& direction, double max_range,
                std::optional<RayHit>& best) const;

  TriangleMesh mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

/// Points sampled on every face on a barycentric lattice whose spacing is at
/// most `spacing`; each sample carries its face label.
struct LabeledSamples {
  std::vector<Vec3> points;
  std::vector<SurfaceLabel> labels;
};
LabeledSamples sample_surface(const TriangleMesh& mesh, double spacing,
                              std::optional<SurfaceLabel> only = std::nullopt);

}  // namespace lidarprobe::mesh

#endif  // LIDARPROBE_MESH_HPP
