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

#include "lidarprobe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lidarprobe/errors.hpp"

namespace lidarprobe::mesh {

std::string to_string(SurfaceLabel label) {
  switch (label) {
    case SurfaceLabel::kChest: return "chest";
    case SurfaceLabel::kArm: return "arm";
    case SurfaceLabel::kBed: return "bed";
    case SurfaceLabel::kMarker: return "marker";
  }
  return "unknown";
}

void TriangleMesh::append(const TriangleMesh& other) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

void TriangleMesh::validate() const {
  if (labels.size() != faces.size()) fail(ErrorKind::kInvalidInput, "mesh label count mismatch");
  for (const Vec3& v : vertices) {
    if (!v.allFinite()) fail(ErrorKind::kInvalidInput, "mesh vertex is not finite");
  }
  for (const auto& f : faces) {
    for (std::uint32_t idx : f) {
      if (idx >= vertices.size()) fail(ErrorKind::kInvalidInput, "mesh face index out of range");
    }
  }
}

std::pair<Vec3, Vec3> TriangleMesh::bounds(std::optional<SurfaceLabel> label) const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (label && labels[i] != *label) continue;
    for (std::uint32_t idx : faces[i]) {
      lo = lo.cwiseMin(vertices[idx]);
      hi = hi.cwiseMax(vertices[idx]);
    }
  }
  return {lo, hi};
}

TriangleMesh rectangle(double size_x, double size_y, SurfaceLabel label) {
  if (!(size_x > 0.0) || !(size_y > 0.0)) fail(ErrorKind::kInvalidInput, "rectangle size must be positive");
  TriangleMesh m;
  const double hx = 0.5 * size_x;
  const double hy = 0.5 * size_y;
  m.vertices = {{-hx, -hy, 0.0}, {hx, -hy, 0.0}, {hx, hy, 0.0}, {-hx, hy, 0.0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.labels = {label, label};
  return m;
}

TriangleMesh icosphere(const Vec3& center, double radius, int subdivisions, SurfaceLabel label) {
  if (!(radius > 0.0) || subdivisions < 0) fail(ErrorKind::kInvalidInput, "invalid icosphere parameters");
  // Icosahedron with vertices (0, +-1, +-phi) cycled; rotated so one vertex is on +z.
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& p : v) p.normalize();
  const Vec3 top = v[5];
  const Eigen::Quaterniond align = Eigen::Quaterniond::FromTwoVectors(top, Vec3::UnitZ());
  for (Vec3& p : v) p = (align * p).normalized();
  v[5] = Vec3::UnitZ();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    const auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const std::uint32_t ab = mid(t[0], t[1]);
      const std::uint32_t bc = mid(t[1], t[2]);
      const std::uint32_t ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  for (const Vec3& p : v) m.vertices.push_back(center + radius * p);
  m.faces = std::move(f);
  m.labels.assign(m.faces.size(), label);
  return m;
}

TriangleMesh cylinder_y(const Vec3& center, double radius, double length, int segments,
                        SurfaceLabel label) {
  if (!(radius > 0.0) || !(length > 0.0) || segments < 3) {
    fail(ErrorKind::kInvalidInput, "invalid cylinder parameters");
  }
  TriangleMesh m;
  const double h = 0.5 * length;
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = kTwoPi * i / n;
    const double x = center.x() + radius * std::cos(a);
    const double z = center.z() + radius * std::sin(a);
    m.vertices.emplace_back(x, center.y() - h, z);
    m.vertices.emplace_back(x, center.y() + h, z);
  }
  const std::uint32_t cap_lo = 2 * n;
  const std::uint32_t cap_hi = 2 * n + 1;
  m.vertices.emplace_back(center.x(), center.y() - h, center.z());
  m.vertices.emplace_back(center.x(), center.y() + h, center.z());
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.faces.push_back({2 * i, 2 * j, 2 * j + 1});
    m.faces.push_back({2 * i, 2 * j + 1, 2 * i + 1});
    m.faces.push_back({cap_lo, 2 * j, 2 * i});
    m.faces.push_back({cap_hi, 2 * i + 1, 2 * j + 1});
  }
  m.labels.assign(m.faces.size(), label);
  return m;
}

TriangleMesh box(const Vec3& lo, const Vec3& hi, SurfaceLabel label) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                            (i & 4) ? hi.z() : lo.z());
  }
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  m.labels.assign(m.faces.size(), label);
  return m;
}

std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a,
                                         const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  const double scale = e1.norm() * e2.norm() * direction.norm();
  if (std::abs(det) <= 1e-14 * scale) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > 1e-12)) return std::nullopt;
  return t;
}

RayCaster::RayCaster(TriangleMesh mesh, std::size_t bvh_threshold) : mesh_(std::move(mesh)) {
  mesh_.validate();
  if (mesh_.face_count() <= bvh_threshold) return;
  const auto n = static_cast<std::uint32_t>(mesh_.face_count());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0U);
  centroids_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& f = mesh_.faces[i];
    centroids_[i] = (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
  }
  nodes_.reserve(2 * n / 4 + 1);
  build(0, n);
}

std::int32_t RayCaster::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  Vec3 clo = node.lo;
  Vec3 chi = node.hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (std::uint32_t idx : mesh_.faces[order_[i]]) {
      node.lo = node.lo.cwiseMin(mesh_.vertices[idx]);
      node.hi = node.hi.cwiseMax(mesh_.vertices[idx]);
    }
    clo = clo.cwiseMin(centroids_[order_[i]]);
    chi = chi.cwiseMax(centroids_[order_[i]]);
  }
  node.begin = begin;
  node.end = end;
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 4) return id;
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  if (!(chi[axis] > clo[axis])) return id;
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids_[a][axis];
                     const double cb = centroids_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void RayCaster::consider(std::size_t face, const Vec3& origin, const Vec3& direction,
                         double max_range, std::optional<RayHit>& best) const {
  const auto& f = mesh_.faces[face];
  const auto t = intersect_triangle(origin, direction, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                                    mesh_.vertices[f[2]]);
  if (!t || *t > max_range) return;
  if (!best || *t < best->distance || (*t == best->distance && face < best->face)) {
    best = RayHit{*t, face, mesh_.labels[face]};
  }
}

std::optional<RayHit> RayCaster::cast_brute_force(const Vec3& origin, const Vec3& direction,
                                                  double max_range) const {
  const Vec3 d = direction.normalized();
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < mesh_.face_count(); ++i) consider(i, origin, d, max_range, best);
  return best;
}

namespace {

// Returns the entry parameter of the ray into the box, or +inf on a miss.
double slab_entry(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& inv_dir) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::isinf(inv_dir[a])) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (lo[a] - origin[a]) * inv_dir[a];
    double tb = (hi[a] - origin[a]) * inv_dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  // Slack keeps boxes of axis-flat geometry from being rejected by rounding.
  const double slack = 1e-9 * (1.0 + std::abs(t1));
  return t0 <= t1 + slack ? t0 : std::numeric_limits<double>::infinity();
}

}  // namespace

std::optional<RayHit> RayCaster::cast(const Vec3& origin, const Vec3& direction,
                                      double max_range) const {
  if (nodes_.empty()) return cast_brute_force(origin, direction, max_range);
  const Vec3 d = direction.normalized();
  Vec3 inv_dir;
  for (int a = 0; a < 3; ++a) {
    inv_dir[a] = d[a] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / d[a];
  }
  std::optional<RayHit> best;
  std::vector<std::pair<double, std::int32_t>> stack;
  stack.reserve(64);
  const double root_entry = slab_entry(nodes_[0].lo, nodes_[0].hi, origin, inv_dir);
  if (std::isinf(root_entry)) return best;
  stack.emplace_back(root_entry, 0);
  while (!stack.empty()) {
    const auto [entry, id] = stack.back();
    stack.pop_back();
    const double limit = best ? best->distance : max_range;
    if (entry > limit * (1.0 + 1e-12) + 1e-12) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) consider(order_[i], origin, d, max_range, best);
      continue;
    }
    const double el = slab_entry(nodes_[node.left].lo, nodes_[node.left].hi, origin, inv_dir);
    const double er = slab_entry(nodes_[node.right].lo, nodes_[node.right].hi, origin, inv_dir);
    // Push the farther child first so the nearer one is processed next.
    if (el <= er) {
      if (!std::isinf(er)) stack.emplace_back(er, node.right);
      if (!std::isinf(el)) stack.emplace_back(el, node.left);
    } else {
      if (!std::isinf(el)) stack.emplace_back(el, node.left);
      if (!std::isinf(er)) stack.emplace_back(er, node.right);
    }
  }
  return best;
}

LabeledSamples sample_surface(const TriangleMesh& mesh, double spacing,
                              std::optional<SurfaceLabel> only) {
  if (!(spacing > 0.0)) fail(ErrorKind::kInvalidInput, "sample spacing must be positive");
  LabeledSamples out;
  for (std::size_t i = 0; i < mesh.face_count(); ++i) {
    if (only && mesh.labels[i] != *only) continue;
    const auto& f = mesh.faces[i];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double edge = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    const int n = std::max(1, static_cast<int>(std::ceil(edge / spacing)));
    for (int u = 0; u <= n; ++u) {
      for (int v = 0; u + v <= n; ++v) {
        const double fu = static_cast<double>(u) / n;
        const double fv = static_cast<double>(v) / n;
        out.points.push_back(a + fu * (b - a) + fv * (c - a));
        out.labels.push_back(mesh.labels[i]);
      }
    }
  }
  return out;
}

}  // namespace lidarprobe::mesh
