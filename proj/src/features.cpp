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

#include "lidarprobe/features.hpp"

#include <algorithm>
#include <cmath>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/neighbor_index.hpp"

namespace lidarprobe::features {

namespace {

int bin_of(double value, double lo, double hi) {
  const int b = static_cast<int>(std::floor(kBinsPerFeature * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, kBinsPerFeature - 1);
}

std::vector<std::vector<Neighbor>> radius_neighbors(const PointCloud& cloud, double radius) {
  const NeighborIndex index(cloud);
  std::vector<std::vector<Neighbor>> out(cloud.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    std::vector<Neighbor> nb = index.radius(cloud.points()[i], radius);
    std::erase_if(nb, [](const Neighbor& n) { return n.squared_distance <= 0.0; });
    out[i] = std::move(nb);
  }
  return out;
}

std::vector<Histogram33> spfh_from_neighbors(const PointCloud& cloud,
                                             const std::vector<std::vector<Neighbor>>& neighbors) {
  const auto& pts = cloud.points();
  const auto& nrm = cloud.normals();
  std::vector<Histogram33> out(cloud.size(), Histogram33::Zero());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    Histogram33& h = out[i];
    for (const Neighbor& n : neighbors[i]) {
      const Eigen::Vector3i b = feature_bins(pair_feature(pts[i], nrm[i], pts[n.index], nrm[n.index]));
      h[b[0]] += 1.0;
      h[kBinsPerFeature + b[1]] += 1.0;
      h[2 * kBinsPerFeature + b[2]] += 1.0;
    }
  }
  return out;
}

void require_input(const PointCloud& cloud, double radius) {
  if (!cloud.has_normals()) fail(ErrorKind::kMissingNormals, "FPFH requires normals");
  if (!(radius > 0.0)) fail(ErrorKind::kInvalidInput, "FPFH radius must be positive");
}

}  // namespace

PairFeature pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  PairFeature f;
  Vec3 dp = p2 - p1;
  f.distance = dp.norm();
  if (f.distance == 0.0) return f;
  const double a1 = n1.dot(dp) / f.distance;
  const double a2 = n2.dot(dp) / f.distance;
  const Vec3* s_n = &n1;
  const Vec3* t_n = &n2;
  if (std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) > std::acos(std::clamp(std::abs(a2), 0.0, 1.0))) {
    std::swap(s_n, t_n);
    dp = -dp;
    f.phi = -a2;
  } else {
    f.phi = a1;
  }
  Vec3 v = dp.cross(*s_n);
  const double v_norm = v.norm();
  if (v_norm == 0.0) {
    f.phi = 0.0;
    return f;
  }
  v /= v_norm;
  const Vec3 w = s_n->cross(v);
  f.alpha = v.dot(*t_n);
  f.theta = std::atan2(w.dot(*t_n), s_n->dot(*t_n));
  return f;
}

Eigen::Vector3i feature_bins(const PairFeature& f) {
  return {bin_of(f.theta, -kPi, kPi), bin_of(f.alpha, -1.0, 1.0), bin_of(f.phi, -1.0, 1.0)};
}

std::vector<Histogram33> compute_spfh(const PointCloud& cloud, double radius) {
  require_input(cloud, radius);
  return spfh_from_neighbors(cloud, radius_neighbors(cloud, radius));
}

std::vector<Histogram33> compute_fpfh(const PointCloud& cloud, double radius) {
  require_input(cloud, radius);
  const auto neighbors = radius_neighbors(cloud, radius);
  const std::vector<Histogram33> spfh = spfh_from_neighbors(cloud, neighbors);
  std::vector<Histogram33> out(cloud.size(), Histogram33::Zero());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    Histogram33 h = spfh[i];
    const auto& nb = neighbors[i];
    if (!nb.empty()) {
      Histogram33 acc = Histogram33::Zero();
      for (const Neighbor& n : nb) acc += spfh[n.index] / std::sqrt(n.squared_distance);
      h += acc / static_cast<double>(nb.size());
    }
    for (int block = 0; block < 3; ++block) {
      auto seg = h.segment<kBinsPerFeature>(block * kBinsPerFeature);
      const double sum = seg.sum();
      if (sum > 0.0) seg *= 100.0 / sum;
    }
    out[i] = h;
  }
  return out;
}

}  // namespace lidarprobe::features
