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

#include "lidarprobe/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/json_reader.hpp"

namespace lidarprobe::preprocess {

void PreprocessConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::kInvalidInput, std::string("preprocess config: ") + name + " must be positive");
    }
  };
  positive(voxel_size, "voxel_size");
  positive(static_cast<double>(sor_k), "sor_k");
  positive(sor_std_ratio, "sor_std_ratio");
  positive(ror_radius, "ror_radius");
  positive(static_cast<double>(ror_min_neighbors), "ror_min_neighbors");
  positive(cluster_eps, "cluster_eps");
  positive(static_cast<double>(cluster_min_points), "cluster_min_points");
  positive(poisson_grid_resolution, "poisson_grid_resolution");
  positive(trim_distance, "trim_distance");
  positive(static_cast<double>(normal_k), "normal_k");
  positive(poisson_max_iterations, "poisson_max_iterations");
  positive(poisson_tolerance, "poisson_tolerance");
  if (!(poisson_screening >= 0.0) || !std::isfinite(poisson_screening)) {
    fail(ErrorKind::kInvalidInput, "preprocess config: poisson_screening must be finite and non-negative");
  }
  if (poisson_grid_resolution < 8 || poisson_grid_resolution > 512) {
    fail(ErrorKind::kInvalidInput, "preprocess config: poisson_grid_resolution must lie in [8, 512]");
  }
}

void update_from_json(const nlohmann::json& j, PreprocessConfig& cfg) {
  JsonObjectReader r(j, "preprocess");
  r.get("voxel_size", cfg.voxel_size);
  r.get("sor_k", cfg.sor_k);
  r.get("sor_std_ratio", cfg.sor_std_ratio);
  r.get("ror_radius", cfg.ror_radius);
  r.get("ror_min_neighbors", cfg.ror_min_neighbors);
  r.get("cluster_eps", cfg.cluster_eps);
  r.get("cluster_min_points", cfg.cluster_min_points);
  r.get("poisson_grid_resolution", cfg.poisson_grid_resolution);
  r.get("trim_distance", cfg.trim_distance);
  r.get("normal_k", cfg.normal_k);
  r.get("poisson_max_iterations", cfg.poisson_max_iterations);
  r.get("poisson_tolerance", cfg.poisson_tolerance);
  r.get("poisson_screening", cfg.poisson_screening);
  r.finish();
  cfg.validate();
}

nlohmann::json to_json(const PreprocessConfig& cfg) {
  return {{"voxel_size", cfg.voxel_size},
          {"sor_k", cfg.sor_k},
          {"sor_std_ratio", cfg.sor_std_ratio},
          {"ror_radius", cfg.ror_radius},
          {"ror_min_neighbors", cfg.ror_min_neighbors},
          {"cluster_eps", cfg.cluster_eps},
          {"cluster_min_points", cfg.cluster_min_points},
          {"poisson_grid_resolution", cfg.poisson_grid_resolution},
          {"trim_distance", cfg.trim_distance},
          {"normal_k", cfg.normal_k},
          {"poisson_max_iterations", cfg.poisson_max_iterations},
          {"poisson_tolerance", cfg.poisson_tolerance},
          {"poisson_screening", cfg.poisson_screening}};
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) fail(ErrorKind::kInvalidInput, "voxel_size must be positive");
  using Key = std::array<std::int64_t, 3>;
  const auto& pts = cloud.points();
  std::vector<std::pair<Key, std::size_t>> keyed(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    keyed[i] = {Key{static_cast<std::int64_t>(std::floor(pts[i].x() / voxel_size)),
                    static_cast<std::int64_t>(std::floor(pts[i].y() / voxel_size)),
                    static_cast<std::int64_t>(std::floor(pts[i].z() / voxel_size))},
                i};
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<Vec3> out;
  for (std::size_t b = 0; b < keyed.size();) {
    std::size_t e = b;
    Vec3 sum = Vec3::Zero();
    while (e < keyed.size() && keyed[e].first == keyed[b].first) {
      sum += pts[keyed[e].second];
      ++e;
    }
    out.push_back(sum / static_cast<double>(e - b));
    b = e;
  }
  return PointCloud(std::move(out), cloud.frame());
}

PointCloud statistical_outlier_removal(const PointCloud& cloud, std::size_t k, double std_ratio) {
  const std::size_t n = cloud.size();
  if (k == 0 || n <= k) {
    fail(ErrorKind::kTooFewPoints, "statistical outlier removal needs more than k = " +
                                       std::to_string(k) + " points, got " + std::to_string(n));
  }
  const NeighborIndex index(cloud);
  std::vector<double> mean_dist(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto nb = index.query(cloud.points()[i], k + 1);
    double sum = 0.0;
    std::size_t used = 0;
    for (const Neighbor& q : nb) {
      if (q.index == static_cast<std::size_t>(i) || used == k) continue;
      sum += std::sqrt(q.squared_distance);
      ++used;
    }
    mean_dist[i] = sum / static_cast<double>(used);
  }
  double mean = 0.0;
  for (double d : mean_dist) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double limit = mean + std_ratio * sd;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (mean_dist[i] <= limit) keep.push_back(i);
  }
  return cloud.select(keep);
}

PointCloud radius_outlier_removal(const PointCloud& cloud, double radius, std::size_t min_neighbors) {
  if (!(radius > 0.0)) fail(ErrorKind::kInvalidInput, "radius must be positive");
  const std::size_t n = cloud.size();
  if (n == 0) return cloud;
  const NeighborIndex index(cloud);
  std::vector<char> keep_flag(n, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const std::size_t others = index.radius(cloud.points()[i], radius).size() - 1;
    keep_flag[i] = others >= min_neighbors ? 1 : 0;
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep_flag[i]) keep.push_back(i);
  }
  return cloud.select(keep);
}

std::vector<int> dbscan_labels(std::span<const Vec3> points, double eps, std::size_t min_points) {
  if (!(eps > 0.0)) fail(ErrorKind::kInvalidInput, "cluster eps must be positive");
  const std::size_t n = points.size();
  std::vector<int> labels(n, -1);
  if (n == 0) return labels;
  const NeighborIndex index(points);
  std::vector<std::vector<std::size_t>> neighbors(n);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto nb = index.radius(points[i], eps);
    auto& list = neighbors[i];
    list.reserve(nb.size());
    for (const Neighbor& q : nb) list.push_back(q.index);
    std::sort(list.begin(), list.end());
  }
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= min_points ? 1 : 0;

  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || labels[seed] >= 0) continue;
    const int id = next++;
    labels[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q : neighbors[p]) {
        if (labels[q] >= 0) continue;
        labels[q] = id;
        if (core[q]) queue.push_back(q);
      }
    }
  }
  return labels;
}

std::vector<PointCloud> density_cluster(const PointCloud& cloud, double eps, std::size_t min_points) {
  const std::vector<int> labels = dbscan_labels(cloud.points(), eps, min_points);
  const int count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(count, 0)));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].size() > members[b].size();
  });
  std::vector<PointCloud> out;
  for (std::size_t id : order) out.push_back(cloud.select(members[id]));
  return out;
}

ViewpointField::ViewpointField(const Vec3& viewpoint) : viewpoints_{viewpoint} {}

ViewpointField::ViewpointField(std::vector<Vec3> anchors, std::vector<Vec3> viewpoints)
    : anchors_(std::move(anchors)), viewpoints_(std::move(viewpoints)) {
  if (anchors_.size() != viewpoints_.size() || anchors_.empty()) {
    fail(ErrorKind::kInvalidInput, "viewpoint field needs one viewpoint per anchor");
  }
  index_ = NeighborIndex(std::span<const Vec3>(anchors_));
}

Vec3 ViewpointField::at(const Vec3& p) const {
  if (anchors_.empty()) return viewpoints_.front();
  return viewpoints_[index_.nearest(p).index];
}

namespace {

PointCloud normals_impl(const PointCloud& cloud, std::size_t k,
                        const std::function<Vec3(const Vec3&)>& viewpoint) {
  const std::size_t n = cloud.size();
  if (k < 3 || n <= k) {
    fail(ErrorKind::kTooFewPoints, "normal estimation needs k >= 3 and more than k points (k = " +
                                       std::to_string(k) + ", N = " + std::to_string(n) + ")");
  }
  const NeighborIndex index(cloud);
  std::vector<Vec3> normals(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const Vec3& p = cloud.points()[i];
    const auto nb = index.query(p, k);
    Vec3 mean = Vec3::Zero();
    for (const Neighbor& q : nb) mean += cloud.points()[q.index];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (const Neighbor& q : nb) {
      const Vec3 d = cloud.points()[q.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if ((viewpoint(p) - p).dot(normal) < 0.0) normal = -normal;
    normals[i] = normal;
  }
  PointCloud out(cloud.points(), std::move(normals), cloud.frame());
  return out;
}

}  // namespace

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  return normals_impl(cloud, k, [&](const Vec3&) { return viewpoint; });
}

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const ViewpointField& viewpoints) {
  return normals_impl(cloud, k, [&](const Vec3& p) { return viewpoints.at(p); });
}

PreprocessStages preprocess_pipeline_stages(const PointCloud& raw, const PreprocessConfig& cfg,
                                            const ViewpointField& viewpoints) {
  cfg.validate();
  if (raw.empty()) fail(ErrorKind::kEmptyReconstruction, "preprocessing received an empty cloud");
  PreprocessStages st;
  st.downsampled = voxel_downsample(raw, cfg.voxel_size);
  st.sor = statistical_outlier_removal(st.downsampled, cfg.sor_k, cfg.sor_std_ratio);
  st.ror = radius_outlier_removal(st.sor, cfg.ror_radius, cfg.ror_min_neighbors);
  std::vector<PointCloud> clusters = density_cluster(st.ror, cfg.cluster_eps, cfg.cluster_min_points);
  if (clusters.empty()) fail(ErrorKind::kEmptyReconstruction, "clustering found no dense cluster");
  st.cluster = estimate_normals(clusters.front(), cfg.normal_k, viewpoints);
  const PointCloud surface = poisson_reconstruct_and_trim(st.cluster, cfg);
  st.surface = estimate_normals(surface, cfg.normal_k, viewpoints);
  return st;
}

PointCloud preprocess_pipeline(const PointCloud& raw, const PreprocessConfig& cfg,
                               const ViewpointField& viewpoints) {
  return preprocess_pipeline_stages(raw, cfg, viewpoints).surface;
}

}  // namespace lidarprobe::preprocess
