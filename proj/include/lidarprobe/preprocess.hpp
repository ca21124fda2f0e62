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

#ifndef LIDARPROBE_PREPROCESS_HPP
#define LIDARPROBE_PREPROCESS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "lidarprobe/geometry.hpp"
#include "lidarprobe/neighbor_index.hpp"

namespace lidarprobe::preprocess {

struct PreprocessConfig {
  double voxel_size = 0.003;
  std::size_t sor_k = 20;
  double sor_std_ratio = 2.0;
  double ror_radius = 0.010;
  std::size_t ror_min_neighbors = 5;
  double cluster_eps = 0.015;
  std::size_t cluster_min_points = 10;
  int poisson_grid_resolution = 128;
  double trim_distance = 0.010;
  std::size_t normal_k = 30;
  int poisson_max_iterations = 4000;
  double poisson_tolerance = 1e-7;
  double poisson_screening = 4.0;

  void validate() const;
};

void update_from_json(const nlohmann::json& j, PreprocessConfig& cfg);
nlohmann::json to_json(const PreprocessConfig& cfg);

/// One centroid per occupied voxel, ordered by voxel key. Normals are dropped.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Drops points whose mean distance to their k nearest neighbors exceeds
/// mean + std_ratio * std over the cloud. Requires more than k points.
PointCloud statistical_outlier_removal(const PointCloud& cloud, std::size_t k, double std_ratio);

/// Drops points with fewer than `min_neighbors` other points within `radius`.
PointCloud radius_outlier_removal(const PointCloud& cloud, double radius, std::size_t min_neighbors);

/// DBSCAN labels: -1 for noise, otherwise a cluster id. Core points have at
/// least `min_points` points (self included) within `eps`. Cluster ids follow
/// the lowest core index of each cluster; a border point joins the adjacent
/// cluster with the smallest id.
std::vector<int> dbscan_labels(std::span<const Vec3> points, double eps, std::size_t min_points);

/// Clusters sorted by descending size (ties: smaller id first); noise dropped.
std::vector<PointCloud> density_cluster(const PointCloud& cloud, double eps, std::size_t min_points);

/// Per-location sensor viewpoint: either one fixed point, or the viewpoint
/// attached to the nearest anchor point (e.g. raw samples and the sensor
/// origins they were measured from).
class ViewpointField {
 public:
  explicit ViewpointField(const Vec3& viewpoint);
  ViewpointField(std::vector<Vec3> anchors, std::vector<Vec3> viewpoints);

  Vec3 at(const Vec3& p) const;

 private:
  std::vector<Vec3> anchors_;
  std::vector<Vec3> viewpoints_;
  NeighborIndex index_;
};

/// PCA normals over the k nearest neighbors (self included), oriented so that
/// (viewpoint - p) · n >= 0. Requires more than k points.
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint);
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const ViewpointField& viewpoints);

/// Regular-grid indicator function; values live at cell centers
/// origin + (i + 1/2, j + 1/2, k + 1/2) * spacing.
struct ImplicitSurface {
  Vec3 origin = Vec3::Zero();
  double spacing = 0.0;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  std::vector<double> values;
  double iso_value = 0.0;
  int iterations = 0;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i;
  }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  /// Trilinear interpolation (clamped to the grid).
  double sample(const Vec3& p) const;
};

/// Solves lap(chi) = div(V) with chi = 0 on the grid boundary by conjugate
/// gradients; V is the oriented-normal field splatted onto a staggered grid.
/// A positive `screening` adds a penalty pulling chi toward zero at the input
/// samples; its weight is the total per occupied grid cell.
ImplicitSurface poisson_solve(const PointCloud& cloud, int grid_resolution, int max_iterations,
                              double tolerance, double screening = 0.0);

/// One vertex per grid cube whose corners straddle the iso value, moved onto
/// the interpolated level set.
std::vector<Vec3> extract_isosurface(const ImplicitSurface& surface);

/// Poisson solve, iso extraction at the median indicator value over the input
/// samples, then removal of surface points farther than trim_distance from the
/// input cloud.
PointCloud poisson_reconstruct_and_trim(const PointCloud& cloud, const PreprocessConfig& cfg);

struct PreprocessStages {
  PointCloud downsampled;
  PointCloud sor;
  PointCloud ror;
  PointCloud cluster;
  PointCloud surface;  // trimmed Poisson samples with re-estimated normals
};

/// downsample -> SOR -> ROR -> keep largest cluster -> normals -> Poisson + trim
/// -> normals.
PreprocessStages preprocess_pipeline_stages(const PointCloud& raw, const PreprocessConfig& cfg,
                                            const ViewpointField& viewpoints);
PointCloud preprocess_pipeline(const PointCloud& raw, const PreprocessConfig& cfg,
                               const ViewpointField& viewpoints);

}  // namespace lidarprobe::preprocess

#endif  // LIDARPROBE_PREPROCESS_HPP
