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

#ifndef LIDARPROBE_REGISTRATION_HPP
#define LIDARPROBE_REGISTRATION_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidarprobe/features.hpp"
#include "lidarprobe/geometry.hpp"
#include "lidarprobe/neighbor_index.hpp"

namespace lidarprobe::registration {

struct RegistrationConfig {
  double fitness_distance = 0.010;
  double fitness_threshold = 0.90;
  double feature_voxel = 0.010;
  double fpfh_radius = 0.025;
  double tuple_scale = 0.9;
  int tuple_max_count = 1000;
  int fgr_iterations = 64;
  double fgr_division_factor = 1.4;
  double fgr_max_correspondence_distance = 0.025;
  int icp_max_iterations = 50;
  double icp_delta = 1e-8;
  double scale_step = 0.1;
  double scale_min = 0.6;
  double scale_max = 1.4;
  int max_variants = 8;
  std::size_t probe_k = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

void update_from_json(const nlohmann::json& j, RegistrationConfig& cfg);
nlohmann::json to_json(const RegistrationConfig& cfg);

enum class SexVariant { kMale, kFemale };
std::string to_string(SexVariant v);
SexVariant sex_variant_from_string(const std::string& name);

struct TemplateModel {
  PointCloud cloud{FrameId::template_frame()};
  Vec3 probe_point = Vec3::Zero();
  SexVariant sex_variant = SexVariant::kMale;
  std::string name;
  double voxel_size = 0.003;

  /// Requires normals and p_T within 2 * voxel_size of a template point.
  void validate() const;
};

struct ScaleVariant {
  double scale = 1.0;
  PointCloud cloud{FrameId::template_frame()};
  Vec3 probe_point = Vec3::Zero();
};

/// p -> c + factor (p - c) about the template centroid c; normals are kept.
ScaleVariant scale_template(const TemplateModel& model, double factor);

struct RegistrationOutcome {
  RigidTransform transform = RigidTransform::identity(FrameId::template_frame(), FrameId::base());
  double fitness = 0.0;
  double inlier_rmse = 0.0;
  double scale_used = 1.0;
  int iterations_used = 0;
};

struct FitnessResult {
  double fitness = 0.0;
  double inlier_rmse = 0.0;
  std::size_t inliers = 0;
};

/// Fraction of transformed source points whose nearest target point lies
/// within `distance`, and the RMS distance over those matches.
FitnessResult evaluate_fitness(const PointCloud& source, const NeighborIndex& target_index,
                               const RigidTransform& transform, double distance);

/// A cloud reduced to voxel centroids carrying the normal of the nearest
/// original point, with FPFH descriptors.
struct FeatureCloud {
  PointCloud cloud;
  std::vector<features::Histogram33> features;
};

FeatureCloud make_feature_cloud(const PointCloud& cloud, double voxel, double radius);

/// Target-side data reused across scale variants.
class PreparedTarget {
 public:
  /// Without `with_features` only ICP can use the target.
  PreparedTarget(PointCloud target, const RegistrationConfig& cfg, bool with_features = true);

  const PointCloud& cloud() const noexcept { return cloud_; }
  const NeighborIndex& index() const noexcept { return index_; }
  const FeatureCloud& features() const noexcept { return features_; }

 private:
  PointCloud cloud_;
  NeighborIndex index_;
  FeatureCloud features_;
};

struct Correspondence {
  std::size_t source = 0;
  std::size_t target = 0;
};

/// Mutual nearest neighbors in feature space, ordered by source index.
std::vector<Correspondence> mutual_feature_matches(const FeatureCloud& source, const FeatureCloud& target);

/// Keeps correspondences from random triples whose pairwise edge-length
/// ratios all lie in (scale, 1 / scale). Duplicates are removed.
std::vector<Correspondence> tuple_filter(const std::vector<Correspondence>& matches,
                                         const PointCloud& source, const PointCloud& target,
                                         const RegistrationConfig& cfg);

/// Coarse template -> target alignment. Throws registration-failure when
/// fewer than 10 correspondences survive the tuple test.
RigidTransform fast_global_registration(const FeatureCloud& source, const FeatureCloud& target,
                                        const RegistrationConfig& cfg);

/// Point-to-plane ICP against the target normals.
RegistrationOutcome icp_refine(const PointCloud& source, const PreparedTarget& target,
                               const RigidTransform& init, const RegistrationConfig& cfg);

/// FGR followed by ICP for one scale variant.
RegistrationOutcome register_variant(const ScaleVariant& variant, const PreparedTarget& target,
                                     const RegistrationConfig& cfg);

struct VariantScore {
  double scale = 1.0;
  bool failed = false;
  std::string message;
  RegistrationOutcome outcome;
};

struct ScaleLoopResult {
  RegistrationOutcome outcome;
  ScaleVariant variant;
  bool converged = false;
  std::vector<VariantScore> scores;  // in evaluation order
};

/// Evaluates scales 1.0, 1.1 and 0.9. Unless 1.0 qualifies and beats both
/// neighbors, steps in 10% increments toward the better neighbor until the
/// fitness threshold is met and the fitness stops improving, or the scale
/// bounds or the variant cap is hit. The best variant is returned. Throws
/// no-match when every variant fails to register.
ScaleLoopResult match_with_scale_loop(const TemplateModel& model, const PointCloud& target,
                                      const RegistrationConfig& cfg);

/// Nearest target point to the transformed variant probe point.
Vec3 transfer_probe_point(const RegistrationOutcome& outcome, const ScaleVariant& variant,
                          const PointCloud& target);

struct OrientationEstimate {
  Vec3 normal = Vec3::UnitZ();
  Vec3 eigenvalues = Vec3::Zero();  // ascending
  bool degenerate = false;
};

OrientationEstimate probe_orientation(const PointCloud& target, const Vec3& p_s, std::size_t k,
                                      const Vec3& viewpoint);

struct ProbePose {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 approach_direction = -Vec3::UnitZ();
  RegistrationOutcome outcome;
  bool converged = false;
  bool degenerate_spectrum = false;
};

ProbePose probe_pose(const ScaleLoopResult& match, const PointCloud& target, std::size_t k,
                     const Vec3& viewpoint);

nlohmann::json to_json(const ProbePose& pose, const ScaleLoopResult& match);

/// template.ply + template.json.
void write_template(const std::filesystem::path& dir, const TemplateModel& model);
TemplateModel read_template(const std::filesystem::path& dir);

}  // namespace lidarprobe::registration

#endif  // LIDARPROBE_REGISTRATION_HPP
