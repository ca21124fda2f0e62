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

#include "lidarprobe/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/json_reader.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/preprocess.hpp"

namespace lidarprobe::registration {

namespace {

constexpr std::size_t kMinCorrespondences = 10;
constexpr std::uint64_t kTupleStream = 0x7475706cULL;

RigidTransform make_transform(const Mat3& r, const Vec3& t) {
  return RigidTransform(r, t, FrameId::template_frame(), FrameId::base());
}

// Weighted least-squares rigid fit of src onto dst (Kabsch with weights).
RigidTransform weighted_kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                               const std::vector<double>& w) {
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    wsum += w[i];
    cs += w[i] * src[i];
    cd += w[i] * dst[i];
  }
  if (!(wsum > 0.0)) fail(ErrorKind::kRegistrationFailure, "all correspondence weights vanished");
  cs /= wsum;
  cd /= wsum;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += w[i] * (src[i] - cs) * (dst[i] - cd).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return make_transform(r, cd - r * cs);
}

double round_scale(double s) { return std::round(s * 1e6) / 1e6; }

}  // namespace

void RegistrationConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::kInvalidInput, std::string("registration config: ") + name + " must be positive");
    }
  };
  positive(fitness_distance, "fitness_distance");
  positive(feature_voxel, "feature_voxel");
  positive(fpfh_radius, "fpfh_radius");
  positive(tuple_max_count, "tuple_max_count");
  positive(fgr_iterations, "fgr_iterations");
  positive(fgr_max_correspondence_distance, "fgr_max_correspondence_distance");
  positive(icp_max_iterations, "icp_max_iterations");
  positive(icp_delta, "icp_delta");
  positive(scale_step, "scale_step");
  positive(scale_min, "scale_min");
  positive(max_variants, "max_variants");
  positive(static_cast<double>(probe_k), "probe_k");
  if (!(fitness_threshold > 0.0 && fitness_threshold <= 1.0)) {
    fail(ErrorKind::kInvalidInput, "registration config: fitness_threshold must be in (0, 1]");
  }
  if (!(tuple_scale > 0.0 && tuple_scale < 1.0)) {
    fail(ErrorKind::kInvalidInput, "registration config: tuple_scale must be in (0, 1)");
  }
  if (!(fgr_division_factor > 1.0)) {
    fail(ErrorKind::kInvalidInput, "registration config: fgr_division_factor must exceed 1");
  }
  if (!(scale_max >= 1.0 && scale_min <= 1.0)) {
    fail(ErrorKind::kInvalidInput, "registration config: scale bounds must bracket 1.0");
  }
}

void update_from_json(const nlohmann::json& j, RegistrationConfig& cfg) {
  JsonObjectReader r(j, "registration");
  r.get("fitness_distance", cfg.fitness_distance);
  r.get("fitness_threshold", cfg.fitness_threshold);
  r.get("feature_voxel", cfg.feature_voxel);
  r.get("fpfh_radius", cfg.fpfh_radius);
  r.get("tuple_scale", cfg.tuple_scale);
  r.get("tuple_max_count", cfg.tuple_max_count);
  r.get("fgr_iterations", cfg.fgr_iterations);
  r.get("fgr_division_factor", cfg.fgr_division_factor);
  r.get("fgr_max_correspondence_distance", cfg.fgr_max_correspondence_distance);
  r.get("icp_max_iterations", cfg.icp_max_iterations);
  r.get("icp_delta", cfg.icp_delta);
  r.get("scale_step", cfg.scale_step);
  r.get("scale_min", cfg.scale_min);
  r.get("scale_max", cfg.scale_max);
  r.get("max_variants", cfg.max_variants);
  r.get("probe_k", cfg.probe_k);
  r.get("seed", cfg.seed);
  r.finish();
  cfg.validate();
}

nlohmann::json to_json(const RegistrationConfig& cfg) {
  return {{"fitness_distance", cfg.fitness_distance},
          {"fitness_threshold", cfg.fitness_threshold},
          {"feature_voxel", cfg.feature_voxel},
          {"fpfh_radius", cfg.fpfh_radius},
          {"tuple_scale", cfg.tuple_scale},
          {"tuple_max_count", cfg.tuple_max_count},
          {"fgr_iterations", cfg.fgr_iterations},
          {"fgr_division_factor", cfg.fgr_division_factor},
          {"fgr_max_correspondence_distance", cfg.fgr_max_correspondence_distance},
          {"icp_max_iterations", cfg.icp_max_iterations},
          {"icp_delta", cfg.icp_delta},
          {"scale_step", cfg.scale_step},
          {"scale_min", cfg.scale_min},
          {"scale_max", cfg.scale_max},
          {"max_variants", cfg.max_variants},
          {"probe_k", cfg.probe_k},
          {"seed", cfg.seed}};
}

std::string to_string(SexVariant v) { return v == SexVariant::kMale ? "male" : "female"; }

SexVariant sex_variant_from_string(const std::string& name) {
  if (name == "male") return SexVariant::kMale;
  if (name == "female") return SexVariant::kFemale;
  fail(ErrorKind::kInvalidInput, "unknown sex_variant '" + name + "' (expected male or female)");
}

void TemplateModel::validate() const {
  if (cloud.empty()) fail(ErrorKind::kInvalidInput, "template '" + name + "' has no points");
  if (!cloud.has_normals()) fail(ErrorKind::kMissingNormals, "template '" + name + "' has no normals");
  if (!(voxel_size > 0.0)) fail(ErrorKind::kInvalidInput, "template voxel size must be positive");
  const double d = std::sqrt(NeighborIndex(cloud).nearest(probe_point).squared_distance);
  if (d > 2.0 * voxel_size) {
    fail(ErrorKind::kInvalidInput, "template '" + name + "': probe point lies " + io::format_double(d) +
                                       " m from the nearest template point");
  }
}

ScaleVariant scale_template(const TemplateModel& model, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    fail(ErrorKind::kInvalidInput, "scale factor must be positive");
  }
  const Vec3 c = model.cloud.centroid();
  std::vector<Vec3> pts;
  pts.reserve(model.cloud.size());
  for (const Vec3& p : model.cloud.points()) pts.push_back(c + factor * (p - c));
  ScaleVariant v;
  v.scale = factor;
  v.cloud = model.cloud.has_normals() ? PointCloud(std::move(pts), model.cloud.normals(), model.cloud.frame())
                                      : PointCloud(std::move(pts), model.cloud.frame());
  v.probe_point = c + factor * (model.probe_point - c);
  return v;
}

FitnessResult evaluate_fitness(const PointCloud& source, const NeighborIndex& target_index,
                               const RigidTransform& transform, double distance) {
  FitnessResult out;
  if (source.empty()) return out;
  const double limit = distance * distance;
  std::vector<double> d2(source.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(source.size()); ++i) {
    d2[i] = target_index.nearest(transform.apply(source.points()[i])).squared_distance;
  }
  double sum = 0.0;
  for (double v : d2) {
    if (v <= limit) {
      ++out.inliers;
      sum += v;
    }
  }
  out.fitness = static_cast<double>(out.inliers) / static_cast<double>(source.size());
  out.inlier_rmse = out.inliers > 0 ? std::sqrt(sum / static_cast<double>(out.inliers)) : 0.0;
  return out;
}

FeatureCloud make_feature_cloud(const PointCloud& cloud, double voxel, double radius) {
  if (!cloud.has_normals()) fail(ErrorKind::kMissingNormals, "feature cloud requires normals");
  const PointCloud reduced = preprocess::voxel_downsample(cloud, voxel);
  const NeighborIndex index(cloud);
  std::vector<Vec3> normals(reduced.size());
  for (std::size_t i = 0; i < reduced.size(); ++i) {
    normals[i] = cloud.normals()[index.nearest(reduced.points()[i]).index];
  }
  FeatureCloud out;
  out.cloud = PointCloud(reduced.points(), std::move(normals), cloud.frame());
  out.features = features::compute_fpfh(out.cloud, radius);
  return out;
}

PreparedTarget::PreparedTarget(PointCloud target, const RegistrationConfig& cfg, bool with_features)
    : cloud_(std::move(target)), index_(cloud_) {
  if (cloud_.empty()) fail(ErrorKind::kInvalidInput, "registration target is empty");
  if (!cloud_.has_normals()) fail(ErrorKind::kMissingNormals, "registration target requires normals");
  if (with_features) features_ = make_feature_cloud(cloud_, cfg.feature_voxel, cfg.fpfh_radius);
}

std::vector<Correspondence> mutual_feature_matches(const FeatureCloud& source, const FeatureCloud& target) {
  using Tree = KdTree<features::kFeatureDim>;
  const Tree src_tree{std::span<const features::Histogram33>(source.features)};
  const Tree tgt_tree{std::span<const features::Histogram33>(target.features)};
  if (src_tree.empty() || tgt_tree.empty()) return {};
  std::vector<std::size_t> forward(source.features.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(forward.size()); ++i) {
    forward[i] = tgt_tree.nearest(source.features[i]).index;
  }
  std::vector<char> keep(forward.size(), 0);
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(forward.size()); ++i) {
    keep[i] = src_tree.nearest(target.features[forward[i]]).index == static_cast<std::size_t>(i) ? 1 : 0;
  }
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < forward.size(); ++i) {
    if (keep[i]) out.push_back({i, forward[i]});
  }
  return out;
}

std::vector<Correspondence> tuple_filter(const std::vector<Correspondence>& matches,
                                         const PointCloud& source, const PointCloud& target,
                                         const RegistrationConfig& cfg) {
  std::vector<Correspondence> out;
  if (matches.size() < 3) return out;
  CounterRng rng(cfg.seed, kTupleStream);
  const std::size_t trials = matches.size() * 100;
  const double s = cfg.tuple_scale;
  const auto& sp = source.points();
  const auto& tp = target.points();
  std::set<std::size_t> accepted;
  int tuples = 0;
  for (std::size_t trial = 0; trial < trials && tuples < cfg.tuple_max_count; ++trial) {
    const std::size_t idx[3] = {rng.below(matches.size()), rng.below(matches.size()),
                                rng.below(matches.size())};
    if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2]) continue;
    bool ok = true;
    for (int e = 0; e < 3 && ok; ++e) {
      const Correspondence& a = matches[idx[e]];
      const Correspondence& b = matches[idx[(e + 1) % 3]];
      const double li = (sp[a.source] - sp[b.source]).norm();
      const double lj = (tp[a.target] - tp[b.target]).norm();
      ok = li * s < lj && lj < li / s;
    }
    if (!ok) continue;
    ++tuples;
    accepted.insert(idx, idx + 3);
  }
  for (std::size_t i : accepted) out.push_back(matches[i]);
  return out;
}

RigidTransform fast_global_registration(const FeatureCloud& source, const FeatureCloud& target,
                                        const RegistrationConfig& cfg) {
  if (source.cloud.size() < 100 || target.cloud.size() < 100) {
    fail(ErrorKind::kRegistrationFailure, "global registration needs at least 100 points per cloud");
  }
  const std::vector<Correspondence> corr =
      tuple_filter(mutual_feature_matches(source, target), source.cloud, target.cloud, cfg);
  if (corr.size() < kMinCorrespondences) {
    fail(ErrorKind::kRegistrationFailure,
         "only " + std::to_string(corr.size()) + " feature correspondences survived the tuple test");
  }
  std::vector<Vec3> src(corr.size());
  std::vector<Vec3> dst(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    src[i] = source.cloud.points()[corr[i].source];
    dst[i] = target.cloud.points()[corr[i].target];
  }
  const Vec3 c = target.cloud.centroid();
  double extent2 = 0.0;
  for (const Vec3& p : target.cloud.points()) extent2 = std::max(extent2, (p - c).squaredNorm());
  const double mu_min = cfg.fgr_max_correspondence_distance * cfg.fgr_max_correspondence_distance;
  double mu = std::max(extent2, mu_min);
  RigidTransform t = make_transform(Mat3::Identity(), Vec3::Zero());
  std::vector<double> w(corr.size());
  for (int it = 0; it < cfg.fgr_iterations; ++it) {
    if (it % 4 == 0 && mu > mu_min) mu = std::max(mu / cfg.fgr_division_factor, mu_min);
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const double r2 = (t.apply(src[i]) - dst[i]).squaredNorm();
      const double g = mu / (mu + r2);
      w[i] = g * g;
    }
    t = weighted_kabsch(src, dst, w);
  }
  return t;
}

RegistrationOutcome icp_refine(const PointCloud& source, const PreparedTarget& target,
                               const RigidTransform& init, const RegistrationConfig& cfg) {
  if (source.empty()) fail(ErrorKind::kRegistrationFailure, "ICP source is empty");
  const auto& tp = target.cloud().points();
  const auto& tn = target.cloud().normals();
  const double limit = cfg.fitness_distance * cfg.fitness_distance;
  Mat3 r = init.rotation();
  Vec3 t = init.translation();
  std::vector<std::ptrdiff_t> match(source.size());
  int iterations = 0;
  for (int it = 0; it < cfg.icp_max_iterations; ++it) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(source.size()); ++i) {
      const Neighbor n = target.index().nearest(r * source.points()[i] + t);
      match[i] = n.squared_distance <= limit ? static_cast<std::ptrdiff_t>(n.index) : -1;
    }
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      const Vec3 p = r * source.points()[i] + t;
      const Vec3& q = tp[static_cast<std::size_t>(match[i])];
      const Vec3& n = tn[static_cast<std::size_t>(match[i])];
      Eigen::Matrix<double, 6, 1> j;
      j << p.cross(n), n;
      a += j * j.transpose();
      b -= j * (p - q).dot(n);
      ++pairs;
    }
    if (pairs == 0) {
      if (it == 0) {
        fail(ErrorKind::kRegistrationFailure, "no ICP correspondences within the fitness distance at init");
      }
      break;
    }
    const double damping = 1e-12 * std::max(a.trace(), 1e-300);
    a.diagonal().array() += damping;
    const Eigen::Matrix<double, 6, 1> x = a.ldlt().solve(b);
    if (!x.allFinite()) break;
    const Mat3 dr = so3_exp(x.head<3>());
    r = dr * r;
    t = dr * t + x.tail<3>();
    iterations = it + 1;
    if (x.norm() < cfg.icp_delta) break;
  }
  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = svd.matrixU() * svd.matrixV().transpose();
  RegistrationOutcome out;
  out.transform = RigidTransform(r, t, source.frame(), target.cloud().frame());
  const FitnessResult f = evaluate_fitness(source, target.index(), out.transform, cfg.fitness_distance);
  out.fitness = f.fitness;
  out.inlier_rmse = f.inlier_rmse;
  out.iterations_used = iterations;
  return out;
}

RegistrationOutcome register_variant(const ScaleVariant& variant, const PreparedTarget& target,
                                     const RegistrationConfig& cfg) {
  const FeatureCloud source = make_feature_cloud(variant.cloud, cfg.feature_voxel, cfg.fpfh_radius);
  const RigidTransform coarse = fast_global_registration(source, target.features(), cfg);
  RegistrationOutcome out = icp_refine(variant.cloud, target, coarse, cfg);
  out.scale_used = variant.scale;
  return out;
}

namespace {

// Higher fitness wins; equal fitness goes to the scale nearest 1.0, then the smaller scale.
bool better(const VariantScore& a, const VariantScore& b) {
  if (a.failed != b.failed) return !a.failed;
  if (a.outcome.fitness != b.outcome.fitness) return a.outcome.fitness > b.outcome.fitness;
  const double da = std::abs(a.scale - 1.0);
  const double db = std::abs(b.scale - 1.0);
  if (da != db) return da < db;
  return a.scale < b.scale;
}

}  // namespace

ScaleLoopResult match_with_scale_loop(const TemplateModel& model, const PointCloud& target,
                                      const RegistrationConfig& cfg) {
  cfg.validate();
  const PreparedTarget prepared(target, cfg);
  ScaleLoopResult result;
  const auto evaluate = [&](double scale) {
    VariantScore score;
    score.scale = scale;
    try {
      score.outcome = register_variant(scale_template(model, scale), prepared, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kRegistrationFailure) throw;
      score.failed = true;
      score.message = e.what();
      score.outcome.scale_used = scale;
    }
    result.scores.push_back(score);
    return !score.failed && score.outcome.fitness >= cfg.fitness_threshold;
  };

  bool qualified = false;
  for (double s : {1.0, round_scale(1.0 + cfg.scale_step), round_scale(1.0 - cfg.scale_step)}) {
    if (static_cast<int>(result.scores.size()) >= cfg.max_variants) break;
    if (s < cfg.scale_min - 1e-12 || s > cfg.scale_max + 1e-12) continue;
    qualified = evaluate(s) || qualified;
  }
  if (result.scores.size() >= 3) {
    const VariantScore& up = result.scores[1];
    const VariantScore& down = result.scores[2];
    const bool center_done = qualified && !better(up, result.scores[0]) && !better(down, result.scores[0]);
    if (!center_done) {
      const bool go_up = better(up, down);
      const double dir = go_up ? 1.0 : -1.0;
      VariantScore last = go_up ? up : down;
      for (int m = 2; static_cast<int>(result.scores.size()) < cfg.max_variants; ++m) {
        const double s = round_scale(1.0 + dir * m * cfg.scale_step);
        if (s < cfg.scale_min - 1e-12 || s > cfg.scale_max + 1e-12) break;
        qualified = evaluate(s) || qualified;
        const VariantScore& current = result.scores.back();
        const bool improved = !current.failed && (last.failed || current.outcome.fitness > last.outcome.fitness);
        if (qualified && !improved) break;
        last = current;
      }
    }
  }

  const VariantScore* best = nullptr;
  for (const VariantScore& s : result.scores) {
    if (best == nullptr || better(s, *best)) best = &s;
  }
  if (best == nullptr || best->failed) {
    std::string msg = "template '" + model.name + "' failed to register at every scale";
    if (best != nullptr) msg += ": " + best->message;
    fail(ErrorKind::kNoMatch, msg);
  }
  result.outcome = best->outcome;
  result.variant = scale_template(model, best->scale);
  result.converged = best->outcome.fitness >= cfg.fitness_threshold;
  return result;
}

Vec3 transfer_probe_point(const RegistrationOutcome& outcome, const ScaleVariant& variant,
                          const PointCloud& target) {
  if (target.empty()) fail(ErrorKind::kInvalidInput, "probe transfer needs a non-empty target");
  const Vec3 mapped = outcome.transform.apply(variant.probe_point);
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d2 = (target.points()[i] - mapped).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return target.points()[best];
}

OrientationEstimate probe_orientation(const PointCloud& target, const Vec3& p_s, std::size_t k,
                                      const Vec3& viewpoint) {
  if (k < 3) fail(ErrorKind::kInvalidInput, "probe orientation needs k >= 3");
  if (target.size() < k) {
    fail(ErrorKind::kTooFewPoints, "probe orientation needs at least " + std::to_string(k) +
                                       " points, got " + std::to_string(target.size()));
  }
  const std::vector<Neighbor> nb = NeighborIndex(target).query(p_s, k);
  Vec3 mean = Vec3::Zero();
  for (const Neighbor& n : nb) mean += target.points()[n.index];
  mean /= static_cast<double>(nb.size());
  Mat3 cov = Mat3::Zero();
  for (const Neighbor& n : nb) {
    const Vec3 d = target.points()[n.index] - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(nb.size());
  const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  OrientationEstimate out;
  out.eigenvalues = es.eigenvalues();
  out.normal = es.eigenvectors().col(0).normalized();
  const double side = (viewpoint - p_s).dot(out.normal);
  if (side < 0.0) out.normal = -out.normal;
  const double l0 = out.eigenvalues[0];
  const double l1 = out.eigenvalues[1];
  out.degenerate = side == 0.0 || !(l1 > 0.0) || (l1 - l0) <= 0.01 * l1;
  return out;
}

ProbePose probe_pose(const ScaleLoopResult& match, const PointCloud& target, std::size_t k,
                     const Vec3& viewpoint) {
  ProbePose pose;
  pose.position = transfer_probe_point(match.outcome, match.variant, target);
  const OrientationEstimate o = probe_orientation(target, pose.position, k, viewpoint);
  pose.normal = o.normal;
  pose.approach_direction = -o.normal;
  pose.degenerate_spectrum = o.degenerate;
  pose.outcome = match.outcome;
  pose.converged = match.converged;
  return pose;
}

nlohmann::json to_json(const ProbePose& pose, const ScaleLoopResult& match) {
  nlohmann::json variants = nlohmann::json::array();
  for (const VariantScore& s : match.scores) {
    nlohmann::json v = {{"scale", s.scale}, {"failed", s.failed}};
    if (s.failed) {
      v["message"] = s.message;
    } else {
      v["fitness"] = s.outcome.fitness;
      v["inlier_rmse_m"] = s.outcome.inlier_rmse;
      v["iterations"] = s.outcome.iterations_used;
    }
    variants.push_back(v);
  }
  return {{"format", "lidarprobe.probe-pose/1"},
          {"position_m", io::vec3_to_json(pose.position)},
          {"normal", io::vec3_to_json(pose.normal)},
          {"approach_direction", io::vec3_to_json(pose.approach_direction)},
          {"fitness", pose.outcome.fitness},
          {"inlier_rmse_m", pose.outcome.inlier_rmse},
          {"scale", pose.outcome.scale_used},
          {"converged", pose.converged},
          {"degenerate_spectrum", pose.degenerate_spectrum},
          {"transform", io::to_json(pose.outcome.transform)},
          {"variants", variants}};
}

void write_template(const std::filesystem::path& dir, const TemplateModel& model) {
  model.validate();
  std::filesystem::create_directories(dir);
  io::write_ply(dir / "template.ply", model.cloud, io::PlyFormat::kBinaryLittleEndian);
  io::write_json(dir / "template.json", {{"format", "lidarprobe.template/1"},
                                         {"name", model.name},
                                         {"sex_variant", to_string(model.sex_variant)},
                                         {"probe_point_m", io::vec3_to_json(model.probe_point)},
                                         {"voxel_size_m", model.voxel_size},
                                         {"point_count", model.cloud.size()}});
}

TemplateModel read_template(const std::filesystem::path& dir) {
  const nlohmann::json j = io::read_json(dir / "template.json");
  JsonObjectReader r(j, (dir / "template.json").string());
  if (r.require<std::string>("format") != "lidarprobe.template/1") {
    fail(ErrorKind::kInvalidInput, r.context() + ": unsupported format");
  }
  TemplateModel model;
  model.name = r.require<std::string>("name");
  model.sex_variant = sex_variant_from_string(r.require<std::string>("sex_variant"));
  const nlohmann::json* p = r.child("probe_point_m");
  if (p == nullptr) fail(ErrorKind::kInvalidInput, r.context() + ": missing key 'probe_point_m'");
  model.probe_point = io::vec3_from_json(*p, r.context() + ".probe_point_m");
  r.get("voxel_size_m", model.voxel_size);
  std::size_t count = 0;
  const bool has_count = r.get("point_count", count);
  r.finish();
  model.cloud = io::read_ply(dir / "template.ply").cloud;
  model.cloud.set_frame(FrameId::template_frame());
  if (has_count && count != model.cloud.size()) {
    fail(ErrorKind::kInvalidInput, r.context() + ": point_count does not match template.ply");
  }
  model.validate();
  return model;
}

}  // namespace lidarprobe::registration
