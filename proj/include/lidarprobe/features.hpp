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

#ifndef LIDARPROBE_FEATURES_HPP
#define LIDARPROBE_FEATURES_HPP

#include <vector>

#include <Eigen/Core>

#include "lidarprobe/geometry.hpp"

namespace lidarprobe::features {

constexpr int kBinsPerFeature = 11;
constexpr int kFeatureDim = 3 * kBinsPerFeature;

using Histogram33 = Eigen::Matrix<double, kFeatureDim, 1>;

/// Darboux-frame angle triplet between two oriented points. `theta` is in
/// [-pi, pi]; `alpha` and `phi` are cosines in [-1, 1].
struct PairFeature {
  double theta = 0.0;
  double alpha = 0.0;
  double phi = 0.0;
  double distance = 0.0;
};

PairFeature pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

/// Bin indices (theta, alpha, phi) for one pair feature, each in [0, 11).
Eigen::Vector3i feature_bins(const PairFeature& f);

/// Simplified point feature histograms: raw counts, so each 11-bin block of
/// point i sums to the number of its neighbors within `radius` (self and
/// coincident points excluded).
std::vector<Histogram33> compute_spfh(const PointCloud& cloud, double radius);

/// FPFH(p) = SPFH(p) + (1/k) sum_j SPFH(q_j) / |p - q_j| over the k radius
/// neighbors, each 11-bin block then scaled to sum to 100.
std::vector<Histogram33> compute_fpfh(const PointCloud& cloud, double radius);

}  // namespace lidarprobe::features

#endif  // LIDARPROBE_FEATURES_HPP
