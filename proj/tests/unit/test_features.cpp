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

#include <gtest/gtest.h>

#include <cmath>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/features.hpp"
#include "lidarprobe/parallel.hpp"

namespace lidarprobe::features {
namespace {

PointCloud wavy_surface(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 3);
  std::vector<Vec3> pts;
  std::vector<Vec3> nrm;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 0.2 * rng.uniform();
    const double y = 0.2 * rng.uniform();
    const double z = 0.02 * std::sin(30.0 * x) * std::cos(20.0 * y);
    const Vec3 grad(0.6 * std::cos(30.0 * x) * std::cos(20.0 * y), -0.4 * std::sin(30.0 * x) * std::sin(20.0 * y),
                    -1.0);
    pts.emplace_back(x, y, z);
    nrm.push_back(-grad.normalized());
  }
  return PointCloud(pts, nrm, FrameId::base());
}

TEST(PairFeature, RangesAndDistance) {
  CounterRng rng(1, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p1(rng.normal(), rng.normal(), rng.normal());
    const Vec3 p2(rng.normal(), rng.normal(), rng.normal());
    const Vec3 n1 = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 n2 = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const PairFeature f = pair_feature(p1, n1, p2, n2);
    EXPECT_NEAR(f.distance, (p2 - p1).norm(), 1e-14);
    EXPECT_LE(std::abs(f.theta), kPi + 1e-12);
    EXPECT_LE(std::abs(f.alpha), 1.0 + 1e-12);
    EXPECT_LE(std::abs(f.phi), 1.0 + 1e-12);
    const Eigen::Vector3i b = feature_bins(f);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(b[a], 0);
      EXPECT_LT(b[a], kBinsPerFeature);
    }
  }
}

TEST(PairFeature, CoplanarParallelNormals) {
  const PairFeature f = pair_feature(Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 0, 1));
  EXPECT_NEAR(f.phi, 0.0, 1e-15);
  EXPECT_NEAR(f.alpha, 0.0, 1e-15);
}

TEST(Spfh, BlockSumsEqualNeighborCounts) {
  const PointCloud c = wavy_surface(800, 2);
  const double r = 0.02;
  const auto spfh = compute_spfh(c, r);
  for (std::size_t i = 0; i < c.size(); i += 13) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double d2 = (c.points()[i] - c.points()[j]).squaredNorm();
      if (j != i && d2 > 0.0 && d2 <= r * r) ++count;
    }
    for (int b = 0; b < 3; ++b) {
      EXPECT_DOUBLE_EQ(spfh[i].segment<kBinsPerFeature>(b * kBinsPerFeature).sum(), static_cast<double>(count));
    }
  }
}

TEST(Fpfh, BlocksNormalizedTo100) {
  const PointCloud c = wavy_surface(800, 3);
  const auto f = compute_fpfh(c, 0.02);
  for (const Histogram33& h : f) {
    for (int b = 0; b < 3; ++b) {
      const double s = h.segment<kBinsPerFeature>(b * kBinsPerFeature).sum();
      if (s > 0.0) EXPECT_NEAR(s, 100.0, 1e-9);
    }
    EXPECT_GE(h.minCoeff(), 0.0);
  }
}

TEST(Fpfh, InvariantUnderRigidMotion) {
  const PointCloud c = wavy_surface(600, 4);
  const RigidTransform t = RigidTransform::from_rotation_vector(Vec3(0.4, -0.9, 1.3), Vec3(0.3, -0.2, 0.5),
                                                                FrameId::base(), FrameId::base());
  const auto a = compute_fpfh(c, 0.025);
  const auto b = compute_fpfh(transform_cloud(t, c), 0.025);
  ASSERT_EQ(a.size(), b.size());
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] - b[i]).cwiseAbs().maxCoeff() > 1e-6) ++mismatched;
  }
  EXPECT_LE(mismatched, a.size() / 100);
}

TEST(Fpfh, DeterministicAcrossThreads) {
  const PointCloud c = wavy_surface(900, 5);
  set_thread_count(1);
  const auto a = compute_fpfh(c, 0.02);
  set_thread_count(3);
  const auto b = compute_fpfh(c, 0.02);
  set_thread_count(0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Fpfh, InputValidation) {
  EXPECT_THROW(compute_fpfh(PointCloud({Vec3::Zero(), Vec3::UnitX()}, FrameId::base()), 0.1), Error);
  EXPECT_THROW(compute_fpfh(wavy_surface(10, 1), 0.0), Error);
}

}  // namespace
}  // namespace lidarprobe::features
