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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/geometry.hpp"
#include "lidarprobe/neighbor_index.hpp"
#include "lidarprobe/parallel.hpp"

namespace lidarprobe {
namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 17);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = scale * Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
  return pts;
}

std::vector<Neighbor> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) d += (pts[i][a] - q[a]) * (pts[i][a] - q[a]);
    all.push_back({i, d});
  }
  std::sort(all.begin(), all.end(), closer);
  all.resize(std::min(k, all.size()));
  return all;
}

TEST(So3, ExpLogRoundTrip) {
  CounterRng rng(1, 2);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
    w *= 3.0 * rng.uniform() / std::max(w.norm(), 1e-9);
    const Mat3 r = so3_exp(w);
    EXPECT_NEAR((r.transpose() * r - Mat3::Identity()).norm(), 0.0, 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_NEAR((so3_log(r) - w).norm(), 0.0, 1e-9);
  }
}

TEST(So3, NearPiAndSmallAngles) {
  const Vec3 w(0.0, 0.0, kPi - 1e-7);
  EXPECT_NEAR(rotation_angle(so3_exp(w)), kPi - 1e-7, 1e-9);
  const Vec3 tiny(1e-10, -2e-10, 3e-10);
  EXPECT_NEAR((so3_log(so3_exp(tiny)) - tiny).norm(), 0.0, 1e-18);
}

TEST(RigidTransform, ComposeAndInverse) {
  const RigidTransform a = RigidTransform::from_rotation_vector(Vec3(0.1, -0.2, 0.3), Vec3(1, 2, 3),
                                                                FrameId::lidar(), FrameId::tcp());
  const RigidTransform b = RigidTransform::from_rotation_vector(Vec3(-0.4, 0.1, 0.2), Vec3(-1, 0.5, 0.2),
                                                                FrameId::tcp(), FrameId::base());
  const RigidTransform ab = compose(b, a);
  EXPECT_EQ(ab.from_frame(), FrameId::lidar());
  EXPECT_EQ(ab.to_frame(), FrameId::base());
  const Vec3 p(0.3, -0.7, 1.1);
  EXPECT_NEAR((ab.apply(p) - b.apply(a.apply(p))).norm(), 0.0, 1e-14);
  EXPECT_NEAR((ab.inverse().apply(ab.apply(p)) - p).norm(), 0.0, 1e-14);
  EXPECT_THROW(compose(a, b), Error);
}

TEST(RigidTransform, RejectsNonOrthonormal) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = 1.01;
  EXPECT_THROW(RigidTransform(m, Vec3::Zero(), FrameId::lidar(), FrameId::tcp()), Error);
  EXPECT_THROW(RigidTransform(-Mat3::Identity(), Vec3::Zero(), FrameId::lidar(), FrameId::tcp()), Error);
}

TEST(RigidTransform, QuaternionRoundTrip) {
  const RigidTransform t = RigidTransform::from_rotation_vector(Vec3(0.5, 0.2, -0.1), Vec3(0, 0, 1),
                                                                FrameId::tcp(), FrameId::base());
  const RigidTransform u = RigidTransform::from_quaternion(t.quaternion(), t.translation(), FrameId::tcp(),
                                                           FrameId::base());
  EXPECT_NEAR((t.rotation() - u.rotation()).norm(), 0.0, 1e-14);
}

TEST(PointCloud, TransformChecksFrame) {
  PointCloud c({Vec3(1, 0, 0)}, {Vec3(0, 0, 1)}, FrameId::lidar());
  const RigidTransform t = RigidTransform::from_rotation_vector(Vec3(0, 0, kPi / 2), Vec3(0, 0, 1),
                                                                FrameId::lidar(), FrameId::tcp());
  const PointCloud out = transform_cloud(t, c);
  EXPECT_EQ(out.frame(), FrameId::tcp());
  EXPECT_NEAR((out.points()[0] - Vec3(0, 1, 1)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((out.normals()[0] - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
  EXPECT_THROW(transform_cloud(t.inverse(), c), Error);
}

TEST(PointCloud, RejectsBadNormals) {
  EXPECT_THROW(PointCloud({Vec3(0, 0, 0)}, {Vec3(0, 0, 2)}, FrameId::base()), Error);
  EXPECT_THROW(PointCloud({Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 0, 1)}, FrameId::base()), Error);
}

TEST(Plane, SignedDistanceAndNormalization) {
  const Plane p = Plane::from_unnormalized(Vec3(0, 0, 2), -4);
  EXPECT_DOUBLE_EQ(p.offset(), -2.0);
  EXPECT_DOUBLE_EQ(p.signed_distance(Vec3(5, 5, 3)), 1.0);
  EXPECT_THROW(Plane(Vec3(0, 0, 2), 0.0), Error);
}

TEST(Polar, AngleNormalizationAndConversion) {
  EXPECT_NEAR(normalize_angle(-kPi / 2), 1.5 * kPi, 1e-15);
  EXPECT_NEAR(normalize_angle(5 * kPi), kPi, 1e-12);
  const PolarSample s = PolarSample::make(2.0, kPi, 0.0, true);
  EXPECT_NEAR((polar_to_cartesian(s) - Vec3(-2, 0, 0)).norm(), 0.0, 1e-15);
  const PolarSample bad = PolarSample::make(3.0, 0.1, 0.0, false);
  EXPECT_EQ(bad.range, 0.0);
}

TEST(Polar, SectorFilter) {
  PolarScan scan;
  for (int i = 0; i < 360; ++i) scan.samples.push_back(PolarSample::make(1.0, deg2rad(i), 0.0, true));
  const PolarScan f = sector_filter(scan, deg2rad(135.0), deg2rad(225.0));
  for (const auto& s : f.samples) {
    EXPECT_GE(s.angle, deg2rad(135.0) - 1e-12);
    EXPECT_LE(s.angle, deg2rad(225.0) + 1e-12);
  }
  EXPECT_EQ(f.samples.size(), 91u);
}

class KnnOracle : public ::testing::TestWithParam<std::size_t> {};

TEST_P(KnnOracle, MatchesBruteForceExactly) {
  const std::size_t n = GetParam();
  const std::vector<Vec3> pts = random_points(n, n);
  const NeighborIndex index{std::span<const Vec3>(pts)};
  const std::vector<Vec3> queries = random_points(100, n + 1, 1.2);
  for (const Vec3& q : queries) {
    for (std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{30}}) {
      const auto got = index.query(q, k);
      const auto want = brute_knn(pts, q, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].index, want[i].index);
        EXPECT_EQ(got[i].squared_distance, want[i].squared_distance);
      }
    }
    const Neighbor nn = index.nearest(q);
    EXPECT_EQ(nn.index, brute_knn(pts, q, 1)[0].index);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, KnnOracle, ::testing::Values(1, 13, 200, 2000));

TEST(NeighborIndex, RadiusMatchesBruteForce) {
  const std::vector<Vec3> pts = random_points(1500, 9);
  const NeighborIndex index{std::span<const Vec3>(pts)};
  for (const Vec3& q : random_points(50, 10)) {
    const auto got = index.radius(q, 0.15);
    auto want = brute_knn(pts, q, pts.size());
    want.erase(std::remove_if(want.begin(), want.end(),
                              [](const Neighbor& nb) { return nb.squared_distance > 0.15 * 0.15; }),
               want.end());
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].index, want[i].index);
  }
}

TEST(NeighborIndex, TiesBrokenByIndex) {
  std::vector<Vec3> pts(10, Vec3(1, 1, 1));
  pts.push_back(Vec3(0, 0, 0));
  const NeighborIndex index{std::span<const Vec3>(pts)};
  const auto got = index.query(Vec3(1, 1, 1), 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(got[i].index, i);
}

TEST(CounterRng, DeterministicStreams) {
  CounterRng a(5, 1, 2);
  CounterRng b(5, 1, 2);
  CounterRng c(5, 1, 3);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  CounterRng g(1, 1);
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double v = g.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.03);
  EXPECT_NEAR(sq / 20000, 1.0, 0.04);
}

}  // namespace
}  // namespace lidarprobe
