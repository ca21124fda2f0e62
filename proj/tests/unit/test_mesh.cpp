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

#include "lidarprobe/errors.hpp"
#include "lidarprobe/mesh.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::mesh {
namespace {

TEST(IntersectTriangle, HitMissAndParallel) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const auto hit = intersect_triangle(Vec3(0.2, 0.2, 1.0), Vec3(0, 0, -1), a, b, c);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(*hit, 1.0, 1e-15);
  EXPECT_FALSE(intersect_triangle(Vec3(0.8, 0.8, 1.0), Vec3(0, 0, -1), a, b, c).has_value());
  EXPECT_FALSE(intersect_triangle(Vec3(0.2, 0.2, 1.0), Vec3(1, 0, 0), a, b, c).has_value());
  EXPECT_FALSE(intersect_triangle(Vec3(0.2, 0.2, 1.0), Vec3(0, 0, 1), a, b, c).has_value());
}

TEST(RayCaster, BvhAgreesWithBruteForce) {
  const simulator::Phantom ph = simulator::generate_phantom(simulator::default_phantom(simulator::PhantomKind::kMale));
  const RayCaster caster(ph.mesh);
  ASSERT_TRUE(caster.uses_bvh());
  CounterRng rng(3, 3);
  int hits = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec3 origin(0.5 + 0.1 * rng.normal(), 0.15 * rng.normal(), 0.5);
    const Vec3 dir = Vec3(0.1 * rng.normal(), 0.1 * rng.normal(), -1.0).normalized();
    const auto a = caster.cast(origin, dir, 5.0);
    const auto b = caster.cast_brute_force(origin, dir, 5.0);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      ++hits;
      EXPECT_EQ(a->distance, b->distance);
      EXPECT_EQ(a->face, b->face);
      EXPECT_EQ(a->label, b->label);
    }
  }
  EXPECT_GT(hits, 300);
}

TEST(Primitives, IcosphereVerticesOnSphere) {
  const TriangleMesh s = icosphere(Vec3(1, 2, 3), 0.5, 3, SurfaceLabel::kChest);
  s.validate();
  EXPECT_EQ(s.face_count(), 20u * 64u);
  for (const Vec3& v : s.vertices) EXPECT_NEAR((v - Vec3(1, 2, 3)).norm(), 0.5, 1e-12);
}

TEST(Primitives, BoxBounds) {
  const TriangleMesh b = box(Vec3(0, 0, 0), Vec3(1, 2, 3), SurfaceLabel::kBed);
  const auto [lo, hi] = b.bounds();
  EXPECT_EQ(lo, Vec3(0, 0, 0));
  EXPECT_EQ(hi, Vec3(1, 2, 3));
}

TEST(Validate, RejectsBadIndices) {
  TriangleMesh m;
  m.vertices = {Vec3::Zero(), Vec3::UnitX()};
  m.faces = {{0, 1, 2}};
  m.labels = {SurfaceLabel::kChest};
  EXPECT_THROW(m.validate(), Error);
  m.vertices.push_back(Vec3::UnitY());
  m.labels.clear();
  EXPECT_THROW(m.validate(), Error);
}

TEST(SampleSurface, DensityAndLabels) {
  TriangleMesh m = rectangle(0.2, 0.1, SurfaceLabel::kBed);
  m.append(icosphere(Vec3(0, 0, 0.5), 0.05, 2, SurfaceLabel::kMarker));
  const LabeledSamples all = sample_surface(m, 0.005);
  ASSERT_EQ(all.points.size(), all.labels.size());
  std::vector<Vec3> bed;
  for (std::size_t i = 0; i < all.points.size(); ++i) {
    if (all.labels[i] == SurfaceLabel::kBed) bed.push_back(all.points[i]);
  }
  for (const Vec3& p : bed) {
    EXPECT_EQ(p.z(), 0.0);
    EXPECT_LE(std::abs(p.x()), 0.1 + 1e-12);
  }
  for (double x = -0.099; x < 0.1; x += 0.011) {
    for (double y = -0.049; y < 0.05; y += 0.007) {
      double best = 1.0;
      for (const Vec3& p : bed) best = std::min(best, (p - Vec3(x, y, 0)).norm());
      EXPECT_LT(best, 0.005);
    }
  }
  const LabeledSamples only = sample_surface(m, 0.005, SurfaceLabel::kMarker);
  for (SurfaceLabel l : only.labels) EXPECT_EQ(l, SurfaceLabel::kMarker);
  for (const Vec3& p : only.points) EXPECT_NEAR((p - Vec3(0, 0, 0.5)).norm(), 0.05, 0.005);
}

}  // namespace
}  // namespace lidarprobe::mesh
