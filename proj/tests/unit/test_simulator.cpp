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
#include <filesystem>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::simulator {
namespace {

TEST(ChestShape, NormalIsUnitAndMatchesImplicitGradient) {
  for (PhantomKind kind : {PhantomKind::kMale, PhantomKind::kFemale}) {
    const ChestShape chest(default_chest(kind));
    for (double fx : {-0.5, 0.0, 0.3, 0.6}) {
      for (double fy : {-0.5, 0.1, 0.5}) {
        const Vec3 p = chest.surface_at_footprint(Vec2(fx, fy));
        EXPECT_NEAR(chest.implicit(p), 0.0, 1e-9);
        const Vec3 n = chest.normal(p);
        EXPECT_NEAR(n.norm(), 1.0, 1e-12);
        EXPECT_GT(chest.implicit(p + 1e-4 * n), 0.0);
        EXPECT_LT(chest.implicit(p - 1e-4 * n), 0.0);
      }
    }
  }
}

TEST(Phantom, MarkerSitsOnNormalAbovePmi) {
  PhantomParams p = default_phantom(PhantomKind::kFemale);
  p.with_marker = true;
  const Phantom ph = generate_phantom(p);
  ASSERT_TRUE(ph.pmi && ph.marker_center && ph.marker_apex && ph.chest);
  const Vec3 n = ph.chest->normal(*ph.pmi);
  EXPECT_NEAR((*ph.marker_center - (*ph.pmi + p.marker_radius * n)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((*ph.marker_apex - (*ph.pmi + 2.0 * p.marker_radius * n)).norm(), 0.0, 1e-12);
  ph.mesh.validate();
}

TEST(Phantom, MaleAndFemaleDiffer) {
  const Phantom m = generate_phantom(default_phantom(PhantomKind::kMale));
  const Phantom f = generate_phantom(default_phantom(PhantomKind::kFemale));
  EXPECT_NE((*m.pmi - *f.pmi).norm(), 0.0);
}

TEST(CalibrationSession, NoiseFreePointsLieOnTruePlane) {
  const CalibrationSession s = run_calibration_session(default_phantom(PhantomKind::kPlate), SensorModel{},
                                                       default_true_extrinsics(), CalibrationSessionConfig{}, 4);
  ASSERT_EQ(s.poses.size(), 20u);
  std::size_t checked = 0;
  for (const auto& pose : s.poses) {
    const RigidTransform chain = compose(pose.tcp_pose, s.true_extrinsics);
    for (const PolarScan& scan : pose.scans) {
      for (const PolarSample& smp : scan.samples) {
        if (!smp.valid) continue;
        if (smp.angle < s.sector.lo || smp.angle > s.sector.hi) continue;
        EXPECT_NEAR(s.true_plane.signed_distance(chain.apply(polar_to_cartesian(smp))), 0.0, 1e-9);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(CalibrationSession, SameSeedIsIdentical) {
  SensorModel sensor;
  sensor.range_noise_sigma = 0.0015;
  const auto a = run_calibration_session(default_phantom(PhantomKind::kPlate), sensor, default_true_extrinsics(),
                                         CalibrationSessionConfig{}, 9);
  const auto b = run_calibration_session(default_phantom(PhantomKind::kPlate), sensor, default_true_extrinsics(),
                                         CalibrationSessionConfig{}, 9);
  const auto c = run_calibration_session(default_phantom(PhantomKind::kPlate), sensor, default_true_extrinsics(),
                                         CalibrationSessionConfig{}, 10);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.poses.size(); ++i) {
    for (std::size_t s = 0; s < a.poses[i].scans.size(); ++s) {
      const auto& sa = a.poses[i].scans[s].samples;
      const auto& sb = b.poses[i].scans[s].samples;
      const auto& sc = c.poses[i].scans[s].samples;
      ASSERT_EQ(sa.size(), sb.size());
      for (std::size_t k = 0; k < sa.size(); ++k) {
        EXPECT_EQ(sa[k].range, sb[k].range);
        if (k < sc.size() && sa[k].range != sc[k].range) any_diff = true;
      }
    }
  }
  EXPECT_TRUE(any_diff);
}

TEST(CalibrationSession, RequiresPlate) {
  EXPECT_THROW(run_calibration_session(default_phantom(PhantomKind::kMale), SensorModel{},
                                       default_true_extrinsics(), CalibrationSessionConfig{}, 1),
               Error);
}

TEST(Scenario, JsonRoundTripAndStrictKeys) {
  SimScenario sc;
  sc.seed = 5;
  sc.sweep.clearance = 0.25;
  sc.phantom.with_marker = true;
  const SimScenario back = scenario_from_json(to_json(sc));
  nlohmann::json jb = to_json(back);
  nlohmann::json js = to_json(sc);
  EXPECT_TRUE(back.true_extrinsics.matrix().isApprox(sc.true_extrinsics.matrix(), 1e-14));
  jb.erase("true_extrinsics");
  js.erase("true_extrinsics");
  EXPECT_EQ(jb.dump(), js.dump());
  nlohmann::json j = to_json(sc);
  j["sweep"]["clearence_m"] = 0.3;
  EXPECT_THROW(scenario_from_json(j), Error);
  EXPECT_THROW(scenario_from_json({{"kind", "volcano"}}), Error);
}

TEST(SweepSession, WritesDatasetWithTruth) {
  PhantomParams p = default_phantom(PhantomKind::kMale);
  p.with_marker = true;
  const Phantom ph = generate_phantom(p);
  const mesh::RayCaster caster(ph.mesh);
  const SweepSession s = run_sweep_session(ph, caster, SensorModel{}, default_true_extrinsics(),
                                           SweepSessionConfig{}, 1);
  EXPECT_EQ(s.recordings.size(), 2u);
  const auto dir = std::filesystem::temp_directory_path() / "lidarprobe_test_sweep";
  std::filesystem::remove_all(dir);
  write_sweep_session(dir, s, ph, SensorModel{});
  const nlohmann::json truth = io::read_json(dir / "truth.json");
  EXPECT_TRUE(truth.contains("extrinsics"));
  EXPECT_TRUE(truth.contains("pmi_m"));
  EXPECT_TRUE(truth.contains("marker_apex_m"));
  EXPECT_TRUE(std::filesystem::exists(dir / "gt_cloud.ply"));
}

TEST(SensorModel, Validation) {
  SensorModel s;
  s.angular_step = 0.0;
  EXPECT_THROW(s.validate(), Error);
  SensorModel t;
  t.dropout_probability = 1.5;
  EXPECT_THROW(t.validate(), Error);
}

}  // namespace
}  // namespace lidarprobe::simulator
