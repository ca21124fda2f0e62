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

#include <filesystem>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/reconstruction.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::reconstruction {
namespace {

SweepTrajectory two_point_trajectory() {
  SweepTrajectory t;
  t.waypoints.push_back({0.0, RigidTransform::from_rotation_vector(Vec3::Zero(), Vec3(0, 0, 0), FrameId::tcp(),
                                                                   FrameId::base())});
  t.waypoints.push_back({1.0, RigidTransform::from_rotation_vector(Vec3(0, 0, 0.4), Vec3(1, 2, 0), FrameId::tcp(),
                                                                   FrameId::base())});
  return t;
}

TEST(InterpolatePose, EndpointsAndMidpoint) {
  const SweepTrajectory t = two_point_trajectory();
  EXPECT_EQ(interpolate_pose(t, 0.0).translation(), Vec3(0, 0, 0));
  EXPECT_NEAR((interpolate_pose(t, 1.0).translation() - Vec3(1, 2, 0)).norm(), 0.0, 1e-15);
  const RigidTransform mid = interpolate_pose(t, 0.5);
  EXPECT_NEAR((mid.translation() - Vec3(0.5, 1.0, 0.0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((so3_log(mid.rotation()) - Vec3(0, 0, 0.2)).norm(), 0.0, 1e-12);
}

TEST(InterpolatePose, OutsideSpanThrows) {
  const SweepTrajectory t = two_point_trajectory();
  try {
    interpolate_pose(t, 1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfRange);
  }
}

TEST(SampleTimestamps, FollowBeamAngle) {
  PolarScan scan;
  scan.scan_timestamp = 2.0;
  scan.samples.push_back(PolarSample::make(1.0, 0.0, 0.0, true));
  scan.samples.push_back(PolarSample::make(1.0, kPi, 0.0, true));
  assign_sample_timestamps(scan, 0.1);
  EXPECT_DOUBLE_EQ(scan.samples[0].timestamp, 2.0);
  EXPECT_DOUBLE_EQ(scan.samples[1].timestamp, 2.05);
}

struct SweepFixture : ::testing::Test {
  void SetUp() override {
    phantom = simulator::generate_phantom(simulator::default_phantom(simulator::PhantomKind::kMale));
    const mesh::RayCaster caster(phantom.mesh);
    session = simulator::run_sweep_session(phantom, caster, simulator::SensorModel{},
                                           simulator::default_true_extrinsics(), simulator::SweepSessionConfig{}, 3);
  }
  simulator::Phantom phantom;
  simulator::SweepSession session;
};

TEST_F(SweepFixture, NoiseFreeSweepLiesOnTheSurface) {
  const PointCloud cloud = accumulate_sweeps(session.recordings, session.true_extrinsics);
  ASSERT_GT(cloud.size(), 1000u);
  EXPECT_EQ(cloud.frame(), FrameId::base());
  mesh::LabeledSamples all = mesh::sample_surface(phantom.mesh, 0.001);
  const metrics::SurfaceErrorReport e =
      metrics::surface_error(cloud, PointCloud(all.points, FrameId::base()), 0.002);
  EXPECT_LT(e.e_95, 0.001);
}

TEST_F(SweepFixture, WrongExtrinsicsDisplaceTheCloud) {
  const PointCloud good = accumulate_sweeps(session.recordings, session.true_extrinsics);
  const RigidTransform shifted(session.true_extrinsics.rotation(),
                               session.true_extrinsics.translation() + Vec3(0.0, 0.0, 0.01), FrameId::lidar(),
                               FrameId::tcp());
  const PointCloud bad = accumulate_sweeps(session.recordings, shifted);
  ASSERT_EQ(good.size(), bad.size());
  double mean_shift = 0.0;
  for (std::size_t i = 0; i < good.size(); ++i) mean_shift += (good.points()[i] - bad.points()[i]).norm();
  EXPECT_NEAR(mean_shift / static_cast<double>(good.size()), 0.01, 1e-9);
}

TEST_F(SweepFixture, DetailedOutputIsAligned) {
  const AccumulatedSweeps acc = accumulate_sweeps_detailed(session.recordings, session.true_extrinsics);
  ASSERT_EQ(acc.sensor_origins.size(), acc.cloud.size());
  ASSERT_EQ(acc.ranges.size(), acc.cloud.size());
  for (std::size_t i = 0; i < acc.cloud.size(); i += 97) {
    EXPECT_NEAR((acc.cloud.points()[i] - acc.sensor_origins[i]).norm(), acc.ranges[i], 1e-9);
  }
  for (std::size_t i = 1; i < acc.timestamps.size(); ++i) EXPECT_LE(acc.timestamps[i - 1], acc.timestamps[i]);
}

TEST_F(SweepFixture, RecordingsRoundTripThroughDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "lidarprobe_test_recordings";
  std::filesystem::remove_all(dir);
  write_recordings(dir, session.recordings);
  const auto back = read_recordings(dir);
  const PointCloud a = accumulate_sweeps(session.recordings, session.true_extrinsics);
  const PointCloud b = accumulate_sweeps(back, session.true_extrinsics);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR((a.points()[i] - b.points()[i]).norm(), 0.0, 1e-12);
}

TEST(Accumulate, RejectsWrongFrames) {
  std::vector<SweepRecording> none;
  EXPECT_THROW(accumulate_sweeps(none, RigidTransform::identity(FrameId::lidar(), FrameId::tcp())), Error);
}

}  // namespace
}  // namespace lidarprobe::reconstruction
