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

#include "lidarprobe/config.hpp"
#include "lidarprobe/errors.hpp"
#include "lidarprobe/io.hpp"
#include "lidarprobe/parallel.hpp"

namespace lidarprobe {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lidarprobe_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PointCloud sample_cloud(bool normals) {
  CounterRng rng(3, 4);
  std::vector<Vec3> pts;
  std::vector<Vec3> nrm;
  for (int i = 0; i < 50; ++i) {
    pts.emplace_back(rng.normal(), rng.normal(), rng.normal() * 1e-3);
    nrm.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
  }
  return normals ? PointCloud(pts, nrm, FrameId::base()) : PointCloud(pts, FrameId::base());
}

void expect_same(const PointCloud& a, const PointCloud& b) {
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.has_normals(), b.has_normals());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.points()[i], b.points()[i]);
    if (a.has_normals()) EXPECT_EQ(a.normals()[i], b.normals()[i]);
  }
}

TEST(Ply, AsciiAndBinaryRoundTripExactly) {
  const fs::path dir = temp_dir("ply");
  for (bool normals : {false, true}) {
    const PointCloud c = sample_cloud(normals);
    io::write_ply(dir / "a.ply", c, io::PlyFormat::kAscii);
    io::write_ply(dir / "b.ply", c, io::PlyFormat::kBinaryLittleEndian);
    expect_same(c, io::read_ply(dir / "a.ply").cloud);
    expect_same(c, io::read_ply(dir / "b.ply").cloud);
  }
}

TEST(Ply, LabelsRoundTrip) {
  const fs::path dir = temp_dir("labels");
  const PointCloud c = sample_cloud(false);
  std::vector<int> labels(c.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  io::write_ply(dir / "l.ply", c, io::PlyFormat::kBinaryLittleEndian, &labels);
  const io::PlyData d = io::read_ply(dir / "l.ply");
  ASSERT_TRUE(d.labels.has_value());
  EXPECT_EQ(*d.labels, labels);
}

TEST(Ply, MalformedInputsThrow) {
  const fs::path dir = temp_dir("bad");
  io::write_text(dir / "bad.ply", "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nend_header\n1\n");
  EXPECT_THROW(io::read_ply(dir / "bad.ply"), Error);
  EXPECT_THROW(io::read_ply(dir / "missing.ply"), Error);
}

TEST(CloudCsv, RoundTrip) {
  const fs::path dir = temp_dir("csv");
  const PointCloud c = sample_cloud(true);
  io::write_cloud_csv(dir / "c.csv", c);
  expect_same(c, io::read_cloud_csv(dir / "c.csv"));
  expect_same(c, io::read_cloud(dir / "c.csv"));
  io::write_text(dir / "h.csv", "x,y,q\n1,2,3\n");
  EXPECT_THROW(io::read_cloud_csv(dir / "h.csv"), Error);
}

TEST(ScanLog, RoundTrip) {
  const fs::path dir = temp_dir("scan");
  std::vector<PolarScan> scans(2);
  for (int s = 0; s < 2; ++s) {
    scans[s].scan_timestamp = 0.1 * s;
    for (int i = 0; i < 10; ++i) {
      scans[s].samples.push_back(PolarSample::make(1.0 + 0.01 * i, 0.1 * i, 0.1 * s + 0.001 * i, i % 4 != 0));
    }
  }
  io::write_scan_log(dir / "scans.csv", scans);
  const auto back = io::read_scan_log(dir / "scans.csv");
  ASSERT_EQ(back.size(), 2u);
  for (int s = 0; s < 2; ++s) {
    ASSERT_EQ(back[s].samples.size(), 10u);
    for (int i = 0; i < 10; ++i) {
      EXPECT_EQ(back[s].samples[i].valid, scans[s].samples[i].valid);
      EXPECT_EQ(back[s].samples[i].range, scans[s].samples[i].range);
      EXPECT_EQ(back[s].samples[i].angle, scans[s].samples[i].angle);
    }
  }
}

TEST(PoseLog, RoundTrip) {
  const fs::path dir = temp_dir("pose");
  std::vector<io::StampedPose> poses;
  for (int i = 0; i < 5; ++i) {
    poses.push_back({0.5 * i, RigidTransform::from_rotation_vector(Vec3(0.1 * i, 0.2, -0.3), Vec3(i, 2, 3),
                                                                   FrameId::tcp(), FrameId::base())});
  }
  io::write_pose_log(dir / "poses.csv", poses);
  const auto back = io::read_pose_log(dir / "poses.csv");
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(back[i].timestamp, poses[i].timestamp);
    EXPECT_NEAR((back[i].pose.rotation() - poses[i].pose.rotation()).norm(), 0.0, 1e-15);
    EXPECT_EQ(back[i].pose.translation(), poses[i].pose.translation());
  }
}

TEST(TransformJson, RoundTripAndFrames) {
  const RigidTransform t = RigidTransform::from_rotation_vector(Vec3(0.3, 0.2, 0.1), Vec3(0.01, 0.02, 0.03),
                                                                FrameId::lidar(), FrameId::tcp());
  const RigidTransform u = io::transform_from_json(io::to_json(t));
  EXPECT_EQ(u.from_frame(), FrameId::lidar());
  EXPECT_EQ(u.to_frame(), FrameId::tcp());
  EXPECT_NEAR((u.matrix() - t.matrix()).norm(), 0.0, 1e-15);
}

TEST(PipelineConfig, RejectsUnknownKeysAndRoundTrips) {
  PipelineConfig cfg;
  cfg.seed = 42;
  cfg.preprocess.voxel_size = 0.004;
  PipelineConfig back;
  update_from_json(to_json(cfg), back);
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  nlohmann::json j = to_json(cfg);
  j["preprocess"]["voxel"] = 1.0;
  PipelineConfig bad;
  EXPECT_THROW(update_from_json(j, bad), Error);
  nlohmann::json k = {{"preprocess", {{"voxel_size", -1.0}}}};
  PipelineConfig neg;
  EXPECT_THROW(
      {
        update_from_json(k, neg);
        neg.validate();
      },
      Error);
}

TEST(PipelineConfig, HashChangesWithAnyField) {
  PipelineConfig a;
  PipelineConfig b;
  b.registration.fitness_threshold = 0.91;
  EXPECT_NE(config_hash(a), config_hash(b));
}

}  // namespace
}  // namespace lidarprobe
