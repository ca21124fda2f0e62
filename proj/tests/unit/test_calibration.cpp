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

#include "lidarprobe/calibration.hpp"
#include "lidarprobe/errors.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/simulator.hpp"

namespace lidarprobe::calibration {
namespace {

struct Session {
  simulator::CalibrationSession session;
  std::vector<PoseObservation> obs;
  CalibrationParams init;
};

Session make_session(double noise, std::uint64_t seed, bool diversity = true) {
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = noise;
  simulator::CalibrationSessionConfig cfg;
  cfg.diversity = diversity;
  Session s;
  s.session = simulator::run_calibration_session(simulator::default_phantom(simulator::PhantomKind::kPlate),
                                                 sensor, simulator::default_true_extrinsics(), cfg, seed);
  s.obs = prepare_observations(s.session.poses, s.session.sector, SolverConfig{});
  s.init = initial_params(s.obs, s.session.mount_guess);
  return s;
}

TEST(FitLine, RecoversLineDespiteOutliers) {
  CounterRng rng(4, 5);
  std::vector<Vec2> pts;
  const Vec2 dir = Vec2(1.0, 0.3).normalized();
  for (int i = 0; i < 80; ++i) pts.push_back(Vec2(0.1, 0.2) + (0.01 * i) * dir + 0.0005 * Vec2(rng.normal(), rng.normal()));
  for (int i = 0; i < 20; ++i) pts.push_back(Vec2(rng.uniform(), rng.uniform() + 1.0));
  const LineFitResult fit = fit_line(pts, SolverConfig{});
  EXPECT_GE(fit.inlier_indices.size(), 78u);
  for (std::size_t idx : fit.inlier_indices) EXPECT_LT(idx, 80u);
  EXPECT_GT(std::abs(fit.direction.dot(dir)), 0.9999);
}

TEST(FitLine, TooFewSamplesThrow) {
  std::vector<Vec2> pts(5, Vec2::Zero());
  try {
    fit_line(pts, SolverConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotEnoughData);
  }
}

TEST(FitLine, DeterministicAcrossThreadCounts) {
  CounterRng rng(8, 8);
  std::vector<Vec2> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(Vec2(0.005 * i, 0.001 * rng.normal()));
  set_thread_count(1);
  const LineFitResult a = fit_line(pts, SolverConfig{});
  set_thread_count(4);
  const LineFitResult b = fit_line(pts, SolverConfig{});
  set_thread_count(0);
  EXPECT_EQ(a.inlier_indices, b.inlier_indices);
  EXPECT_EQ(a.direction, b.direction);
}

TEST(CauchyLoss, MatchesClosedForm) {
  EXPECT_DOUBLE_EQ(cauchy_loss(0.0, 1.0), 0.0);
  const double s = 0.0025;
  const double r = 0.004;
  EXPECT_NEAR(cauchy_loss(r, s), 0.5 * s * s * std::log1p((r / s) * (r / s)), 1e-18);
  EXPECT_LT(cauchy_loss(1.0, s), 0.5);
}

TEST(Jacobian, AnalyticMatchesNumeric) {
  const Session s = make_session(0.001, 3);
  CalibrationParams p = s.init;
  p.omega += Vec3(0.01, -0.02, 0.015);
  p.translation += Vec3(0.003, 0.001, -0.002);
  const Eigen::MatrixXd a = residual_jacobian(p, s.obs);
  const Eigen::MatrixXd n = numeric_jacobian(p, s.obs);
  ASSERT_EQ(a.rows(), n.rows());
  EXPECT_LT((a - n).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Solve, ExactRecoveryWithoutNoise) {
  const Session s = make_session(0.0, 1);
  const CalibrationResult r = solve_extrinsics(s.obs, s.init, SolverConfig{});
  const RigidTransform& truth = s.session.true_extrinsics;
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.extrinsics.translation() - truth.translation()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(rotation_angle(truth.rotation().transpose() * r.extrinsics.rotation()), 1e-6);
  EXPECT_LT(r.overall_rms, 1e-9);
  EXPECT_EQ(r.extrinsics.from_frame(), FrameId::lidar());
  EXPECT_EQ(r.extrinsics.to_frame(), FrameId::tcp());
}

TEST(Solve, ResidualsAreSelfConsistent) {
  const Session s = make_session(0.0015, 2);
  const CalibrationResult r = solve_extrinsics(s.obs, s.init, SolverConfig{});
  const Eigen::VectorXd res = residual_stack(r.params, s.obs);
  const double rms = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
  EXPECT_NEAR(rms, r.overall_rms, 1e-12);
  std::size_t count = 0;
  for (const auto& pose : r.residuals) count += pose.size();
  EXPECT_EQ(count, static_cast<std::size_t>(res.size()));
}

TEST(Solve, WithoutInitialGuessStillConverges) {
  const Session s = make_session(0.0, 5);
  const CalibrationResult r = solve_extrinsics(s.obs, std::nullopt, SolverConfig{});
  EXPECT_LT((r.extrinsics.translation() - s.session.true_extrinsics.translation()).norm(), 1e-6);
}

class DegeneracyProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(DegeneracyProperty, SingleOrientationAlwaysRaises) {
  const Session s = make_session(0.001, GetParam(), false);
  try {
    solve_extrinsics(s.obs, s.init, SolverConfig{});
    FAIL() << "solver returned an answer for a single-orientation pose set";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegeneracy);
  }
  try {
    solve_extrinsics(s.obs, std::nullopt, SolverConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegeneracy);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, DegeneracyProperty, ::testing::Range<std::uint64_t>(0, 8));

TEST(Degeneracy, TooFewPosesRaise) {
  Session s = make_session(0.0, 1);
  s.obs.resize(2);
  EXPECT_THROW(solve_extrinsics(s.obs, s.init, SolverConfig{}), Error);
}

TEST(Report, JsonRoundTrip) {
  const Session s = make_session(0.0015, 6);
  const CalibrationReport rep = calibration_report(solve_extrinsics(s.obs, s.init, SolverConfig{}));
  const CalibrationReport back = CalibrationReport::from_json(rep.to_json());
  EXPECT_EQ(back.to_json().dump(), rep.to_json().dump());
  EXPECT_NEAR((back.extrinsics().matrix() - rep.extrinsics().matrix()).norm(), 0.0, 1e-15);
}

TEST(Dataset, WriteAndLoadGivesSameSolution) {
  const Session s = make_session(0.0015, 7);
  simulator::SensorModel sensor;
  sensor.range_noise_sigma = 0.0015;
  const auto dir = std::filesystem::temp_directory_path() / "lidarprobe_test_calibration_ds";
  std::filesystem::remove_all(dir);
  simulator::write_calibration_session(dir, s.session, sensor);
  const CalibrationDataset ds = load_calibration_dataset(dir);
  ASSERT_TRUE(ds.mount_guess.has_value());
  const auto obs = prepare_observations(ds.poses, ds.sector, ds.solver);
  const CalibrationResult a = solve_extrinsics(obs, initial_params(obs, *ds.mount_guess), ds.solver);
  const CalibrationResult b = solve_extrinsics(s.obs, s.init, SolverConfig{});
  EXPECT_NEAR((a.extrinsics.translation() - b.extrinsics.translation()).norm(), 0.0, 1e-9);
}

TEST(SolverConfig, ValidationRejectsBadValues) {
  SolverConfig c;
  c.cauchy_scale = 0.0;
  EXPECT_THROW(c.validate(), Error);
  SolverConfig d;
  EXPECT_THROW(update_from_json({{"not_a_key", 1}}, d), Error);
}

}  // namespace
}  // namespace lidarprobe::calibration
