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

#ifndef LIDARPROBE_METRICS_HPP
#define LIDARPROBE_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "lidarprobe/geometry.hpp"

namespace lidarprobe::metrics {

/// Returns the p-quantile (p in [0, 1]) using linear interpolation between
/// order statistics (Hyndman-Fan type 7).
double quantile_type7(std::vector<double> values, double p);

double rms(std::span<const double> values);

struct SurfaceErrorReport {
  double e_rmse = 0.0;    // meters
  double e_95 = 0.0;      // meters
  double coverage = 0.0;  // fraction of source points within tolerance
  double tolerance = 0.0;
  std::vector<double> per_point_distances;
};

/// Nearest-neighbor distances from every source point to the reference cloud.
SurfaceErrorReport surface_error(const PointCloud& source, const PointCloud& reference,
                                 double tolerance);

/// p_par = p_S + (I - n n^T)(p_sphere - p_S). Rejects normals that are not unit length.
Vec3 project_marker(const Vec3& p_sphere, const Vec3& p_surface, const Vec3& normal);
double tangential_error(const Vec3& p_parallel, const Vec3& p_surface);

enum class IccForm { kOneWayRandom, kTwoWayRandom };
std::string to_string(IccForm form);
IccForm icc_form_from_string(const std::string& name);

struct RepeatabilityReport {
  std::vector<double> per_subject_mean;
  std::vector<double> per_subject_sd;  // sample SD (n - 1)
  double icc = 0.0;
  IccForm form = IccForm::kOneWayRandom;
  double ms_between = 0.0;
  double ms_within = 0.0;
  std::vector<std::vector<double>> trials;
};

/// `trials[s][j]` is trial j of subject s. ICC(1,1) is
/// (MSB - MSW) / (MSB + (k - 1) MSW); when the residual mean square is zero the
/// ICC is reported as 1.0.
RepeatabilityReport repeatability(const std::vector<std::vector<double>>& trials,
                                  IccForm form = IccForm::kOneWayRandom);

/// Fixed-width histogram whose bins are centered on multiples of bin_width
/// between center_lo and center_hi (both inclusive).
struct Histogram {
  double center_lo = 0.0;
  double center_hi = 0.0;
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
};

Histogram centered_histogram(std::span<const double> values, double center_lo, double center_hi,
                             double bin_width);

struct CalibrationStats {
  std::vector<double> per_pose_rms;
  double overall_rms = 0.0;
  double mean_per_pose_rms = 0.0;
  double min_per_pose_rms = 0.0;
  double max_per_pose_rms = 0.0;
  double sd_per_pose_rms = 0.0;
  Histogram histogram;  // meters; bins of 0.5 mm centered over [-6, 6] mm
};

CalibrationStats calibration_stats(const std::vector<std::vector<double>>& residuals_by_pose);

}  // namespace lidarprobe::metrics

#endif  // LIDARPROBE_METRICS_HPP
