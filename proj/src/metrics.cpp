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

#include "lidarprobe/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/neighbor_index.hpp"

namespace lidarprobe::metrics {

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) fail(ErrorKind::kInvalidInput, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double rms(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::kInvalidInput, "rms of empty group");
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s / static_cast<double>(values.size()));
}

SurfaceErrorReport surface_error(const PointCloud& source, const PointCloud& reference,
                                 double tolerance) {
  if (source.empty() || reference.empty()) {
    fail(ErrorKind::kInvalidInput, "surface_error needs non-empty clouds");
  }
  const NeighborIndex index(reference);
  SurfaceErrorReport report;
  report.tolerance = tolerance;
  report.per_point_distances.resize(source.size());
  const auto n = static_cast<std::ptrdiff_t>(source.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    report.per_point_distances[static_cast<std::size_t>(i)] =
        std::sqrt(index.nearest(source.points()[static_cast<std::size_t>(i)]).squared_distance);
  }
  std::size_t within = 0;
  for (double d : report.per_point_distances) within += d <= tolerance ? 1 : 0;
  report.e_rmse = rms(report.per_point_distances);
  report.e_95 = quantile_type7(report.per_point_distances, 0.95);
  report.coverage = static_cast<double>(within) / static_cast<double>(source.size());
  return report;
}

Vec3 project_marker(const Vec3& p_sphere, const Vec3& p_surface, const Vec3& normal) {
  if (!(std::abs(normal.norm() - 1.0) <= 1e-9)) {
    fail(ErrorKind::kInvalidInput, "project_marker requires a unit normal");
  }
  const Vec3 v = p_sphere - p_surface;
  return p_surface + (v - normal * normal.dot(v));
}

double tangential_error(const Vec3& p_parallel, const Vec3& p_surface) {
  return (p_parallel - p_surface).norm();
}

std::string to_string(IccForm form) {
  return form == IccForm::kOneWayRandom ? "ICC(1,1)" : "ICC(2,1)";
}

IccForm icc_form_from_string(const std::string& name) {
  if (name == "ICC(1,1)") return IccForm::kOneWayRandom;
  if (name == "ICC(2,1)") return IccForm::kTwoWayRandom;
  fail(ErrorKind::kInvalidInput, "unknown ICC form '" + name + "'");
}

RepeatabilityReport repeatability(const std::vector<std::vector<double>>& trials, IccForm form) {
  const std::size_t n = trials.size();
  if (n < 2) fail(ErrorKind::kInvalidInput, "repeatability needs at least 2 subjects");
  const std::size_t k = trials.front().size();
  if (k < 2) fail(ErrorKind::kInvalidInput, "repeatability needs at least 2 trials per subject");
  for (const auto& row : trials) {
    if (row.size() != k) fail(ErrorKind::kInvalidInput, "ragged trial matrix");
  }
  RepeatabilityReport r;
  r.form = form;
  r.trials = trials;
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);

  double grand = 0.0;
  for (const auto& row : trials) {
    double m = 0.0;
    for (double v : row) m += v;
    m /= dk;
    double ss = 0.0;
    for (double v : row) ss += (v - m) * (v - m);
    r.per_subject_mean.push_back(m);
    r.per_subject_sd.push_back(std::sqrt(ss / (dk - 1.0)));
    grand += m;
  }
  grand /= dn;

  std::vector<double> col_mean(k, 0.0);
  for (const auto& row : trials) {
    for (std::size_t j = 0; j < k; ++j) col_mean[j] += row[j] / dn;
  }
  double ss_between = 0.0;
  for (double m : r.per_subject_mean) ss_between += dk * (m - grand) * (m - grand);
  double ss_within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : trials[i]) ss_within += (v - r.per_subject_mean[i]) * (v - r.per_subject_mean[i]);
  }
  double ss_cols = 0.0;
  for (double m : col_mean) ss_cols += dn * (m - grand) * (m - grand);

  const double msb = ss_between / (dn - 1.0);
  const double msw = ss_within / (dn * (dk - 1.0));
  r.ms_between = msb;
  r.ms_within = msw;

  if (form == IccForm::kOneWayRandom) {
    r.icc = msw == 0.0 ? 1.0 : (msb - msw) / (msb + (dk - 1.0) * msw);
  } else {
    const double msc = ss_cols / (dk - 1.0);
    const double mse = std::max(0.0, ss_within - ss_cols) / ((dn - 1.0) * (dk - 1.0));
    const double denom = msb + (dk - 1.0) * mse + dk * (msc - mse) / dn;
    r.icc = (mse == 0.0 && msc == 0.0) || denom == 0.0 ? 1.0 : (msb - mse) / denom;
  }
  r.icc = std::clamp(r.icc, -1.0, 1.0);
  return r;
}

Histogram centered_histogram(std::span<const double> values, double center_lo, double center_hi,
                             double bin_width) {
  if (!(bin_width > 0.0) || !(center_hi >= center_lo)) {
    fail(ErrorKind::kInvalidInput, "invalid histogram bins");
  }
  Histogram h;
  h.center_lo = center_lo;
  h.center_hi = center_hi;
  h.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(std::llround((center_hi - center_lo) / bin_width)) + 1;
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double pos = std::floor((v - center_lo) / bin_width + 0.5);
    if (pos < 0.0) {
      ++h.underflow;
    } else if (pos >= static_cast<double>(bins)) {
      ++h.overflow;
    } else {
      ++h.counts[static_cast<std::size_t>(pos)];
    }
  }
  return h;
}

CalibrationStats calibration_stats(const std::vector<std::vector<double>>& residuals_by_pose) {
  if (residuals_by_pose.empty()) fail(ErrorKind::kInvalidInput, "no residual groups");
  CalibrationStats s;
  std::vector<double> all;
  for (const auto& group : residuals_by_pose) {
    if (group.empty()) fail(ErrorKind::kInvalidInput, "empty residual group");
    s.per_pose_rms.push_back(rms(group));
    all.insert(all.end(), group.begin(), group.end());
  }
  s.overall_rms = rms(all);
  const double np = static_cast<double>(s.per_pose_rms.size());
  double sum = 0.0;
  for (double v : s.per_pose_rms) sum += v;
  s.mean_per_pose_rms = sum / np;
  s.min_per_pose_rms = *std::min_element(s.per_pose_rms.begin(), s.per_pose_rms.end());
  s.max_per_pose_rms = *std::max_element(s.per_pose_rms.begin(), s.per_pose_rms.end());
  double ss = 0.0;
  for (double v : s.per_pose_rms) ss += (v - s.mean_per_pose_rms) * (v - s.mean_per_pose_rms);
  s.sd_per_pose_rms = s.per_pose_rms.size() > 1 ? std::sqrt(ss / (np - 1.0)) : 0.0;
  s.histogram = centered_histogram(all, -0.006, 0.006, 0.0005);
  return s;
}

}  // namespace lidarprobe::metrics
