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

#include <algorithm>
#include <cmath>
#include <limits>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/metrics.hpp"
#include "lidarprobe/neighbor_index.hpp"
#include "lidarprobe/preprocess.hpp"

namespace lidarprobe::preprocess {

namespace {

// Dense 3D array with x fastest.
struct Stencil {
  std::size_t idx[8];
  double w[8];
};

struct Grid3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  std::vector<double> v;

  Grid3(int x, int y, int z) : nx(x), ny(y), nz(z), v(static_cast<std::size_t>(x) * y * z, 0.0) {}
  std::size_t at(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
};

// Adds `value` with trilinear weights at continuous index (fx, fy, fz).
void splat(Grid3& g, double fx, double fy, double fz, double value) {
  const int i0 = static_cast<int>(std::floor(fx));
  const int j0 = static_cast<int>(std::floor(fy));
  const int k0 = static_cast<int>(std::floor(fz));
  const double ux = fx - i0;
  const double uy = fy - j0;
  const double uz = fz - k0;
  for (int dk = 0; dk <= 1; ++dk) {
    const int k = k0 + dk;
    if (k < 0 || k >= g.nz) continue;
    const double wz = dk ? uz : 1.0 - uz;
    for (int dj = 0; dj <= 1; ++dj) {
      const int j = j0 + dj;
      if (j < 0 || j >= g.ny) continue;
      const double wy = dj ? uy : 1.0 - uy;
      for (int di = 0; di <= 1; ++di) {
        const int i = i0 + di;
        if (i < 0 || i >= g.nx) continue;
        const double wx = di ? ux : 1.0 - ux;
        g.v[g.at(i, j, k)] += value * wx * wy * wz;
      }
    }
  }
}

// y = A x with A = 6 I - (sum of the 6 neighbors), zero outside the grid.
void apply_laplacian(const Eigen::Vector3i& d, const std::vector<double>& x, std::vector<double>& y) {
  const int nx = d.x();
  const int ny = d.y();
  const int nz = d.z();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = (static_cast<std::size_t>(k) * ny + j) * nx;
      for (int i = 0; i < nx; ++i) {
        const std::size_t c = row + i;
        double s = 6.0 * x[c];
        if (i > 0) s -= x[c - 1];
        if (i + 1 < nx) s -= x[c + 1];
        if (j > 0) s -= x[c - nx];
        if (j + 1 < ny) s -= x[c + nx];
        if (k > 0) s -= x[c - static_cast<std::size_t>(nx) * ny];
        if (k + 1 < nz) s -= x[c + static_cast<std::size_t>(nx) * ny];
        y[c] = s;
      }
    }
  }
}

// Dot product reduced slice by slice in a fixed order.
double ordered_dot(const Eigen::Vector3i& d, const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t slice = static_cast<std::size_t>(d.x()) * d.y();
  std::vector<double> partial(static_cast<std::size_t>(d.z()), 0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.z(); ++k) {
    double s = 0.0;
    const std::size_t base = slice * static_cast<std::size_t>(k);
    for (std::size_t c = base; c < base + slice; ++c) s += a[c] * b[c];
    partial[static_cast<std::size_t>(k)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

Vec3 project_to_level(const ImplicitSurface& s, Vec3 p) {
  const double step = 0.25 * s.spacing;
  for (int it = 0; it < 4; ++it) {
    const double f = s.sample(p) - s.iso_value;
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
      Vec3 d = Vec3::Zero();
      d[a] = step;
      g[a] = (s.sample(p + d) - s.sample(p - d)) / (2.0 * step);
    }
    const double g2 = g.squaredNorm();
    if (!(g2 > 0.0)) break;
    Vec3 delta = -(f / g2) * g;
    const double len = delta.norm();
    if (len > 0.5 * s.spacing) delta *= 0.5 * s.spacing / len;
    p += delta;
    if (len < 1e-9 * s.spacing) break;
  }
  return p;
}

Stencil interpolation_stencil(const ImplicitSurface& g, const Vec3& p) {
  const Vec3 f = (p - g.origin) / g.spacing - Vec3::Constant(0.5);
  int i0[3];
  double u[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(f[a], 0.0, static_cast<double>(g.dims[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(c)), g.dims[a] - 2);
    u[a] = c - i0[a];
  }
  Stencil st;
  int n = 0;
  for (int dk = 0; dk <= 1; ++dk) {
    for (int dj = 0; dj <= 1; ++dj) {
      for (int di = 0; di <= 1; ++di, ++n) {
        st.w[n] = (di ? u[0] : 1.0 - u[0]) * (dj ? u[1] : 1.0 - u[1]) * (dk ? u[2] : 1.0 - u[2]);
        st.idx[n] = g.index(i0[0] + di, i0[1] + dj, i0[2] + dk);
      }
    }
  }
  return st;
}

}  // namespace

double ImplicitSurface::sample(const Vec3& p) const {
  const Stencil st = interpolation_stencil(*this, p);
  double s = 0.0;
  for (int c = 0; c < 8; ++c) s += st.w[c] * values[st.idx[c]];
  return s;
}

ImplicitSurface poisson_solve(const PointCloud& cloud, int grid_resolution, int max_iterations,
                              double tolerance, double screening) {
  const std::vector<Vec3>& normals = cloud.normals();
  if (cloud.empty()) fail(ErrorKind::kEmptyReconstruction, "Poisson solve on an empty cloud");
  if (grid_resolution < 8) fail(ErrorKind::kInvalidInput, "Poisson grid resolution must be >= 8");

  Vec3 lo = cloud.points().front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double max_extent = std::max((hi - lo).maxCoeff(), 1e-6);
  const double margin = 0.1 * max_extent;
  const Vec3 span = (hi - lo) + Vec3::Constant(2.0 * margin);
  ImplicitSurface s;
  s.spacing = span.maxCoeff() / grid_resolution;
  for (int a = 0; a < 3; ++a) s.dims[a] = std::max(4, static_cast<int>(std::ceil(span[a] / s.spacing)));
  const Vec3 center = 0.5 * (lo + hi);
  s.origin = center - 0.5 * s.spacing * s.dims.cast<double>();

  const int nx = s.dims.x();
  const int ny = s.dims.y();
  const int nz = s.dims.z();
  const double h = s.spacing;
  Grid3 vx(nx + 1, ny, nz);
  Grid3 vy(nx, ny + 1, nz);
  Grid3 vz(nx, ny, nz + 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 f = (cloud.points()[i] - s.origin) / h;
    const Vec3& n = normals[i];
    splat(vx, f.x(), f.y() - 0.5, f.z() - 0.5, n.x());
    splat(vy, f.x() - 0.5, f.y(), f.z() - 0.5, n.y());
    splat(vz, f.x() - 0.5, f.y() - 0.5, f.z(), n.z());
  }

  // A chi = b with A = -h^2 lap and b = -h^2 div(V).
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
  std::vector<double> b(total);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const double div = (vx.v[vx.at(i + 1, j, k)] - vx.v[vx.at(i, j, k)]) +
                           (vy.v[vy.at(i, j + 1, k)] - vy.v[vy.at(i, j, k)]) +
                           (vz.v[vz.at(i, j, k + 1)] - vz.v[vz.at(i, j, k)]);
        b[s.index(i, j, k)] = -h * div;
      }
    }
  }

  std::vector<Stencil> stencils;
  double alpha_screen = 0.0;
  if (screening > 0.0) {
    std::vector<std::size_t> occupied;
    for (const Vec3& q : cloud.points()) {
      stencils.push_back(interpolation_stencil(s, q));
      const Vec3 f = (q - s.origin) / h;
      occupied.push_back(s.index(std::clamp(static_cast<int>(std::floor(f.x())), 0, nx - 1),
                                 std::clamp(static_cast<int>(std::floor(f.y())), 0, ny - 1),
                                 std::clamp(static_cast<int>(std::floor(f.z())), 0, nz - 1)));
    }
    std::sort(occupied.begin(), occupied.end());
    const auto cells = std::unique(occupied.begin(), occupied.end()) - occupied.begin();
    alpha_screen = screening * static_cast<double>(cells) / static_cast<double>(cloud.size());
  }
  const auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    apply_laplacian(s.dims, in, out);
    for (const Stencil& st : stencils) {
      double v = 0.0;
      for (int c = 0; c < 8; ++c) v += st.w[c] * in[st.idx[c]];
      v *= alpha_screen;
      for (int c = 0; c < 8; ++c) out[st.idx[c]] += v * st.w[c];
    }
  };

  std::vector<double> x(total, 0.0);
  std::vector<double> r = b;
  std::vector<double> p = r;
  std::vector<double> ap(total);
  const double b_norm2 = ordered_dot(s.dims, b, b);
  double rr = b_norm2;
  int it = 0;
  if (b_norm2 > 0.0) {
    const double stop = tolerance * tolerance * b_norm2;
    while (rr > stop) {
      if (it >= max_iterations) {
        fail(ErrorKind::kSolver, "Poisson conjugate gradient did not converge in " +
                                     std::to_string(max_iterations) + " iterations");
      }
      apply(p, ap);
      const double alpha = rr / ordered_dot(s.dims, p, ap);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(total); ++c) {
        x[c] += alpha * p[c];
        r[c] -= alpha * ap[c];
      }
      const double rr_next = ordered_dot(s.dims, r, r);
      const double beta = rr_next / rr;
      rr = rr_next;
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(total); ++c) {
        p[c] = r[c] + beta * p[c];
      }
      ++it;
    }
  }
  s.values = std::move(x);
  s.iterations = it;

  std::vector<double> at_samples;
  at_samples.reserve(cloud.size());
  for (const Vec3& q : cloud.points()) at_samples.push_back(s.sample(q));
  s.iso_value = metrics::quantile_type7(std::move(at_samples), 0.5);
  return s;
}

std::vector<Vec3> extract_isosurface(const ImplicitSurface& s) {
  const int nx = s.dims.x();
  const int ny = s.dims.y();
  const int nz = s.dims.z();
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  static constexpr int kEdge[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                                       {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  std::vector<std::vector<Vec3>> per_slice(static_cast<std::size_t>(std::max(nz - 1, 0)));
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < nz - 1; ++k) {
    auto& out = per_slice[static_cast<std::size_t>(k)];
    for (int j = 0; j < ny - 1; ++j) {
      for (int i = 0; i < nx - 1; ++i) {
        double val[8];
        bool any_in = false;
        bool any_out = false;
        for (int c = 0; c < 8; ++c) {
          val[c] = s.values[s.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] - s.iso_value;
          (val[c] > 0.0 ? any_in : any_out) = true;
        }
        if (!(any_in && any_out)) continue;
        Vec3 sum = Vec3::Zero();
        int count = 0;
        for (const auto& e : kEdge) {
          const double a = val[e[0]];
          const double bv = val[e[1]];
          if ((a > 0.0) == (bv > 0.0)) continue;
          const double t = a / (a - bv);
          const Vec3 pa = s.cell_center(i + kCorner[e[0]][0], j + kCorner[e[0]][1], k + kCorner[e[0]][2]);
          const Vec3 pb = s.cell_center(i + kCorner[e[1]][0], j + kCorner[e[1]][1], k + kCorner[e[1]][2]);
          sum += pa + t * (pb - pa);
          ++count;
        }
        out.push_back(project_to_level(s, sum / count));
      }
    }
  }
  std::vector<Vec3> all;
  for (auto& v : per_slice) all.insert(all.end(), v.begin(), v.end());
  return all;
}

PointCloud poisson_reconstruct_and_trim(const PointCloud& cloud, const PreprocessConfig& cfg) {
  if (!cloud.has_normals()) fail(ErrorKind::kMissingNormals, "Poisson reconstruction requires normals");
  const ImplicitSurface surface =
      poisson_solve(cloud, cfg.poisson_grid_resolution, cfg.poisson_max_iterations, cfg.poisson_tolerance,
                    cfg.poisson_screening);
  const std::vector<Vec3> candidates = extract_isosurface(surface);
  const NeighborIndex index(cloud);
  const double limit = cfg.trim_distance * cfg.trim_distance;
  std::vector<char> keep(candidates.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(candidates.size()); ++i) {
    keep[i] = index.nearest(candidates[i]).squared_distance <= limit ? 1 : 0;
  }
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (keep[i]) out.push_back(candidates[i]);
  }
  if (out.empty()) fail(ErrorKind::kEmptyReconstruction, "Poisson surface is empty after trimming");
  return PointCloud(std::move(out), cloud.frame());
}

}  // namespace lidarprobe::preprocess
