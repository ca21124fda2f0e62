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

#ifndef LIDARPROBE_NEIGHBOR_INDEX_HPP
#define LIDARPROBE_NEIGHBOR_INDEX_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lidarprobe/errors.hpp"
#include "lidarprobe/geometry.hpp"

namespace lidarprobe {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Strict ordering by (squared distance, index).
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

/// Exact k-d tree over fixed-dimension points. Query results are sorted by
/// ascending distance with ties broken by ascending point index, so they are
/// identical to a brute-force scan that uses the same squared-distance sum.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;

  explicit KdTree(std::span<const Point> points, std::size_t leaf_size = 12)
      : size_(points.size()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    data_.resize(size_ * Dim);
    for (std::size_t i = 0; i < size_; ++i) {
      for (int d = 0; d < Dim; ++d) data_[i * Dim + d] = points[i][d];
    }
    order_.resize(size_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (size_ > 0) build(0, size_);
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  static double squared_distance(const double* a, const double* b) {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

  /// Exactly min(k, size()) neighbors.
  std::vector<Neighbor> knn(const Point& query, std::size_t k) const {
    std::vector<Neighbor> heap;
    k = std::min(k, size_);
    if (k == 0) return heap;
    heap.reserve(k + 1);
    double q[Dim];
    for (int d = 0; d < Dim; ++d) q[d] = query[d];
    knn_recurse(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), closer);
    return heap;
  }

  Neighbor nearest(const Point& query) const {
    if (size_ == 0) fail(ErrorKind::kTooFewPoints, "nearest-neighbor query on empty index");
    return knn(query, 1).front();
  }

  /// All points with squared distance <= radius^2, sorted.
  std::vector<Neighbor> radius(const Point& query, double radius) const {
    std::vector<Neighbor> out;
    if (size_ == 0 || radius < 0.0) return out;
    double q[Dim];
    for (int d = 0; d < Dim; ++d) q[d] = query[d];
    radius_recurse(0, q, radius * radius, out);
    std::sort(out.begin(), out.end(), closer);
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  const double* coords(std::size_t i) const { return data_.data() + i * Dim; }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    int best_dim = 0;
    double best_spread = -1.0;
    for (int d = 0; d < Dim; ++d) {
      double lo = coords(order_[begin])[d];
      double hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = coords(order_[i])[d];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0) return id;  // all identical: keep as leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       return coords(a)[best_dim] < coords(b)[best_dim];
                     });
    const double split = coords(order_[mid])[best_dim];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& node = nodes_[id];
    node.split_dim = best_dim;
    node.split_value = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void knn_recurse(std::size_t node_id, const double* q, std::size_t k,
                   std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.split_dim < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, squared_distance(q, coords(idx))};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), closer);
        } else if (closer(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), closer);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), closer);
        }
      }
      return;
    }
    const double diff = q[node.split_dim] - node.split_value;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    knn_recurse(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().squared_distance) {
      knn_recurse(far, q, k, heap);
    }
  }

  void radius_recurse(std::size_t node_id, const double* q, double r2,
                      std::vector<Neighbor>& out) const {
    const Node& node = nodes_[node_id];
    if (node.split_dim < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = squared_distance(q, coords(idx));
        if (d2 <= r2) out.push_back({idx, d2});
      }
      return;
    }
    const double diff = q[node.split_dim] - node.split_value;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    radius_recurse(near, q, r2, out);
    if (diff * diff <= r2) radius_recurse(far, q, r2, out);
  }

  std::size_t size_ = 0;
  std::size_t leaf_size_ = 12;
  std::vector<double> data_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Spatial index over a PointCloud's points. Immutable; concurrent queries are safe.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(const PointCloud& cloud) : tree_(std::span<const Vec3>(cloud.points())) {}
  explicit NeighborIndex(std::span<const Vec3> points) : tree_(points) {}

  std::size_t size() const noexcept { return tree_.size(); }
  std::vector<Neighbor> query(const Vec3& p, std::size_t k) const { return tree_.knn(p, k); }
  Neighbor nearest(const Vec3& p) const { return tree_.nearest(p); }
  std::vector<Neighbor> radius(const Vec3& p, double r) const { return tree_.radius(p, r); }

 private:
  KdTree<3> tree_;
};

}  // namespace lidarprobe

#endif  // LIDARPROBE_NEIGHBOR_INDEX_HPP
