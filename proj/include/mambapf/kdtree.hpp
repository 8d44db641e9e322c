// Copyright 2026 The mambapf Authors
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

#pragma once

#include <vector>

#include <Eigen/Core>

#include "mambapf/geometry.hpp"

namespace mambapf {

struct Neighbor {
  Index index = -1;
  double distance2 = 0.0;
};

/// Strict order by (squared distance, index); the index breaks exact ties.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance2 < b.distance2 || (a.distance2 == b.distance2 && a.index < b.index);
}

/// Exact k-nearest-neighbour search over 3-D points.
class KdTree {
 public:
  explicit KdTree(PointCloud points, Index leaf_size = 12);

  /// The k nearest points to `query`, sorted by neighbor_less.
  std::vector<Neighbor> knn(const Vec3& query, Index k) const;
  Neighbor nearest(const Vec3& query) const;
  /// Every point with squared distance <= radius2, sorted by neighbor_less.
  std::vector<Neighbor> within(const Vec3& query, double radius2) const;

  const PointCloud& points() const { return points_; }
  Index size() const { return points_.rows(); }

 private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    Index left = -1;
    Index right = -1;
  };

  Index build(Index begin, Index end);
  void search(Index node, const Vec3& query, std::size_t k, std::vector<Neighbor>& heap) const;
  void collect(Index node, const Vec3& query, double radius2, std::vector<Neighbor>& out) const;

  PointCloud points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index leaf_size_;
};

/// Brute-force kNN over the rows of an arbitrary-width feature matrix,
/// excluding each row itself. Returns rows x k indices in neighbor_less order.
Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> knn_rows(
    const Eigen::MatrixXd& features, Index k);

}  // namespace mambapf
