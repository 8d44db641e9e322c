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

#include "mambapf/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace mambapf {

KdTree::KdTree(PointCloud points, Index leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<Index>(1, leaf_size)) {
  require_nonempty(points_.rows(), "KdTree");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / leaf_size_ + 2));
  build(0, points_.rows());
}

Index KdTree::build(Index begin, Index end) {
  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Eigen::RowVector3d lo = Eigen::RowVector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::RowVector3d hi = -lo;
  for (Index i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.row(order_[i]));
    hi = hi.cwiseMax(points_.row(order_[i]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) == lo(axis)) return id;  // all coincident, keep as leaf

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    const double ca = points_(a, axis), cb = points_(b, axis);
    return ca < cb || (ca == cb && a < b);
  });
  const double split = points_(order_[mid], axis);

  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(Index node_id, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      const Index idx = order_[i];
      const Neighbor cand{idx, (points_.row(idx).transpose() - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), neighbor_less);
      } else if (neighbor_less(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), neighbor_less);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), neighbor_less);
      }
    }
    return;
  }
  const double diff = q(node.axis) - node.split;
  const Index near = diff < 0.0 ? node.left : node.right;
  const Index far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().distance2) search(far, q, k, heap);
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, Index k) const {
  if (k < 1 || k > size()) {
    fail(ErrorCode::invalid_input,
         "KdTree::knn: k=" + std::to_string(k) + " outside [1, " + std::to_string(size()) + "]");
  }
  std::vector<Neighbor> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  search(0, query, static_cast<std::size_t>(k), heap);
  std::sort_heap(heap.begin(), heap.end(), neighbor_less);
  return heap;
}

Neighbor KdTree::nearest(const Vec3& query) const { return knn(query, 1).front(); }

void KdTree::collect(Index node_id, const Vec3& q, double radius2, std::vector<Neighbor>& out) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      const Index idx = order_[i];
      const double d2 = (points_.row(idx).transpose() - q).squaredNorm();
      if (d2 <= radius2) out.push_back({idx, d2});
    }
    return;
  }
  const double diff = q(node.axis) - node.split;
  collect(diff < 0.0 ? node.left : node.right, q, radius2, out);
  if (diff * diff <= radius2) collect(diff < 0.0 ? node.right : node.left, q, radius2, out);
}

std::vector<Neighbor> KdTree::within(const Vec3& query, double radius2) const {
  std::vector<Neighbor> out;
  if (radius2 >= 0.0) collect(0, query, radius2, out);
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> knn_rows(
    const Eigen::MatrixXd& features, Index k) {
  const Index n = features.rows();
  if (k < 0 || k >= n) {
    fail(ErrorCode::invalid_input,
         "knn_rows: k=" + std::to_string(k) + " must be < row count " + std::to_string(n));
  }
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, k);
  if (k == 0) return out;

  // Screening distances |a|^2 + |b|^2 - 2 a.b come from one GEMM; anything
  // within the rounding bound of the k-th screened value is re-ranked with
  // exact differences, so the result equals an exhaustive exact sort.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f = features;
  const Eigen::VectorXd sq = f.rowwise().squaredNorm();
  const Eigen::MatrixXd gram = f * f.transpose();
  const double max_sq = sq.maxCoeff();
  const Index d = f.cols();
  std::vector<double> screen(static_cast<std::size_t>(n));
  std::vector<double> sorted(static_cast<std::size_t>(n - 1));
  std::vector<Neighbor> cand;
  for (Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < n; ++j) {
      screen[static_cast<std::size_t>(j)] = sq(i) + sq(j) - 2.0 * gram(j, i);
      if (j != i) sorted[c++] = screen[static_cast<std::size_t>(j)];
    }
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
    const double bound = 1e-12 * (sq(i) + max_sq) * double(d + 4);
    const double limit = sorted[static_cast<std::size_t>(k - 1)] + 2.0 * bound;
    cand.clear();
    const double* fi = f.row(i).data();
    for (Index j = 0; j < n; ++j) {
      if (j == i || screen[static_cast<std::size_t>(j)] > limit) continue;
      const double* fj = f.row(j).data();
      double s = 0.0;
      for (Index t = 0; t < d; ++t) {
        const double diff = fi[t] - fj[t];
        s += diff * diff;
      }
      cand.push_back(Neighbor{j, s});
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), neighbor_less);
    for (Index t = 0; t < k; ++t) out(i, t) = cand[static_cast<std::size_t>(t)].index;
  }
  return out;
}

}  // namespace mambapf
