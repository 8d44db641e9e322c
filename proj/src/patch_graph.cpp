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

#include "mambapf/patch_graph.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mambapf/kdtree.hpp"

namespace mambapf {

std::vector<std::pair<Index, Index>> DirectedGraph::edges() const {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(static_cast<std::size_t>(neighbors.size()));
  for (Index i = 0; i < neighbors.rows(); ++i)
    for (Index j = 0; j < neighbors.cols(); ++j) out.emplace_back(i, neighbors(i, j));
  return out;
}

std::vector<Patch> extract_patches(const PointCloud& cloud, Index patch_size, SeedStrategy strategy) {
  const Index n = cloud.rows();
  require_nonempty(n, "extract_patches");
  if (patch_size < 1 || patch_size > n) {
    fail(ErrorCode::invalid_input, "extract_patches: patch size " + std::to_string(patch_size) +
                                       " must be in [1, " + std::to_string(n) + "]");
  }
  if (strategy != SeedStrategy::farthest_point) fail(ErrorCode::invalid_input, "extract_patches: unknown strategy");

  const KdTree tree(cloud);
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  std::vector<double> seed_distance(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Index remaining = n;
  Index seed = tree.nearest(centroid(cloud).transpose()).index;

  std::vector<Patch> patches;
  while (true) {
    const Vec3 ref = cloud.row(seed).transpose();
    const auto nbrs = tree.knn(ref, patch_size);
    Patch p;
    p.reference_point = ref;
    p.points.resize(patch_size, 3);
    p.original_indices.reserve(static_cast<std::size_t>(patch_size));
    for (Index i = 0; i < patch_size; ++i) {
      const Index idx = nbrs[static_cast<std::size_t>(i)].index;
      p.points.row(i) = cloud.row(idx);
      p.original_indices.push_back(idx);
      if (!covered[static_cast<std::size_t>(idx)]) {
        covered[static_cast<std::size_t>(idx)] = true;
        --remaining;
      }
    }
    p.radius = (p.points.rowwise() - ref.transpose()).rowwise().norm().maxCoeff();
    patches.push_back(std::move(p));
    if (remaining == 0) break;

    Index next = -1;
    double best = -1.0;
    for (Index j = 0; j < n; ++j) {
      double& d = seed_distance[static_cast<std::size_t>(j)];
      d = std::min(d, (cloud.row(j).transpose() - ref).squaredNorm());
      if (!covered[static_cast<std::size_t>(j)] && d > best) {
        best = d;
        next = j;
      }
    }
    seed = next;
  }
  return patches;
}

DirectedGraph build_knn_graph(const Patch& patch, Index k) { return build_knn_graph(Eigen::MatrixXd(patch.points), k); }

DirectedGraph build_knn_graph(const Eigen::MatrixXd& features, Index k) {
  const Index n = features.rows();
  if (k < 0 || k >= n) {
    fail(ErrorCode::invalid_input,
         "build_knn_graph: k=" + std::to_string(k) + " must be < vertex count " + std::to_string(n));
  }
  DirectedGraph g;
  if (features.cols() != 3 || k == 0) {
    g.neighbors = knn_rows(features, k);
    return g;
  }
  g.neighbors.resize(n, k);
  const KdTree tree{PointCloud(features)};
  for (Index i = 0; i < n; ++i) {
    const auto nbrs = tree.knn(features.row(i).transpose(), k + 1);
    Index col = 0;
    for (const Neighbor& nb : nbrs) {
      if (nb.index == i || col == k) continue;
      g.neighbors(i, col++) = nb.index;
    }
  }
  return g;
}

StitchWeights stitch_weights(const Patch& patch) {
  if (!(patch.radius > 0.0)) fail(ErrorCode::degenerate_geometry, "stitch_weights: zero patch radius");
  StitchWeights w;
  w.support_radius = patch.radius / 3.0;
  const double denom = 2.0 * w.support_radius * w.support_radius;
  const Eigen::VectorXd d2 = (patch.points.rowwise() - patch.reference_point.transpose()).rowwise().squaredNorm();
  w.weights = (-d2.array() / denom).exp().matrix();
  w.weights /= w.weights.sum();
  return w;
}

namespace {

struct StitchPlan {
  std::vector<Index> anchor_patch;  // patch holding the first copy of each point
  std::vector<Index> anchor_row;
  Eigen::VectorXd total_weight;
};

StitchPlan plan_stitch(std::span<const Patch> patches, Index original_size,
                       std::span<const StitchWeights> weights) {
  if (weights.size() != patches.size()) fail(ErrorCode::invalid_input, "stitch_patches: weights not aligned");
  StitchPlan plan;
  plan.anchor_patch.assign(static_cast<std::size_t>(original_size), -1);
  plan.anchor_row.assign(static_cast<std::size_t>(original_size), -1);
  plan.total_weight = Eigen::VectorXd::Zero(original_size);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto& idx = patches[p].original_indices;
    if (weights[p].weights.size() != static_cast<Index>(idx.size())) {
      fail(ErrorCode::invalid_input, "stitch_patches: weight count differs from patch size");
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Index j = idx[i];
      if (j < 0 || j >= original_size) fail(ErrorCode::invalid_input, "stitch_patches: index out of range");
      if (plan.anchor_patch[static_cast<std::size_t>(j)] < 0) {
        plan.anchor_patch[static_cast<std::size_t>(j)] = static_cast<Index>(p);
        plan.anchor_row[static_cast<std::size_t>(j)] = static_cast<Index>(i);
      }
      plan.total_weight(j) += weights[p].weights(static_cast<Index>(i));
    }
  }
  for (Index j = 0; j < original_size; ++j) {
    if (plan.anchor_patch[static_cast<std::size_t>(j)] < 0) {
      fail(ErrorCode::coverage, "stitch_patches: point " + std::to_string(j) + " is in no patch");
    }
  }
  return plan;
}

template <typename GetRow>
PointCloud blend(std::span<const Patch> patches, Index original_size, std::span<const StitchWeights> weights,
                 const StitchPlan& plan, GetRow row) {
  PointCloud anchor(original_size, 3);
  for (Index j = 0; j < original_size; ++j) {
    anchor.row(j) = row(plan.anchor_patch[static_cast<std::size_t>(j)], plan.anchor_row[static_cast<std::size_t>(j)]);
  }
  PointCloud offset = PointCloud::Zero(original_size, 3);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto& idx = patches[p].original_indices;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Index j = idx[i];
      offset.row(j) += weights[p].weights(static_cast<Index>(i)) *
                       (row(static_cast<Index>(p), static_cast<Index>(i)) - anchor.row(j));
    }
  }
  for (Index j = 0; j < original_size; ++j) anchor.row(j) += offset.row(j) / plan.total_weight(j);
  return anchor;
}

std::vector<StitchWeights> all_weights(std::span<const Patch> patches) {
  std::vector<StitchWeights> w;
  w.reserve(patches.size());
  for (const Patch& p : patches) w.push_back(stitch_weights(p));
  return w;
}

}  // namespace

PointCloud stitch_patches(std::span<const Patch> patches, std::span<const PointCloud> denoised,
                          Index original_size) {
  const auto w = all_weights(patches);
  return stitch_patches(patches, denoised, original_size, w);
}

PointCloud stitch_patches(std::span<const Patch> patches, std::span<const PointCloud> denoised,
                          Index original_size, std::span<const StitchWeights> weights) {
  if (denoised.size() != patches.size()) fail(ErrorCode::invalid_input, "stitch_patches: denoised not aligned");
  for (std::size_t p = 0; p < patches.size(); ++p) {
    if (denoised[p].rows() != static_cast<Index>(patches[p].original_indices.size())) {
      fail(ErrorCode::invalid_input, "stitch_patches: denoised patch size mismatch");
    }
  }
  const StitchPlan plan = plan_stitch(patches, original_size, weights);
  return blend(patches, original_size, weights, plan, [&](Index p, Index i) {
    return denoised[static_cast<std::size_t>(p)].row(i);
  });
}

ad::Var stitch_patches(std::span<const Patch> patches, std::span<const ad::Var> denoised, Index original_size,
                       std::span<const StitchWeights> weights) {
  if (denoised.empty() || denoised.size() != patches.size()) {
    fail(ErrorCode::invalid_input, "stitch_patches: denoised not aligned");
  }
  const StitchPlan plan = plan_stitch(patches, original_size, weights);
  PointCloud out = blend(patches, original_size, weights, plan, [&](Index p, Index i) {
    return denoised[static_cast<std::size_t>(p)].value().row(i);
  });
  std::vector<std::vector<Index>> index;
  std::vector<Eigen::VectorXd> coeff;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    index.push_back(patches[p].original_indices);
    Eigen::VectorXd c(weights[p].weights.size());
    for (Index i = 0; i < c.size(); ++i) c(i) = weights[p].weights(i) / plan.total_weight(index.back()[i]);
    coeff.push_back(std::move(c));
  }
  std::vector<ad::Var> parents(denoised.begin(), denoised.end());
  ad::Tape& tape = denoised.front().tape();
  return tape.record(std::move(out), parents,
                     [parents, index = std::move(index), coeff = std::move(coeff)](ad::Tape& t, const ad::Tensor& g) {
                       for (std::size_t p = 0; p < parents.size(); ++p) {
                         if (!t.requires_grad(parents[p])) continue;
                         ad::Tensor gp(static_cast<Index>(index[p].size()), 3);
                         for (std::size_t i = 0; i < index[p].size(); ++i) {
                           gp.row(static_cast<Index>(i)) = coeff[p](static_cast<Index>(i)) * g.row(index[p][i]);
                         }
                         t.accumulate(parents[p], gp);
                       }
                     });
}

}  // namespace mambapf
