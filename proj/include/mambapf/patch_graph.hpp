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

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mambapf/autodiff.hpp"
#include "mambapf/geometry.hpp"

namespace mambapf {

/// A subset of a cloud gathered around a reference (seed) point. Points are
/// stored nearest-first with respect to the reference.
struct Patch {
  PointCloud points;
  Vec3 reference_point = Vec3::Zero();
  double radius = 0.0;
  std::vector<Index> original_indices;

  Index size() const { return points.rows(); }
};

using NeighborTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Directed kNN graph stored as a vertex_count x k neighbour table; row i
/// lists the targets of the edges leaving vertex i.
struct DirectedGraph {
  NeighborTable neighbors;

  Index vertex_count() const { return neighbors.rows(); }
  Index k() const { return neighbors.cols(); }
  std::vector<std::pair<Index, Index>> edges() const;
};

enum class SeedStrategy { farthest_point };

/// Covers the cloud with kNN patches. The first seed is the point nearest the
/// centroid; each further seed is the uncovered point farthest from all
/// seeds chosen so far, until every point belongs to some patch.
std::vector<Patch> extract_patches(const PointCloud& cloud, Index patch_size,
                                   SeedStrategy strategy = SeedStrategy::farthest_point);

/// Euclidean kNN graph over the patch points; ties go to the lower index.
DirectedGraph build_knn_graph(const Patch& patch, Index k);
/// Same, over rows of an arbitrary feature matrix.
DirectedGraph build_knn_graph(const Eigen::MatrixXd& features, Index k);

struct StitchWeights {
  Eigen::VectorXd weights;
  double support_radius = 0.0;
};

/// Gaussian weights around the reference point with support radius r / 3,
/// normalised to sum to one over the patch.
StitchWeights stitch_weights(const Patch& patch);

/// Blends per-patch results back into a cloud of `original_size` points.
/// Every output point is the weight-normalised mean of its copies, computed as
/// first_copy + sum_c w_c (x_c - first_copy) / sum_c w_c so identical copies
/// reproduce the input bit for bit.
PointCloud stitch_patches(std::span<const Patch> patches, std::span<const PointCloud> denoised,
                          Index original_size);
PointCloud stitch_patches(std::span<const Patch> patches, std::span<const PointCloud> denoised,
                          Index original_size, std::span<const StitchWeights> weights);

/// Differentiable stitch for training; gradients reach every copy with
/// coefficient w_c / sum_c w_c.
ad::Var stitch_patches(std::span<const Patch> patches, std::span<const ad::Var> denoised,
                       Index original_size, std::span<const StitchWeights> weights);

}  // namespace mambapf
