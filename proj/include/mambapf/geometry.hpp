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

#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "mambapf/error.hpp"

namespace mambapf {

using Index = Eigen::Index;

/// N x 3 point matrix, one point per row.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
using PointCloud = PointsT<double>;
using Vec3 = Eigen::Vector3d;

struct TriangleMesh {
  PointCloud vertices;
  Eigen::Matrix<Index, Eigen::Dynamic, 3> faces;

  Index face_count() const { return faces.rows(); }
  /// Throws invalid_input on out-of-range or degenerate (repeated-vertex) faces.
  void validate() const;
};

enum class NoiseReference { bbox_diagonal, bounding_sphere_radius };

struct NoiseSpec {
  double sigma_fraction = 0.0;
  NoiseReference reference = NoiseReference::bbox_diagonal;
  std::uint64_t seed = 0;
};

/// Maps a cloud into the unit ball: normalized = (p - center) / scale.
struct NormalizeTransform {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  PointCloud apply(const PointCloud& cloud) const;
  PointCloud invert(const PointCloud& cloud) const;
  bool operator==(const NormalizeTransform&) const = default;
};

void require_nonempty(Index rows, const char* what);
void require_finite(const PointCloud& cloud, const char* what);

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, 3> centroid(const Eigen::MatrixBase<Derived>& points) {
  require_nonempty(points.rows(), "centroid");
  return points.colwise().mean();
}

template <typename Derived>
typename Derived::Scalar bbox_diagonal(const Eigen::MatrixBase<Derived>& points) {
  require_nonempty(points.rows(), "bbox_diagonal");
  return (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
}

/// Radius of the centroid-centred sphere that contains every point.
template <typename Derived>
typename Derived::Scalar bounding_sphere_radius(const Eigen::MatrixBase<Derived>& points) {
  require_nonempty(points.rows(), "bounding_sphere_radius");
  const auto c = centroid(points);
  return (points.rowwise() - c).rowwise().norm().maxCoeff();
}

PointCloud add_gaussian_noise(const PointCloud& cloud, const NoiseSpec& spec);

std::pair<PointCloud, NormalizeTransform> normalize_to_unit(const PointCloud& cloud);

}  // namespace mambapf
