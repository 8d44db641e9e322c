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

#include "mambapf/geometry.hpp"

#include <string>

#include "mambapf/rng.hpp"

namespace mambapf {

void TriangleMesh::validate() const {
  const Index n = vertices.rows();
  for (Index f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces(f, c) < 0 || faces(f, c) >= n) {
        fail(ErrorCode::invalid_input,
             "face " + std::to_string(f) + " references vertex " + std::to_string(faces(f, c)) +
                 " but mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (faces(f, 0) == faces(f, 1) || faces(f, 1) == faces(f, 2) || faces(f, 0) == faces(f, 2)) {
      fail(ErrorCode::invalid_input, "face " + std::to_string(f) + " is degenerate");
    }
  }
}

PointCloud NormalizeTransform::apply(const PointCloud& cloud) const {
  return (cloud.rowwise() - center.transpose()) / scale;
}

PointCloud NormalizeTransform::invert(const PointCloud& cloud) const {
  return (cloud * scale).rowwise() + center.transpose();
}

void require_nonempty(Index rows, const char* what) {
  if (rows < 1) fail(ErrorCode::invalid_input, std::string(what) + ": empty point cloud");
}

void require_finite(const PointCloud& cloud, const char* what) {
  if (!cloud.allFinite()) fail(ErrorCode::invalid_input, std::string(what) + ": non-finite coordinate");
}

PointCloud add_gaussian_noise(const PointCloud& cloud, const NoiseSpec& spec) {
  require_nonempty(cloud.rows(), "add_gaussian_noise");
  if (!(spec.sigma_fraction >= 0.0)) fail(ErrorCode::invalid_input, "add_gaussian_noise: negative sigma");
  if (spec.sigma_fraction == 0.0) return cloud;

  const double reference = spec.reference == NoiseReference::bbox_diagonal
                               ? bbox_diagonal(cloud)
                               : bounding_sphere_radius(cloud);
  const double sigma = spec.sigma_fraction * reference;
  CounterRng rng(spec.seed);
  PointCloud out = cloud;
  // Row-major draw order so the stream does not depend on storage order.
  for (Index i = 0; i < out.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out(i, c) += sigma * rng.gaussian();
  }
  return out;
}

std::pair<PointCloud, NormalizeTransform> normalize_to_unit(const PointCloud& cloud) {
  require_nonempty(cloud.rows(), "normalize_to_unit");
  NormalizeTransform t;
  t.center = centroid(cloud).transpose();
  t.scale = bounding_sphere_radius(cloud);
  if (!(t.scale > 0.0)) fail(ErrorCode::degenerate_geometry, "normalize_to_unit: all points coincide");
  return {t.apply(cloud), t};
}

}  // namespace mambapf
