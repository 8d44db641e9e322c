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

#include "mambapf/geometry.hpp"

namespace mambapf {

/// Mean nearest-neighbour L2 distance from P to Q plus from Q to P.
double chamfer_distance(const PointCloud& P, const PointCloud& Q);

/// Squared distance from p to the closest point of triangle (a, b, c).
double point_triangle_distance_squared(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct PointToMesh {
  double p2f = 0.0;  // mean over points of the squared distance to the nearest face
  double f2p = 0.0;  // mean over faces of the squared distance to the nearest point
  double total() const { return p2f + f2p; }
};

PointToMesh point_to_mesh(const PointCloud& P, const TriangleMesh& mesh);

/// Metrics are reported scaled by 1e5.
inline constexpr double kMetricReportScale = 1e5;

}  // namespace mambapf
