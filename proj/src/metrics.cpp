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

#include "mambapf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mambapf/kdtree.hpp"

namespace mambapf {

namespace {

double directed_mean(const PointCloud& from, const KdTree& to) {
  double sum = 0.0;
  for (Index i = 0; i < from.rows(); ++i) sum += std::sqrt(to.nearest(from.row(i).transpose()).distance2);
  return sum / double(from.rows());
}

}  // namespace

double chamfer_distance(const PointCloud& P, const PointCloud& Q) {
  require_nonempty(P.rows(), "chamfer_distance");
  require_nonempty(Q.rows(), "chamfer_distance");
  return directed_mean(P, KdTree(Q)) + directed_mean(Q, KdTree(P));
}

// Closest point by Voronoi region of the triangle (vertex, edge, or face).
double point_triangle_distance_squared(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.squaredNorm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.squaredNorm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).squaredNorm();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.squaredNorm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).squaredNorm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).squaredNorm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).squaredNorm();
}

PointToMesh point_to_mesh(const PointCloud& P, const TriangleMesh& mesh) {
  require_nonempty(P.rows(), "point_to_mesh");
  if (mesh.face_count() == 0) fail(ErrorCode::invalid_input, "point_to_mesh: mesh has no faces");
  mesh.validate();
  const Index F = mesh.face_count();

  // Face bounding spheres for pruning.
  std::vector<Vec3> center(static_cast<std::size_t>(F));
  std::vector<double> radius(static_cast<std::size_t>(F));
  std::vector<std::array<Vec3, 3>> tri(static_cast<std::size_t>(F));
  for (Index f = 0; f < F; ++f) {
    auto& t = tri[static_cast<std::size_t>(f)];
    for (int k = 0; k < 3; ++k) t[k] = mesh.vertices.row(mesh.faces(f, k)).transpose();
    const Vec3 c = (t[0] + t[1] + t[2]) / 3.0;
    center[static_cast<std::size_t>(f)] = c;
    radius[static_cast<std::size_t>(f)] =
        std::max({(t[0] - c).norm(), (t[1] - c).norm(), (t[2] - c).norm()});
  }
  PointCloud centers(F, 3);
  for (Index f = 0; f < F; ++f) centers.row(f) = center[static_cast<std::size_t>(f)].transpose();
  const double max_radius = *std::max_element(radius.begin(), radius.end());

  // Any point within distance D of a face is within D + radius of its centre.
  auto face_dist = [&](const Vec3& p, Index f) {
    const auto& t = tri[static_cast<std::size_t>(f)];
    return point_triangle_distance_squared(p, t[0], t[1], t[2]);
  };

  PointToMesh out;
  const KdTree face_tree(centers);
  double p2f = 0.0;
  for (Index i = 0; i < P.rows(); ++i) {
    const Vec3 p = P.row(i).transpose();
    const Neighbor seed = face_tree.nearest(p);
    double best = face_dist(p, seed.index);
    const double reach = std::sqrt(best) + max_radius;
    for (const Neighbor& n : face_tree.within(p, reach * reach)) {
      const double lower = std::sqrt(n.distance2) - radius[static_cast<std::size_t>(n.index)];
      if (lower > 0.0 && lower * lower > best) continue;
      best = std::min(best, face_dist(p, n.index));
    }
    p2f += best;
  }
  out.p2f = p2f / double(P.rows());

  const KdTree point_tree(P);
  double f2p = 0.0;
  for (Index f = 0; f < F; ++f) {
    const Vec3& c = center[static_cast<std::size_t>(f)];
    const double r = radius[static_cast<std::size_t>(f)];
    double best = face_dist(point_tree.points().row(point_tree.nearest(c).index).transpose(), f);
    const double reach = std::sqrt(best) + r;
    for (const Neighbor& n : point_tree.within(c, reach * reach)) {
      best = std::min(best, face_dist(P.row(n.index).transpose(), f));
    }
    f2p += best;
  }
  out.f2p = f2p / double(F);
  return out;
}

}  // namespace mambapf
