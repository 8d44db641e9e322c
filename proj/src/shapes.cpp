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

#include "mambapf/shapes.hpp"

#include <cmath>
#include <numbers>

#include "mambapf/rng.hpp"

namespace mambapf {

namespace {

Vec3 unit_vector(CounterRng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 box_surface_point(const Vec3& c, const Vec3& h, CounterRng& rng) {
  const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};  // face pair normal to x, y, z
  double pick = rng.uniform(0.0, areas[0] + areas[1] + areas[2]);
  int axis = 0;
  while (axis < 2 && pick >= areas[axis]) pick -= areas[axis++];
  Vec3 p;
  for (int a = 0; a < 3; ++a) p(a) = rng.uniform(-h(a), h(a));
  p(axis) = rng.uniform(0.0, 1.0) < 0.5 ? -h(axis) : h(axis);
  return c + p;
}

}  // namespace

PointCloud sample_sphere(Index n, const Vec3& center, double radius, std::uint64_t seed) {
  if (n < 1 || !(radius > 0.0)) fail(ErrorCode::invalid_input, "sample_sphere: need n >= 1 and radius > 0");
  CounterRng rng(seed);
  PointCloud out(n, 3);
  for (Index i = 0; i < n; ++i) out.row(i) = (center + radius * unit_vector(rng)).transpose();
  return out;
}

PointCloud sample_sphere_box_union(Index n, std::uint64_t seed, const SphereBoxUnion& s) {
  if (n < 1) fail(ErrorCode::invalid_input, "sample_sphere_box_union: need n >= 1");
  CounterRng rng(seed);
  const Vec3& h = s.box_half;
  const double sphere_area = 4.0 * std::numbers::pi * s.sphere_radius * s.sphere_radius;
  const double box_area = 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
  auto inside_box = [&](const Vec3& p) { return ((p - s.box_center).cwiseAbs() - h).maxCoeff() < 0.0; };
  auto inside_sphere = [&](const Vec3& p) { return (p - s.sphere_center).norm() < s.sphere_radius; };

  PointCloud out(n, 3);
  Index count = 0;
  while (count < n) {
    const bool on_sphere = rng.uniform(0.0, sphere_area + box_area) < sphere_area;
    const Vec3 p = on_sphere ? Vec3(s.sphere_center + s.sphere_radius * unit_vector(rng))
                             : box_surface_point(s.box_center, h, rng);
    if (on_sphere ? inside_box(p) : inside_sphere(p)) continue;
    out.row(count++) = p.transpose();
  }
  return out;
}

}  // namespace mambapf
