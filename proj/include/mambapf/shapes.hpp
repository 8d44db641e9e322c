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

#include "mambapf/geometry.hpp"

namespace mambapf {

/// Uniform samples on a sphere surface.
PointCloud sample_sphere(Index n, const Vec3& center, double radius, std::uint64_t seed);

/// Uniform samples on the boundary of the union of a sphere and an
/// axis-aligned box (rejection against the other solid's interior).
struct SphereBoxUnion {
  Vec3 sphere_center{-0.35, 0.0, 0.0};
  double sphere_radius = 0.6;
  Vec3 box_center{0.4, 0.0, 0.0};
  Vec3 box_half{0.45, 0.3, 0.35};
};

PointCloud sample_sphere_box_union(Index n, std::uint64_t seed, const SphereBoxUnion& shape = {});

}  // namespace mambapf
