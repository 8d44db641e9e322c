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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mambapf/autodiff.hpp"
#include "mambapf/geometry.hpp"

namespace mambapf {

enum class ProjectionPlane { XY, YZ, XZ };

/// Orthographic camera. A point p maps to q = rotation * p + translation and
/// then to (u, v, depth) = ((q_x + 1) / 2, (q_y + 1) / 2, (q_z + 1) / 2), so
/// the unit ball lands inside [0, 1]^3.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
  ProjectionPlane plane = ProjectionPlane::XY;
  int height = 64;
  int width = 64;

  void validate() const;
};

struct RenderConfig {
  int views = 32;
  int image_size = 64;
  int depth_bins = 32;
  double splat_sigma = 1.0;  // voxels
  double density_scale = 1.0;
  std::vector<ProjectionPlane> planes{ProjectionPlane::XY, ProjectionPlane::YZ, ProjectionPlane::XZ};

  void validate() const;
};

struct RenderedView {
  Eigen::MatrixXd image;  // height x width, row index follows v
  Camera camera;
};

/// Occupancy volume stored depth-fastest: at(r, c, d) = data[(r * width + c) * depth + d].
struct OccupancyGrid {
  int height = 0, width = 0, depth = 0;
  std::vector<double> data;

  OccupancyGrid() = default;
  OccupancyGrid(int h, int w, int d) : height(h), width(w), depth(d), data(std::size_t(h) * w * d, 0.0) {}
  double& at(int r, int c, int d) { return data[(std::size_t(r) * width + c) * depth + d]; }
  double at(int r, int c, int d) const { return data[(std::size_t(r) * width + c) * depth + d]; }
};

/// Rows are (u, v, depth).
PointCloud project_points(const PointCloud& cloud, const Camera& camera);

/// Truncated Gaussian kernel in s = r^2 / (2 sigma^2), cut at 3 sigma. The
/// linear term makes value and slope vanish at the cutoff.
inline constexpr double kSplatCutoff = 4.5;
double splat_kernel(double s);
double splat_kernel_derivative(double s);

/// Summed kernel densities (before the occupancy clamp).
OccupancyGrid splat_density(const PointCloud& projected, int height, int width, const RenderConfig& config);
/// o = 1 - exp(-density_scale * density).
OccupancyGrid splat_occupancy(const PointCloud& projected, int height, int width, const RenderConfig& config);
OccupancyGrid splat_occupancy(const PointCloud& projected, const RenderConfig& config);

/// Per pixel sum over depth of o_d * prod_{d' < d} (1 - o_d').
Eigen::MatrixXd ray_terminate(const OccupancyGrid& occupancy);
/// The individual termination probabilities, same layout as the grid.
OccupancyGrid termination_probabilities(const OccupancyGrid& occupancy);

Eigen::Matrix3d plane_rotation(ProjectionPlane plane);
/// K cameras split over the configured planes: K / P in-plane rotations per
/// plane, evenly spaced, remainder going to the first planes.
std::vector<Camera> make_cameras(const RenderConfig& config);

RenderedView render_view(const PointCloud& cloud, const Camera& camera, const RenderConfig& config);
std::vector<RenderedView> render_views(const PointCloud& cloud, const RenderConfig& config, int threads = 1);

/// Cloud in the normalised frame together with the transform that produced it.
struct NormalizedCloud {
  PointCloud points;
  NormalizeTransform transform;
};

/// (1/K) sum_i mean|V_i(pred) - V_i(target)|.
double render_loss(const PointCloud& pred, const PointCloud& target, const RenderConfig& config, int threads = 1);
double render_loss(const NormalizedCloud& pred, const NormalizedCloud& target, const RenderConfig& config,
                   int threads = 1);
/// Loss against pre-rendered target views; writes d loss / d pred when grad is set.
double render_loss(const PointCloud& pred, std::span<const RenderedView> target, const RenderConfig& config,
                   PointCloud* grad, int threads = 1);
ad::Var render_loss(ad::Var pred, std::span<const RenderedView> target, const RenderConfig& config, int threads = 1);
ad::Var render_loss(ad::Var pred, const PointCloud& target, const RenderConfig& config, int threads = 1);

}  // namespace mambapf
