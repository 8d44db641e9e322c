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

#include "mambapf/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mambapf/parallel.hpp"

namespace mambapf {

namespace {

const double kCutoffExp = std::exp(-kSplatCutoff);

struct Footprint {
  int lo[3];
  int hi[3];
};

// Voxel-space centre: pixel and bin centres sit at integer coordinates.
Vec3 voxel_coords(const Eigen::Ref<const Eigen::RowVector3d>& uvd, int height, int width, int depth) {
  return {uvd(0) * width - 0.5, uvd(1) * height - 0.5, uvd(2) * depth - 0.5};
}

bool footprint(const Vec3& c, double reach, const int extent[3], Footprint& f) {
  for (int a = 0; a < 3; ++a) {
    f.lo[a] = std::max(0, static_cast<int>(std::ceil(c(a) - reach)));
    f.hi[a] = std::min(extent[a] - 1, static_cast<int>(std::floor(c(a) + reach)));
    if (f.lo[a] > f.hi[a]) return false;
  }
  return true;
}

// Splats the projected points and returns the occupancy.
OccupancyGrid occupancy_of(const PointCloud& projected, int height, int width, const RenderConfig& config) {
  OccupancyGrid grid = splat_density(projected, height, width, config);
  for (double& v : grid.data) v = -std::expm1(-config.density_scale * v);
  return grid;
}

double view_loss_and_grad(const PointCloud& pred, const RenderedView& target, const RenderConfig& config,
                          PointCloud* grad) {
  const Camera& cam = target.camera;
  const int H = cam.height, W = cam.width, D = config.depth_bins;
  const PointCloud projected = project_points(pred, cam);
  const OccupancyGrid occ = occupancy_of(projected, H, W, config);
  const Eigen::MatrixXd image = ray_terminate(occ);
  const double npix = double(H) * W;
  const Eigen::MatrixXd diff = image - target.image;
  const double loss = diff.cwiseAbs().sum() / npix;
  if (grad == nullptr) return loss;

  // d loss / d density, per voxel.
  OccupancyGrid g_density(H, W, D);
  std::vector<double> prefix(static_cast<std::size_t>(D) + 1), suffix(static_cast<std::size_t>(D) + 1);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double d = diff(r, c);
      const double g_img = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / npix;
      if (g_img == 0.0) continue;
      prefix[0] = 1.0;
      for (int k = 0; k < D; ++k) prefix[k + 1] = prefix[k] * (1.0 - occ.at(r, c, k));
      suffix[D] = 1.0;
      for (int k = D - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * (1.0 - occ.at(r, c, k));
      for (int k = 0; k < D; ++k) {
        const double keep = 1.0 - occ.at(r, c, k);
        // d image / d o_k = prod_{j != k} (1 - o_j); d o_k / d density_k = scale * (1 - o_k).
        g_density.at(r, c, k) = g_img * prefix[k] * suffix[k + 1] * config.density_scale * keep;
      }
    }
  }

  const double sigma = config.splat_sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double reach = 3.0 * sigma;
  const int extent[3] = {W, H, D};
  const double to_uvd[3] = {double(W), double(H), double(D)};
  grad->setZero(pred.rows(), 3);
  for (Index i = 0; i < projected.rows(); ++i) {
    const Vec3 v = voxel_coords(projected.row(i), H, W, D);
    Footprint f;
    if (!footprint(v, reach, extent, f)) continue;
    Vec3 g_vox = Vec3::Zero();
    for (int r = f.lo[1]; r <= f.hi[1]; ++r) {
      const double dr = v(1) - r;
      for (int c = f.lo[0]; c <= f.hi[0]; ++c) {
        const double dc = v(0) - c;
        for (int k = f.lo[2]; k <= f.hi[2]; ++k) {
          const double dk = v(2) - k;
          const double s = (dc * dc + dr * dr + dk * dk) * inv2s2;
          if (s >= kSplatCutoff) continue;
          const double coeff = g_density.at(r, c, k) * splat_kernel_derivative(s) * 2.0 * inv2s2;
          g_vox += coeff * Vec3(dc, dr, dk);
        }
      }
    }
    Vec3 g_q;
    for (int a = 0; a < 3; ++a) g_q(a) = g_vox(a) * to_uvd[a] * 0.5;
    grad->row(i) = (cam.rotation.transpose() * g_q).transpose();
  }
  return loss;
}

}  // namespace

void Camera::validate() const {
  if (height < 4 || width < 4) fail(ErrorCode::invalid_input, "camera: image must be at least 4x4");
  const double err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-9)) fail(ErrorCode::invalid_input, "camera: rotation is not orthonormal");
}

void RenderConfig::validate() const {
  if (views < 1) fail(ErrorCode::invalid_input, "render: need at least one view");
  if (image_size < 4) fail(ErrorCode::invalid_input, "render: image_size must be >= 4");
  if (depth_bins < 2) fail(ErrorCode::invalid_input, "render: depth_bins must be >= 2");
  if (!(splat_sigma > 0.0)) fail(ErrorCode::invalid_input, "render: splat_sigma must be positive");
  if (!(density_scale > 0.0)) fail(ErrorCode::invalid_input, "render: density_scale must be positive");
  if (planes.empty()) fail(ErrorCode::invalid_input, "render: no projection planes");
}

PointCloud project_points(const PointCloud& cloud, const Camera& camera) {
  PointCloud q = (cloud * camera.rotation.transpose()).rowwise() + camera.translation.transpose();
  return (q.array() + 1.0) * 0.5;
}

double splat_kernel(double s) { return s < kSplatCutoff ? std::exp(-s) - kCutoffExp * (1.0 + kSplatCutoff - s) : 0.0; }

double splat_kernel_derivative(double s) { return s < kSplatCutoff ? kCutoffExp - std::exp(-s) : 0.0; }

OccupancyGrid splat_density(const PointCloud& projected, int height, int width, const RenderConfig& config) {
  const int D = config.depth_bins;
  OccupancyGrid grid(height, width, D);
  const double inv2s2 = 1.0 / (2.0 * config.splat_sigma * config.splat_sigma);
  const double reach = 3.0 * config.splat_sigma;
  const int extent[3] = {width, height, D};
  for (Index i = 0; i < projected.rows(); ++i) {
    const Vec3 v = voxel_coords(projected.row(i), height, width, D);
    Footprint f;
    if (!v.allFinite() || !footprint(v, reach, extent, f)) continue;
    for (int r = f.lo[1]; r <= f.hi[1]; ++r) {
      const double dr = v(1) - r;
      for (int c = f.lo[0]; c <= f.hi[0]; ++c) {
        const double dc = v(0) - c;
        for (int k = f.lo[2]; k <= f.hi[2]; ++k) {
          const double dk = v(2) - k;
          grid.at(r, c, k) += splat_kernel((dc * dc + dr * dr + dk * dk) * inv2s2);
        }
      }
    }
  }
  return grid;
}

OccupancyGrid splat_occupancy(const PointCloud& projected, int height, int width, const RenderConfig& config) {
  config.validate();
  return occupancy_of(projected, height, width, config);
}

OccupancyGrid splat_occupancy(const PointCloud& projected, const RenderConfig& config) {
  return splat_occupancy(projected, config.image_size, config.image_size, config);
}

OccupancyGrid termination_probabilities(const OccupancyGrid& occ) {
  OccupancyGrid out(occ.height, occ.width, occ.depth);
  for (int r = 0; r < occ.height; ++r) {
    for (int c = 0; c < occ.width; ++c) {
      double transmit = 1.0;
      for (int k = 0; k < occ.depth; ++k) {
        out.at(r, c, k) = occ.at(r, c, k) * transmit;
        transmit *= 1.0 - occ.at(r, c, k);
      }
    }
  }
  return out;
}

Eigen::MatrixXd ray_terminate(const OccupancyGrid& occ) {
  Eigen::MatrixXd image = Eigen::MatrixXd::Zero(occ.height, occ.width);
  for (int r = 0; r < occ.height; ++r) {
    for (int c = 0; c < occ.width; ++c) {
      double transmit = 1.0, sum = 0.0;
      for (int k = 0; k < occ.depth; ++k) {
        sum += occ.at(r, c, k) * transmit;
        transmit *= 1.0 - occ.at(r, c, k);
      }
      image(r, c) = sum;
    }
  }
  return image;
}

Eigen::Matrix3d plane_rotation(ProjectionPlane plane) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  switch (plane) {
    case ProjectionPlane::XY:  // (x, y, z)
      R.setIdentity();
      break;
    case ProjectionPlane::YZ:  // (y, z, x)
      R(0, 1) = R(1, 2) = R(2, 0) = 1.0;
      break;
    case ProjectionPlane::XZ:  // (z, x, y)
      R(0, 2) = R(1, 0) = R(2, 1) = 1.0;
      break;
  }
  return R;
}

std::vector<Camera> make_cameras(const RenderConfig& config) {
  config.validate();
  const int P = static_cast<int>(config.planes.size());
  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(config.views));
  for (int p = 0; p < P; ++p) {
    const int count = config.views / P + (p < config.views % P ? 1 : 0);
    const Eigen::Matrix3d base = plane_rotation(config.planes[static_cast<std::size_t>(p)]);
    for (int j = 0; j < count; ++j) {
      const double theta = 2.0 * std::numbers::pi * j / count;
      Eigen::Matrix3d Rz = Eigen::Matrix3d::Identity();
      if (j != 0) {
        Rz(0, 0) = std::cos(theta);
        Rz(0, 1) = -std::sin(theta);
        Rz(1, 0) = std::sin(theta);
        Rz(1, 1) = std::cos(theta);
      }
      Camera cam;
      cam.rotation = Rz * base;
      cam.plane = config.planes[static_cast<std::size_t>(p)];
      cam.height = cam.width = config.image_size;
      cams.push_back(cam);
    }
  }
  return cams;
}

RenderedView render_view(const PointCloud& cloud, const Camera& camera, const RenderConfig& config) {
  camera.validate();
  config.validate();
  const OccupancyGrid occ = occupancy_of(project_points(cloud, camera), camera.height, camera.width, config);
  return {ray_terminate(occ), camera};
}

std::vector<RenderedView> render_views(const PointCloud& cloud, const RenderConfig& config, int threads) {
  const std::vector<Camera> cams = make_cameras(config);
  std::vector<RenderedView> views(cams.size());
  parallel_for(cams.size(), threads, [&](std::size_t i) { views[i] = render_view(cloud, cams[i], config); });
  return views;
}

double render_loss(const PointCloud& pred, const PointCloud& target, const RenderConfig& config, int threads) {
  const std::vector<RenderedView> views = render_views(target, config, threads);
  return render_loss(pred, views, config, nullptr, threads);
}

double render_loss(const NormalizedCloud& pred, const NormalizedCloud& target, const RenderConfig& config,
                   int threads) {
  if (!(pred.transform == target.transform)) {
    fail(ErrorCode::invalid_input, "render_loss: prediction and target use different normalisation transforms");
  }
  return render_loss(pred.points, target.points, config, threads);
}

double render_loss(const PointCloud& pred, std::span<const RenderedView> target, const RenderConfig& config,
                   PointCloud* grad, int threads) {
  config.validate();
  if (target.empty()) fail(ErrorCode::invalid_input, "render_loss: no target views");
  const std::size_t K = target.size();
  std::vector<double> losses(K);
  std::vector<PointCloud> grads(grad ? K : 0);
  parallel_for(K, threads, [&](std::size_t i) {
    losses[i] = view_loss_and_grad(pred, target[i], config, grad ? &grads[i] : nullptr);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  if (grad) {
    grad->setZero(pred.rows(), 3);
    for (const auto& g : grads) *grad += g;
    *grad /= double(K);
  }
  return total / double(K);
}

ad::Var render_loss(ad::Var pred, std::span<const RenderedView> target, const RenderConfig& config, int threads) {
  if (pred.cols() != 3) fail(ErrorCode::invalid_input, "render_loss: points must be N x 3");
  const bool need_grad = pred.tape().requires_grad(pred);
  PointCloud g;
  const double loss = render_loss(pred.value(), target, config, need_grad ? &g : nullptr, threads);
  ad::Tensor value(1, 1);
  value(0, 0) = loss;
  return pred.tape().record(std::move(value), {pred}, [pred, g](ad::Tape& t, const ad::Tensor& grad_out) {
    t.accumulate(pred, g * grad_out(0, 0));
  });
}

ad::Var render_loss(ad::Var pred, const PointCloud& target, const RenderConfig& config, int threads) {
  const std::vector<RenderedView> views = render_views(target, config, threads);
  return render_loss(pred, views, config, threads);
}

}  // namespace mambapf
