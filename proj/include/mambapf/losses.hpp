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

#include <vector>

#include <Eigen/Core>

#include "mambapf/autodiff.hpp"
#include "mambapf/geometry.hpp"
#include "mambapf/kdtree.hpp"
#include "mambapf/patch_graph.hpp"

namespace mambapf {

/// sum_i w_i * min_{p in gt} |p - pred_i|^2.
double recon_loss(const PointCloud& pred, const PointCloud& gt, const Eigen::VectorXd& weights);
double recon_loss(const PointCloud& pred, const PointCloud& gt, const StitchWeights& weights);
/// Nearest neighbours are fixed at the forward pass, so the gradient is
/// 2 w_i (pred_i - nn_i).
ad::Var recon_loss(ad::Var pred, const PointCloud& gt, const Eigen::VectorXd& weights);
ad::Var recon_loss(ad::Var pred, const KdTree& gt, const Eigen::VectorXd& weights);

struct LossBreakdown {
  std::vector<double> recon;   // per iteration t
  std::vector<double> render;  // per iteration t
  double alpha = 0.01;
  double total = 0.0;

  /// Recomputes total from the per-iteration terms.
  void finalize();
};

/// sum_{t=1..T} (recon_t + alpha * render_t).
double total_loss(const std::vector<double>& recon, const std::vector<double>& render, double alpha, int T);
ad::Var total_loss(std::span<const ad::Var> recon, std::span<const ad::Var> render, double alpha);

}  // namespace mambapf
