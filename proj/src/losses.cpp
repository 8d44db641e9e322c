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

#include "mambapf/losses.hpp"

#include <string>

#include "mambapf/ops.hpp"

namespace mambapf {

namespace {

void check_recon_inputs(const PointCloud& pred, const PointCloud& gt, const Eigen::VectorXd& weights) {
  if (gt.rows() == 0) fail(ErrorCode::invalid_input, "recon_loss: empty ground truth");
  if (weights.size() != pred.rows()) {
    fail(ErrorCode::invalid_input, "recon_loss: " + std::to_string(weights.size()) + " weights for " +
                                       std::to_string(pred.rows()) + " points");
  }
}

}  // namespace

double recon_loss(const PointCloud& pred, const PointCloud& gt, const Eigen::VectorXd& weights) {
  check_recon_inputs(pred, gt, weights);
  const KdTree tree(gt);
  double loss = 0.0;
  for (Index i = 0; i < pred.rows(); ++i) loss += weights(i) * tree.nearest(pred.row(i).transpose()).distance2;
  return loss;
}

double recon_loss(const PointCloud& pred, const PointCloud& gt, const StitchWeights& weights) {
  return recon_loss(pred, gt, weights.weights);
}

ad::Var recon_loss(ad::Var pred, const PointCloud& gt, const Eigen::VectorXd& weights) {
  check_recon_inputs(pred.value(), gt, weights);
  return recon_loss(pred, KdTree(gt), weights);
}

ad::Var recon_loss(ad::Var pred, const KdTree& tree, const Eigen::VectorXd& weights) {
  if (pred.cols() != 3) fail(ErrorCode::invalid_input, "recon_loss: points must be N x 3");
  const PointCloud& p = pred.value();
  const PointCloud& gt = tree.points();
  check_recon_inputs(p, gt, weights);
  PointCloud g(p.rows(), 3);
  double loss = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    const Neighbor nn = tree.nearest(p.row(i).transpose());
    loss += weights(i) * nn.distance2;
    g.row(i) = 2.0 * weights(i) * (p.row(i) - gt.row(nn.index));
  }
  ad::Tensor value(1, 1);
  value(0, 0) = loss;
  return pred.tape().record(std::move(value), {pred}, [pred, g](ad::Tape& t, const ad::Tensor& grad_out) {
    t.accumulate(pred, g * grad_out(0, 0));
  });
}

void LossBreakdown::finalize() { total = total_loss(recon, render, alpha, static_cast<int>(recon.size())); }

double total_loss(const std::vector<double>& recon, const std::vector<double>& render, double alpha, int T) {
  if (T < 1 || recon.size() != static_cast<std::size_t>(T) || render.size() != static_cast<std::size_t>(T)) {
    fail(ErrorCode::invalid_input, "total_loss: expected " + std::to_string(T) + " recon and render terms");
  }
  if (!(alpha >= 0.0)) fail(ErrorCode::invalid_input, "total_loss: alpha must be >= 0");
  double total = 0.0;
  for (int t = 0; t < T; ++t) total += recon[static_cast<std::size_t>(t)] + alpha * render[static_cast<std::size_t>(t)];
  return total;
}

ad::Var total_loss(std::span<const ad::Var> recon, std::span<const ad::Var> render, double alpha) {
  if (recon.empty() || recon.size() != render.size()) {
    fail(ErrorCode::invalid_input, "total_loss: recon and render term counts differ");
  }
  std::vector<ad::Var> terms;
  terms.reserve(recon.size());
  for (std::size_t t = 0; t < recon.size(); ++t) {
    terms.push_back(alpha == 0.0 ? recon[t] : ad::add(recon[t], ad::scale(render[t], alpha)));
  }
  return ad::sum_scalars(terms);
}

}  // namespace mambapf
