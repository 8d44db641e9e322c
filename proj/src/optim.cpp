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

#include "mambapf/optim.hpp"

#include <cmath>
#include <string>

#include "mambapf/error.hpp"

namespace mambapf {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) fail(ErrorCode::invalid_input, "adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::invalid_input, "adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) fail(ErrorCode::invalid_input, "adam: eps must be positive");
}

Adam::Adam(AdamConfig config) : config_(config) { config_.validate(); }

void Adam::step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd> grads) {
  if (params.size() != grads.size()) fail(ErrorCode::invalid_input, "adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) fail(ErrorCode::invalid_input, "adam: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        m_[i].rows() != grads[i].rows() || m_[i].cols() != grads[i].cols()) {
      fail(ErrorCode::invalid_input, "adam: shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(step_count_));
  const double c2 = 1.0 - std::pow(b2, double(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseAbs2();
    params[i]->array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

double clip_grad_norm(std::span<Eigen::MatrixXd> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

}  // namespace mambapf
