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
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mambapf {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and matched to parameters by position.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  void step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd> grads);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  const std::vector<Eigen::MatrixXd>& first_moments() const { return m_; }
  const std::vector<Eigen::MatrixXd>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::int64_t step_count_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

/// Scales all gradients by min(1, max_norm / global_norm); returns the norm
/// before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(std::span<Eigen::MatrixXd> grads, double max_norm);

}  // namespace mambapf
