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

#include <string>

#include "mambapf/autodiff.hpp"
#include "mambapf/rng.hpp"
#include "mambapf/ssm.hpp"

namespace mambapf {

struct MambaConfig {
  Eigen::Index model_dim = 32;
  Eigen::Index state_dim = 16;
  Eigen::Index expand = 2;
  Eigen::Index conv_width = 4;
  ssm::ScanAlgorithm scan = ssm::ScanAlgorithm::associative;

  Eigen::Index inner_dim() const { return expand * model_dim; }
};

/// Weights of one residual Mamba block:
///   x' = DWConv(MLP_in(LN_in(x)))
///   s  = MLP_out(LN_ssm(SSM(silu(x'))) * silu(gate(LN_in(x))))
///   y  = x + s
/// Both MLPs are single affine layers; the gate projection has no bias so a
/// zero normalised input closes the gate.
struct MambaBlockParams {
  ad::Tensor norm_in_gamma, norm_in_beta;  // 1 x D
  ad::Tensor in_weight, in_bias;           // D x E, 1 x E
  ad::Tensor conv_weight, conv_bias;       // E x W, 1 x E
  ssm::SelectiveSsm<double> ssm;           // dt E x E (+ bias), B/C/a_log E x N
  ad::Tensor norm_ssm_gamma, norm_ssm_beta;  // 1 x E
  ad::Tensor gate_weight;                    // D x E
  ad::Tensor out_weight, out_bias;           // E x D, 1 x D

  Eigen::Index model_dim() const { return in_weight.rows(); }
  Eigen::Index inner_dim() const { return in_weight.cols(); }
  Eigen::Index state_dim() const { return ssm.a_log.cols(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    visit_fields(*this, prefix, f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    visit_fields(*this, prefix, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_fields(Self& s, const std::string& p, F& f) {
    f(p + "norm_in.gamma", s.norm_in_gamma);
    f(p + "norm_in.beta", s.norm_in_beta);
    f(p + "in_proj.weight", s.in_weight);
    f(p + "in_proj.bias", s.in_bias);
    f(p + "conv.weight", s.conv_weight);
    f(p + "conv.bias", s.conv_bias);
    f(p + "ssm.dt_weight", s.ssm.dt_weight);
    f(p + "ssm.dt_bias", s.ssm.dt_bias);
    f(p + "ssm.b_weight", s.ssm.b_weight);
    f(p + "ssm.c_weight", s.ssm.c_weight);
    f(p + "ssm.a_log", s.ssm.a_log);
    f(p + "norm_ssm.gamma", s.norm_ssm_gamma);
    f(p + "norm_ssm.beta", s.norm_ssm_beta);
    f(p + "gate.weight", s.gate_weight);
    f(p + "out_proj.weight", s.out_weight);
    f(p + "out_proj.bias", s.out_bias);
  }
};

MambaBlockParams init_mamba_block(const MambaConfig& config, CounterRng& rng);

/// Selective scan as a tape op. Inputs: u, delta (L x E), a_log (E x N),
/// B, C (L x N). The backward rule replays the forward states and runs the
/// adjoint recurrence in reverse time.
ad::Var selective_scan(ad::Var u, ad::Var delta, ad::Var a_log, ad::Var B, ad::Var C,
                       ssm::ScanAlgorithm algorithm = ssm::ScanAlgorithm::associative);

ad::Var mamba_block(ad::Var x, const MambaBlockParams& params,
                    ssm::ScanAlgorithm algorithm = ssm::ScanAlgorithm::associative);

/// Gradient-free evaluation.
Eigen::MatrixXd mamba_block(const Eigen::MatrixXd& x, const MambaBlockParams& params,
                            ssm::ScanAlgorithm algorithm = ssm::ScanAlgorithm::associative);

}  // namespace mambapf
