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

#include "mambapf/mamba_block.hpp"

#include <cmath>
#include <vector>

#include "mambapf/ops.hpp"

namespace mambapf {

using ad::Tensor;
using ad::Var;

namespace {

Tensor uniform(Eigen::Index rows, Eigen::Index cols, double bound, CounterRng& rng) {
  Tensor m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

MambaBlockParams init_mamba_block(const MambaConfig& config, CounterRng& rng) {
  const Eigen::Index d = config.model_dim, e = config.inner_dim(), n = config.state_dim, w = config.conv_width;
  if (d < 1 || e < d || n < 1 || w < 1) fail(ErrorCode::invalid_input, "init_mamba_block: bad dimensions");
  MambaBlockParams p;
  p.norm_in_gamma = Tensor::Ones(1, d);
  p.norm_in_beta = Tensor::Zero(1, d);
  p.in_weight = uniform(d, e, 1.0 / std::sqrt(double(d)), rng);
  p.in_bias = Tensor::Zero(1, e);
  p.conv_weight = uniform(e, w, 1.0 / std::sqrt(double(w)), rng);
  p.conv_bias = Tensor::Zero(1, e);
  p.ssm.dt_weight = uniform(e, e, 0.1 / std::sqrt(double(e)), rng);
  p.ssm.dt_bias.resize(1, e);
  for (Eigen::Index c = 0; c < e; ++c) {
    // step sizes log-uniform in [1e-3, 1e-1], stored through inverse softplus
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    p.ssm.dt_bias(0, c) = dt + std::log(-std::expm1(-dt));
  }
  p.ssm.b_weight = uniform(e, n, 1.0 / std::sqrt(double(e)), rng);
  p.ssm.c_weight = uniform(e, n, 1.0 / std::sqrt(double(e)), rng);
  p.ssm.a_log.resize(e, n);
  for (Eigen::Index c = 0; c < e; ++c)
    for (Eigen::Index s = 0; s < n; ++s) p.ssm.a_log(c, s) = std::log(double(s + 1));
  p.norm_ssm_gamma = Tensor::Ones(1, e);
  p.norm_ssm_beta = Tensor::Zero(1, e);
  p.gate_weight = uniform(d, e, 1.0 / std::sqrt(double(d)), rng);
  p.out_weight = uniform(e, d, 1.0 / std::sqrt(double(e)), rng);
  p.out_bias = Tensor::Zero(1, d);
  return p;
}

Var selective_scan(Var u, Var delta, Var a_log, Var B, Var C, ssm::ScanAlgorithm algorithm) {
  const Tensor A = -a_log.value().array().exp().matrix();
  Tensor y = algorithm == ssm::ScanAlgorithm::sequential
                 ? ssm::selective_scan_sequential<double>(u.value(), delta.value(), A, B.value(), C.value())
                 : ssm::selective_scan_associative<double>(u.value(), delta.value(), A, B.value(), C.value());
  return u.tape().record(std::move(y), {u, delta, a_log, B, C}, [u, delta, a_log, B, C](ad::Tape& t, const Tensor& gy) {
    const Tensor& uv = u.value();
    const Tensor& dv = delta.value();
    const Tensor& bv = B.value();
    const Tensor& cv = C.value();
    const Tensor A = -a_log.value().array().exp().matrix();
    const Eigen::Index len = uv.rows(), ch = uv.cols(), n = A.cols();

    // Replay: states[t] and decays[t] are E x N blocks stored contiguously.
    const std::size_t block = static_cast<std::size_t>(ch * n);
    std::vector<double> states(block * static_cast<std::size_t>(len));
    std::vector<double> decays(block * static_cast<std::size_t>(len));
    for (Eigen::Index tt = 0; tt < len; ++tt) {
      double* h = states.data() + block * tt;
      double* a = decays.data() + block * tt;
      const double* hp = tt > 0 ? states.data() + block * (tt - 1) : nullptr;
      // a is the row-major E x N block exp(delta_t[c] * A(c, s)).
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> am(a, ch, n);
      am = (A.array().colwise() * dv.row(tt).transpose().array()).exp().matrix();
      for (Eigen::Index c = 0; c < ch; ++c) {
        const double du = dv(tt, c) * uv(tt, c);
        for (Eigen::Index s = 0; s < n; ++s) {
          const std::size_t k = static_cast<std::size_t>(c * n + s);
          h[k] = (hp ? a[k] * hp[k] : 0.0) + du * bv(tt, s);
        }
      }
    }

    Tensor gu = Tensor::Zero(len, ch), gd = Tensor::Zero(len, ch), gA = Tensor::Zero(ch, n);
    Tensor gB = Tensor::Zero(len, n), gC = Tensor::Zero(len, n);
    std::vector<double> gh(block, 0.0);
    for (Eigen::Index tt = len; tt-- > 0;) {
      const double* h = states.data() + block * tt;
      const double* a = decays.data() + block * tt;
      const double* hp = tt > 0 ? states.data() + block * (tt - 1) : nullptr;
      for (Eigen::Index c = 0; c < ch; ++c) {
        const double dy = gy(tt, c), d = dv(tt, c), uu = uv(tt, c);
        double gdc = 0.0, guc = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
          const std::size_t k = static_cast<std::size_t>(c * n + s);
          const double g = gh[k] + dy * cv(tt, s);
          gC(tt, s) += dy * h[k];
          const double prev = hp ? hp[k] : 0.0;
          gdc += g * (A(c, s) * a[k] * prev + bv(tt, s) * uu);
          gA(c, s) += g * d * a[k] * prev;
          gB(tt, s) += g * d * uu;
          guc += g * d * bv(tt, s);
          gh[k] = g * a[k];
        }
        gd(tt, c) += gdc;
        gu(tt, c) += guc;
      }
    }
    t.accumulate(u, gu);
    t.accumulate(delta, gd);
    t.accumulate(a_log, gA.cwiseProduct(A));
    t.accumulate(B, gB);
    t.accumulate(C, gC);
  });
}

Var mamba_block(Var x, const MambaBlockParams& p, ssm::ScanAlgorithm algorithm) {
  if (x.cols() != p.model_dim()) {
    fail(ErrorCode::invalid_input, "mamba_block: input width " + std::to_string(x.cols()) +
                                       " != model width " + std::to_string(p.model_dim()));
  }
  if (x.rows() == 0) fail(ErrorCode::invalid_input, "mamba_block: empty sequence");
  ad::Tape& t = x.tape();
  auto P = [&t](const Tensor& w) { return t.parameter(w); };

  const Var ln = ad::layer_norm(x, P(p.norm_in_gamma), P(p.norm_in_beta));
  const Var expanded = ad::add_row(ad::matmul(ln, P(p.in_weight)), P(p.in_bias));
  const Var conv = ad::causal_dwconv(expanded, P(p.conv_weight), P(p.conv_bias));
  const Var u = ad::silu(conv);

  const Var delta = ad::softplus(ad::add_row(ad::matmul(u, P(p.ssm.dt_weight)), P(p.ssm.dt_bias)));
  const Var B = ad::matmul(u, P(p.ssm.b_weight));
  const Var C = ad::matmul(u, P(p.ssm.c_weight));
  const Var y = selective_scan(u, delta, P(p.ssm.a_log), B, C, algorithm);

  const Var y_norm = ad::layer_norm(y, P(p.norm_ssm_gamma), P(p.norm_ssm_beta));
  const Var gate = ad::silu(ad::matmul(ln, P(p.gate_weight)));
  const Var s = ad::add_row(ad::matmul(ad::mul(y_norm, gate), P(p.out_weight)), P(p.out_bias));
  return ad::add(x, s);
}

Eigen::MatrixXd mamba_block(const Eigen::MatrixXd& x, const MambaBlockParams& params,
                            ssm::ScanAlgorithm algorithm) {
  ad::Tape tape(false);
  return mamba_block(tape.constant(x), params, algorithm).value();
}

}  // namespace mambapf
