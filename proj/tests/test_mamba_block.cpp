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

#include <gtest/gtest.h>

#include <cmath>

#include "grad_helpers.hpp"
#include "mambapf/mamba_block.hpp"

namespace mambapf {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using testing::random_matrix;

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double softplus(double x) { return std::log1p(std::exp(x)); }

std::vector<double> layer_norm_row(const std::vector<double>& x, const MatrixXd& g, const MatrixXd& b) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= double(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= double(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * g(0, Index(i)) + b(0, Index(i));
  return out;
}

// Step-by-step evaluation of the block, one time step at a time.
MatrixXd block_oracle(const MatrixXd& x, const MambaBlockParams& p) {
  const Index L = x.rows(), D = p.model_dim(), E = p.inner_dim(), N = p.state_dim(), W = p.conv_weight.cols();
  std::vector<std::vector<double>> ln(L), xin(L);
  for (Index t = 0; t < L; ++t) {
    std::vector<double> row(static_cast<std::size_t>(D));
    for (Index d = 0; d < D; ++d) row[d] = x(t, d);
    ln[t] = layer_norm_row(row, p.norm_in_gamma, p.norm_in_beta);
    xin[t].assign(static_cast<std::size_t>(E), 0.0);
    for (Index e = 0; e < E; ++e) {
      double s = p.in_bias(0, e);
      for (Index d = 0; d < D; ++d) s += ln[t][d] * p.in_weight(d, e);
      xin[t][e] = s;
    }
  }
  std::vector<std::vector<double>> h(E, std::vector<double>(static_cast<std::size_t>(N), 0.0));
  MatrixXd out(L, D);
  for (Index t = 0; t < L; ++t) {
    std::vector<double> u(static_cast<std::size_t>(E));
    for (Index e = 0; e < E; ++e) {
      double s = p.conv_bias(0, e);
      for (Index j = 0; j < W && j <= t; ++j) s += p.conv_weight(e, j) * xin[t - j][e];
      u[e] = silu(s);
    }
    std::vector<double> Bt(static_cast<std::size_t>(N), 0.0), Ct(static_cast<std::size_t>(N), 0.0);
    for (Index n = 0; n < N; ++n)
      for (Index e = 0; e < E; ++e) {
        Bt[n] += u[e] * p.ssm.b_weight(e, n);
        Ct[n] += u[e] * p.ssm.c_weight(e, n);
      }
    std::vector<double> y(static_cast<std::size_t>(E), 0.0);
    for (Index e = 0; e < E; ++e) {
      double pre = p.ssm.dt_bias(0, e);
      for (Index k = 0; k < E; ++k) pre += u[k] * p.ssm.dt_weight(k, e);
      const double dt = softplus(pre);
      for (Index n = 0; n < N; ++n) {
        const double a = -std::exp(p.ssm.a_log(e, n));
        h[e][n] = std::exp(dt * a) * h[e][n] + dt * Bt[n] * u[e];
        y[e] += Ct[n] * h[e][n];
      }
    }
    const std::vector<double> yn = layer_norm_row(y, p.norm_ssm_gamma, p.norm_ssm_beta);
    std::vector<double> gated(static_cast<std::size_t>(E));
    for (Index e = 0; e < E; ++e) {
      double g = 0.0;
      for (Index d = 0; d < D; ++d) g += ln[t][d] * p.gate_weight(d, e);
      gated[e] = yn[e] * silu(g);
    }
    for (Index d = 0; d < D; ++d) {
      double s = p.out_bias(0, d);
      for (Index e = 0; e < E; ++e) s += gated[e] * p.out_weight(e, d);
      out(t, d) = x(t, d) + s;
    }
  }
  return out;
}

MambaBlockParams randomized_block(Index D, Index N, CounterRng& rng) {
  MambaBlockParams p = init_mamba_block(MambaConfig{D, N, 2, 3}, rng);
  // Move every tensor off its initial value so no path is trivially zero.
  p.visit("", [&rng](const std::string&, ad::Tensor& t) { t += random_matrix(t.rows(), t.cols(), rng, -0.3, 0.3); });
  return p;
}

TEST(MambaBlock, MatchesStepByStepTranscription) {
  CounterRng rng(1);
  const MambaBlockParams p = randomized_block(4, 3, rng);
  const MatrixXd x = random_matrix(16, 4, rng);
  const MatrixXd want = block_oracle(x, p);
  for (auto algo : {ssm::ScanAlgorithm::sequential, ssm::ScanAlgorithm::associative}) {
    EXPECT_LE((mamba_block(x, p, algo) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MambaBlock, ZeroOutputProjectionIsIdentity) {
  CounterRng rng(2);
  MambaBlockParams p = randomized_block(6, 4, rng);
  p.out_weight.setZero();
  p.out_bias.setZero();
  const MatrixXd x = random_matrix(20, 6, rng, -5, 5);
  EXPECT_TRUE((mamba_block(x, p) .array() == x.array()).all());
}

TEST(MambaBlock, ConstantRowsPassThrough) {
  CounterRng rng(3);
  MambaBlockParams p = init_mamba_block(MambaConfig{5, 3, 2, 4}, rng);
  p.out_bias.setZero();
  MatrixXd x(7, 5);
  for (Index t = 0; t < 7; ++t) x.row(t).setConstant(0.3 * double(t) - 1.0);
  EXPECT_LE((mamba_block(x, p) - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MambaBlock, WidthMismatchRejected) {
  CounterRng rng(4);
  const MambaBlockParams p = init_mamba_block(MambaConfig{4, 2, 2, 2}, rng);
  try {
    mamba_block(MatrixXd::Ones(3, 5), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(MambaBlock, OutputsFiniteForLargeInputs) {
  CounterRng rng(5);
  const MambaBlockParams p = randomized_block(4, 4, rng);
  const MatrixXd x = random_matrix(64, 4, rng, -100, 100);
  EXPECT_TRUE(mamba_block(x, p).allFinite());
}

TEST(MambaBlock, GradientsMatchFiniteDifferences) {
  CounterRng rng(6);
  MambaBlockParams p = randomized_block(3, 2, rng);
  MatrixXd x = random_matrix(9, 3, rng);
  const MatrixXd probe_w = random_matrix(9, 3, rng);
  for (auto algo : {ssm::ScanAlgorithm::sequential, ssm::ScanAlgorithm::associative}) {
    auto build = [&](ad::Tape& t) { return testing::probe(mamba_block(t.parameter(x), p, algo), probe_w); };
    EXPECT_LE(testing::check_tensor_grad(x, build).max_relative_error, 1e-5) << "input";
    p.visit("", [&](const std::string& name, ad::Tensor& tensor) {
      EXPECT_LE(testing::check_tensor_grad(tensor, build).max_relative_error, 1e-4) << name;
    });
  }
}

TEST(SelectiveScanOp, GradientsMatchFiniteDifferences) {
  CounterRng rng(7);
  MatrixXd u = random_matrix(11, 3, rng), pre = random_matrix(11, 3, rng), a_log = random_matrix(3, 2, rng);
  MatrixXd B = random_matrix(11, 2, rng), C = random_matrix(11, 2, rng);
  const MatrixXd w = random_matrix(11, 3, rng);
  auto build = [&](ad::Tape& t) {
    const ad::Var delta = ad::softplus(t.parameter(pre));
    return testing::probe(selective_scan(t.parameter(u), delta, t.parameter(a_log), t.parameter(B), t.parameter(C),
                                         ssm::ScanAlgorithm::associative),
                          w);
  };
  for (MatrixXd* m : {&u, &pre, &a_log, &B, &C}) EXPECT_LE(testing::check_tensor_grad(*m, build).max_relative_error, 1e-6);
}

TEST(MambaBlock, InitialisationIsDeterministic) {
  CounterRng a(9), b(9);
  const auto pa = init_mamba_block(MambaConfig{}, a);
  const auto pb = init_mamba_block(MambaConfig{}, b);
  std::vector<MatrixXd> ta, tb;
  pa.visit("", [&](const std::string&, const ad::Tensor& t) { ta.push_back(t); });
  pb.visit("", [&](const std::string&, const ad::Tensor& t) { tb.push_back(t); });
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_TRUE((ta[i].array() == tb[i].array()).all());
  // A = -exp(a_log) is strictly negative, so every decay lies in (0, 1).
  EXPECT_TRUE((pa.ssm.A().array() < 0.0).all());
}

}  // namespace
}  // namespace mambapf
