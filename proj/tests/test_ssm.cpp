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

#include "mambapf/rng.hpp"
#include "mambapf/ssm.hpp"

namespace mambapf::ssm {
namespace {

using MatD = MatrixX<double>;
using VecD = VectorX<double>;
using MatL = MatrixX<long double>;

MatD uniform(Index r, Index c, CounterRng& rng, double lo, double hi) {
  MatD m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

SsmParams<double> random_diagonal(Index n, CounterRng& rng) {
  SsmParams<double> p;
  p.A = MatD::Zero(n, n);
  for (Index i = 0; i < n; ++i) p.A(i, i) = -rng.uniform(0.05, 3.0);
  p.B = uniform(n, 1, rng, -1, 1);
  p.C = uniform(1, n, rng, -1, 1);
  p.delta = VecD::Constant(1, rng.uniform(0.01, 0.5));
  return p;
}

TEST(Discretize, ScalarZeroA) {
  MatD A = MatD::Zero(1, 1), B = MatD::Constant(1, 1, 2.0);
  const auto d = discretize<double>(A, B, 0.1);
  EXPECT_EQ(d.A_bar(0, 0), 1.0);
  EXPECT_NEAR(d.B_bar(0, 0), 0.2, 1e-16);
}

TEST(Discretize, ScalarClosedForm) {
  MatD A = MatD::Constant(1, 1, -1.0), B = MatD::Constant(1, 1, 3.0);
  const auto d = discretize<double>(A, B, std::log(2.0));
  EXPECT_NEAR(d.A_bar(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(d.B_bar(0, 0), 1.5, 1e-15);
}

TEST(Discretize, DiagonalMatchesQuadratureOfZohIntegral) {
  CounterRng rng(1);
  const auto p = random_diagonal(4, rng);
  const auto d = discretize(p);
  const long double delta = p.delta(0);
  for (Index i = 0; i < 4; ++i) {
    // Composite Simpson on int_0^delta exp(a s) ds.
    const long double a = p.A(i, i);
    const int m = 2000;
    const long double h = delta / m;
    long double s = std::exp(0.0L) + std::exp(a * delta);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0L : 2.0L) * std::exp(a * h * k);
    const long double integral = s * h / 3.0L;
    EXPECT_NEAR(d.B_bar(i, 0), static_cast<double>(integral * p.B(i, 0)), 1e-13);
    EXPECT_NEAR(d.A_bar(i, i), static_cast<double>(std::exp(a * delta)), 1e-15);
  }
}

TEST(Discretize, DenseMatchesDiagonalInRotatedBasis) {
  CounterRng rng(2);
  const auto p = random_diagonal(3, rng);
  const MatD Q = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix();
  const MatD A = Q * p.A * Q.transpose();
  const MatD B = Q * p.B;
  const auto dense = discretize<double>(A, B, p.delta(0));
  const auto diag = discretize(p);
  EXPECT_LE((dense.A_bar - Q * diag.A_bar * Q.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((dense.B_bar - Q * diag.B_bar).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Discretize, SingularDenseRejected) {
  MatD A(2, 2);
  A << 0, 1, 0, 0;
  try {
    discretize<double>(A, MatD::Ones(2, 1), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
  }
}

TEST(Discretize, NonPositiveDeltaRejected) {
  EXPECT_THROW(discretize<double>(MatD::Constant(1, 1, -1), MatD::Ones(1, 1), 0.0), Error);
  EXPECT_THROW(discretize<double>(MatD::Constant(1, 1, -1), MatD::Ones(1, 1), -1.0), Error);
}

TEST(Discretize, SmallDeltaLimit) {
  for (double a : {-3.0, -0.5, 0.0, 2.0}) {
    const MatD A = MatD::Constant(1, 1, a), B = MatD::Constant(1, 1, 1.7);
    const auto d = discretize<double>(A, B, 1e-9);
    EXPECT_LE(std::abs(d.A_bar(0, 0) - 1.0), 1e-8);
    EXPECT_LE(std::abs(d.B_bar(0, 0) - 1e-9 * 1.7), 1e-8);
  }
}

TEST(Discretize, SemigroupForDiagonalA) {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_diagonal(6, rng);
    const auto one = discretize<double>(p.A, p.B, p.delta(0));
    const auto two = discretize<double>(p.A, p.B, 2.0 * p.delta(0));
    EXPECT_LE((one.A_bar * one.A_bar - two.A_bar).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ScanRecurrent, ZeroInputGivesZeroOutput) {
  CounterRng rng(4);
  const auto p = random_diagonal(3, rng);
  const VecD y = scan_recurrent(p, VecD::Zero(10).eval());
  EXPECT_TRUE((y.array() == 0.0).all());
}

TEST(ScanRecurrent, IntegratorIsPrefixSum) {
  DiscreteSsm<double> d{MatD::Ones(1, 1), MatD::Ones(1, 1)};
  VecD x(5);
  x << 1, -2, 3.5, 0, 4;
  const VecD y = scan_recurrent(d, MatD(MatD::Ones(1, 1)), x);
  VecD want(5);
  want << 1, -1, 2.5, 2.5, 6.5;
  EXPECT_EQ(y, want);
}

TEST(ScanRecurrent, MatchesExtendedPrecisionReference) {
  CounterRng rng(5);
  DiscreteSsm<double> d{uniform(4, 4, rng, -0.4, 0.4), uniform(4, 1, rng, -1, 1)};
  const MatD C = uniform(1, 4, rng, -1, 1);
  const VecD x = uniform(32, 1, rng, -1, 1);
  const VecD y = scan_recurrent(d, C, x);
  std::vector<long double> h(4, 0.0L);
  for (Index t = 0; t < 32; ++t) {
    std::vector<long double> nh(4, 0.0L);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) nh[i] += static_cast<long double>(d.A_bar(i, j)) * h[j];
      nh[i] += static_cast<long double>(d.B_bar(i, 0)) * x(t);
    }
    h = nh;
    long double out = 0.0L;
    for (int i = 0; i < 4; ++i) out += static_cast<long double>(C(0, i)) * h[i];
    EXPECT_NEAR(y(t), static_cast<double>(out), 1e-13);
  }
}

TEST(ScanConvolutional, LengthOne) {
  CounterRng rng(6);
  const auto p = random_diagonal(3, rng);
  const auto d = discretize(p);
  VecD x(1);
  x << 2.5;
  EXPECT_NEAR(scan_convolutional(p, x)(0), (p.C * d.B_bar)(0, 0) * 2.5, 1e-15);
}

TEST(ScanConvolutional, IdentityChannel) {
  DiscreteSsm<double> d{MatD::Zero(1, 1), MatD::Ones(1, 1)};
  CounterRng rng(7);
  const VecD x = uniform(20, 1, rng, -5, 5);
  EXPECT_EQ(scan_convolutional(d, MatD(MatD::Ones(1, 1)), x), x);
}

TEST(ScanConvolutional, SelectiveDeltaIsModeError) {
  CounterRng rng(8);
  auto p = random_diagonal(2, rng);
  p.delta = VecD::Constant(5, 0.1);
  try {
    scan_convolutional(p, VecD::Ones(5).eval());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::mode);
  }
}

TEST(ScanConvolutional, AgreesWithRecurrent) {
  CounterRng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_diagonal(1 + trial % 8, rng);
    const VecD x = uniform(64, 1, rng, -1, 1);
    EXPECT_LE((scan_convolutional(p, x) - scan_recurrent(p, x)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ScanRecurrent, PerStepDeltaDiscretisesEachStep) {
  CounterRng rng(10);
  auto p = random_diagonal(3, rng);
  const VecD x = uniform(6, 1, rng, -1, 1);
  p.delta = uniform(6, 1, rng, 0.05, 0.3);
  const VecD y = scan_recurrent(p, x);
  VecD h = VecD::Zero(3);
  for (Index t = 0; t < 6; ++t) {
    const auto d = discretize<double>(p.A, p.B, p.delta(t));
    h = d.A_bar * h + d.B_bar * x(t);
    EXPECT_NEAR(y(t), (p.C * h)(0, 0), 1e-14);
  }
}

TEST(AffineScan, MatchesSequentialComposition) {
  CounterRng rng(11);
  for (std::size_t len : {1u, 2u, 3u, 7u, 16u, 33u}) {
    std::vector<double> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = rng.uniform(0, 1);
      b[i] = rng.uniform(-1, 1);
    }
    std::vector<double> want(len);
    double h = 0.0;
    for (std::size_t i = 0; i < len; ++i) want[i] = h = a[i] * h + b[i];
    affine_scan_inclusive(a, b);
    for (std::size_t i = 0; i < len; ++i) EXPECT_NEAR(b[i], want[i], 1e-14);
  }
}

SelectiveSsm<double> random_selective(Index E, Index N, CounterRng& rng) {
  SelectiveSsm<double> p;
  p.dt_weight = uniform(E, E, rng, -0.5, 0.5);
  p.dt_bias = uniform(1, E, rng, -2, 0);
  p.b_weight = uniform(E, N, rng, -1, 1);
  p.c_weight = uniform(E, N, rng, -1, 1);
  p.a_log = uniform(E, N, rng, -1, 1.5);
  return p;
}

TEST(SelectiveScan, AssociativeMatchesSequential) {
  CounterRng rng(12);
  const auto p = random_selective(8, 4, rng);
  const MatD u = uniform(48, 8, rng, -1, 1);
  const MatD seq = selective_scan(u, p, ScanAlgorithm::sequential);
  const MatD par = selective_scan(u, p, ScanAlgorithm::associative);
  EXPECT_LE((seq - par).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SelectiveScan, VanishingDeltaFreezesState) {
  CounterRng rng(13);
  auto p = random_selective(4, 3, rng);
  p.dt_weight.setZero();
  p.dt_bias.setConstant(-60.0);  // softplus(-60) ~ 1e-26
  const MatD u = uniform(10, 4, rng, -1, 1);
  EXPECT_LE(selective_scan(u, p).cwiseAbs().maxCoeff(), 1e-20);
}

TEST(SelectiveScan, LengthOneIsSingleEulerStep) {
  CounterRng rng(14);
  const auto p = random_selective(3, 2, rng);
  const MatD u = uniform(1, 3, rng, -1, 1);
  const MatD y = selective_scan(u, p, ScanAlgorithm::sequential);
  const MatD B = u * p.b_weight, C = u * p.c_weight;
  for (Index c = 0; c < 3; ++c) {
    const double pre = (u * p.dt_weight)(0, c) + p.dt_bias(0, c);
    const double delta = std::log1p(std::exp(pre));
    double want = 0.0;
    for (Index s = 0; s < 2; ++s) want += C(0, s) * delta * B(0, s) * u(0, c);
    EXPECT_NEAR(y(0, c), want, 1e-15);
  }
}

TEST(SelectiveScan, NonFiniteDeltaIsNumericError) {
  CounterRng rng(15);
  auto p = random_selective(2, 2, rng);
  MatD u = uniform(4, 2, rng, -1, 1);
  u(2, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    selective_scan(u, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
  }
}

TEST(SelectiveScan, LongDoubleInstantiation) {
  CounterRng rng(16);
  const auto p = random_selective(3, 2, rng);
  SelectiveSsm<long double> pl{p.dt_weight.cast<long double>(), p.dt_bias.cast<long double>(),
                               p.b_weight.cast<long double>(), p.c_weight.cast<long double>(),
                               p.a_log.cast<long double>()};
  const MatD u = uniform(12, 3, rng, -1, 1);
  const MatL yl = selective_scan<long double>(u.cast<long double>(), pl, ScanAlgorithm::sequential);
  EXPECT_LE((selective_scan(u, p) - yl.cast<double>()).cwiseAbs().maxCoeff(), 1e-13);
}

}  // namespace
}  // namespace mambapf::ssm
