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

#include <cmath>
#include <string>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "mambapf/error.hpp"

namespace mambapf::ssm {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Continuous single-input single-output state-space model
/// h'(t) = A h(t) + B x(t), y(t) = C h(t), sampled with step delta.
template <typename Scalar>
struct SsmParams {
  MatrixX<Scalar> A;      // N x N
  MatrixX<Scalar> B;      // N x 1
  MatrixX<Scalar> C;      // 1 x N
  VectorX<Scalar> delta;  // one entry (time-invariant) or one per step

  bool time_invariant() const { return delta.size() == 1; }
  Index state_dim() const { return A.rows(); }
};

template <typename Scalar>
struct DiscreteSsm {
  MatrixX<Scalar> A_bar;  // N x N
  MatrixX<Scalar> B_bar;  // N x 1
};

/// Threshold on |delta * a| below which the diagonal ZOH input gain uses the
/// series (e^x - 1) / x = 1 + x / 2.
inline constexpr double kSeriesThreshold = 1e-8;

template <typename Scalar>
bool is_diagonal(const MatrixX<Scalar>& A) {
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = 0; i < A.rows(); ++i)
      if (i != j && A(i, j) != Scalar(0)) return false;
  return true;
}

/// (e^x - 1) / x with the series fallback near zero.
template <typename Scalar>
Scalar zoh_gain(Scalar x) {
  using std::abs;
  using std::expm1;
  if (abs(x) < Scalar(kSeriesThreshold)) return Scalar(1) + x / Scalar(2);
  return expm1(x) / x;
}

/// Zero-order-hold discretisation: A_bar = exp(dA), B_bar = (dA)^-1 (exp(dA) - I) dB.
/// Diagonal A is handled elementwise; dense A uses the matrix exponential and
/// fails with a numeric error when dA is singular.
template <typename Scalar>
DiscreteSsm<Scalar> discretize(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B, Scalar delta) {
  using std::exp;
  using std::isfinite;
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() != 1) {
    fail(ErrorCode::invalid_input, "discretize: A must be NxN and B Nx1");
  }
  if (!(delta > Scalar(0)) || !isfinite(static_cast<double>(delta))) {
    fail(ErrorCode::invalid_input, "discretize: delta must be positive and finite");
  }
  DiscreteSsm<Scalar> out;
  if (is_diagonal(A)) {
    out.A_bar = MatrixX<Scalar>::Zero(n, n);
    out.B_bar.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
      const Scalar x = delta * A(i, i);
      out.A_bar(i, i) = exp(x);
      out.B_bar(i, 0) = zoh_gain(x) * delta * B(i, 0);
    }
    return out;
  }
  const MatrixX<Scalar> dA = delta * A;
  out.A_bar = dA.exp();
  Eigen::FullPivLU<MatrixX<Scalar>> lu(dA);
  if (!lu.isInvertible()) fail(ErrorCode::numeric, "discretize: delta*A is singular and not diagonal");
  out.B_bar = lu.solve((out.A_bar - MatrixX<Scalar>::Identity(n, n)) * (delta * B));
  return out;
}

template <typename Scalar>
DiscreteSsm<Scalar> discretize(const SsmParams<Scalar>& p) {
  if (!p.time_invariant()) fail(ErrorCode::mode, "discretize: parameters carry a per-step delta");
  return discretize<Scalar>(p.A, p.B, p.delta(0));
}

/// h_t = A_bar h_{t-1} + B_bar x_t, y_t = C h_t.
template <typename Scalar>
VectorX<Scalar> scan_recurrent(const DiscreteSsm<Scalar>& disc, const MatrixX<Scalar>& C,
                               const VectorX<Scalar>& x, VectorX<Scalar> h0 = {}) {
  if (x.size() == 0) fail(ErrorCode::invalid_input, "scan_recurrent: empty sequence");
  const Index n = disc.A_bar.rows();
  VectorX<Scalar> h = h0.size() == 0 ? VectorX<Scalar>::Zero(n) : std::move(h0);
  VectorX<Scalar> y(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    h = disc.A_bar * h + disc.B_bar.col(0) * x(t);
    y(t) = (C * h)(0, 0);
  }
  return y;
}

/// Recurrent scan from continuous parameters; a per-step delta is
/// discretised at every step.
template <typename Scalar>
VectorX<Scalar> scan_recurrent(const SsmParams<Scalar>& p, const VectorX<Scalar>& x) {
  if (p.time_invariant()) return scan_recurrent(discretize(p), p.C, x);
  if (p.delta.size() != x.size()) fail(ErrorCode::invalid_input, "scan_recurrent: delta length != sequence length");
  if (x.size() == 0) fail(ErrorCode::invalid_input, "scan_recurrent: empty sequence");
  VectorX<Scalar> h = VectorX<Scalar>::Zero(p.state_dim());
  VectorX<Scalar> y(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    const auto d = discretize<Scalar>(p.A, p.B, p.delta(t));
    h = d.A_bar * h + d.B_bar.col(0) * x(t);
    y(t) = (p.C * h)(0, 0);
  }
  return y;
}

/// K = (C B_bar, C A_bar B_bar, ..., C A_bar^{L-1} B_bar).
template <typename Scalar>
VectorX<Scalar> convolution_kernel(const DiscreteSsm<Scalar>& disc, const MatrixX<Scalar>& C, Index length) {
  VectorX<Scalar> k(length);
  VectorX<Scalar> v = disc.B_bar.col(0);
  for (Index i = 0; i < length; ++i) {
    k(i) = (C * v)(0, 0);
    v = disc.A_bar * v;
  }
  return k;
}

/// y = x * K, causal and truncated to the input length.
template <typename Scalar>
VectorX<Scalar> scan_convolutional(const DiscreteSsm<Scalar>& disc, const MatrixX<Scalar>& C,
                                   const VectorX<Scalar>& x) {
  if (x.size() == 0) fail(ErrorCode::invalid_input, "scan_convolutional: empty sequence");
  const Index len = x.size();
  const VectorX<Scalar> k = convolution_kernel(disc, C, len);
  VectorX<Scalar> y = VectorX<Scalar>::Zero(len);
  for (Index t = 0; t < len; ++t)
    for (Index s = 0; s <= t; ++s) y(t) += k(s) * x(t - s);
  return y;
}

template <typename Scalar>
VectorX<Scalar> scan_convolutional(const SsmParams<Scalar>& p, const VectorX<Scalar>& x) {
  if (!p.time_invariant()) {
    fail(ErrorCode::mode, "scan_convolutional: a convolution kernel needs a fixed delta");
  }
  return scan_convolutional(discretize(p), p.C, x);
}

// ---------------------------------------------------------------------------
// Selective (input-dependent) scan.
//
// Shapes: u, delta are L x E (sequence by channel); A is E x N; B, C are L x N.
// Per channel c and state n:
//   h_t = exp(delta_t,c * A_c,n) h_{t-1} + delta_t,c * B_t,n * u_t,c
//   y_t,c = sum_n C_t,n h_t,c,n
// The input gain is the Euler form delta * B; the time-invariant path above
// keeps the exact ZOH gain.
// ---------------------------------------------------------------------------

enum class ScanAlgorithm { sequential, associative };

template <typename Scalar>
void check_selective_shapes(const MatrixX<Scalar>& u, const MatrixX<Scalar>& delta, const MatrixX<Scalar>& A,
                            const MatrixX<Scalar>& B, const MatrixX<Scalar>& C) {
  if (u.rows() == 0) fail(ErrorCode::invalid_input, "selective_scan: empty sequence");
  if (delta.rows() != u.rows() || delta.cols() != u.cols() || A.rows() != u.cols() || B.rows() != u.rows() ||
      C.rows() != u.rows() || B.cols() != A.cols() || C.cols() != A.cols()) {
    fail(ErrorCode::invalid_input, "selective_scan: inconsistent shapes");
  }
  if (!delta.allFinite()) fail(ErrorCode::numeric, "selective_scan: non-finite delta");
}

template <typename Scalar>
MatrixX<Scalar> selective_scan_sequential(const MatrixX<Scalar>& u, const MatrixX<Scalar>& delta,
                                          const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                                          const MatrixX<Scalar>& C) {
  using std::exp;
  check_selective_shapes(u, delta, A, B, C);
  const Index len = u.rows(), ch = u.cols(), n = A.cols();
  MatrixX<Scalar> h = MatrixX<Scalar>::Zero(ch, n);
  MatrixX<Scalar> y(len, ch);
  MatrixX<Scalar> decay(ch, n);
  for (Index t = 0; t < len; ++t) {
    decay = (A.array().colwise() * delta.row(t).transpose().array()).exp().matrix();
    for (Index c = 0; c < ch; ++c) {
      const Scalar d = delta(t, c);
      const Scalar du = d * u(t, c);
      Scalar acc(0);
      for (Index s = 0; s < n; ++s) {
        h(c, s) = decay(c, s) * h(c, s) + du * B(t, s);
        acc += C(t, s) * h(c, s);
      }
      y(t, c) = acc;
    }
  }
  return y;
}

/// Work-efficient (Blelloch) scan over the affine maps h -> a h + b, composed
/// as (a1, b1) then (a2, b2) = (a1 a2, a2 b1 + b2). Returns h_t for h_0 = 0.
/// `ea` and `eb` are scratch buffers, resized as needed.
template <typename Scalar>
void affine_scan_inclusive(std::span<const Scalar> a, std::span<Scalar> b, std::vector<Scalar>& ea,
                           std::vector<Scalar>& eb) {
  const std::size_t len = a.size();
  std::size_t p = 1;
  while (p < len) p <<= 1;
  ea.assign(p, Scalar(1));
  eb.assign(p, Scalar(0));
  std::copy(a.begin(), a.end(), ea.begin());
  std::copy(b.begin(), b.end(), eb.begin());

  for (std::size_t stride = 1; stride < p; stride <<= 1) {
    for (std::size_t i = 2 * stride - 1; i < p; i += 2 * stride) {
      const std::size_t j = i - stride;
      eb[i] = ea[i] * eb[j] + eb[i];
      ea[i] = ea[j] * ea[i];
    }
  }
  ea[p - 1] = Scalar(1);
  eb[p - 1] = Scalar(0);
  for (std::size_t stride = p >> 1; stride >= 1; stride >>= 1) {
    for (std::size_t i = 2 * stride - 1; i < p; i += 2 * stride) {
      const std::size_t j = i - stride;
      const Scalar la = ea[j], lb = eb[j];
      ea[j] = ea[i];
      eb[j] = eb[i];
      // right child: parent prefix followed by the left subtree
      eb[i] = la * eb[i] + lb;
      ea[i] = ea[i] * la;
    }
  }
  // ea/eb now hold exclusive prefixes; fold in each element.
  for (std::size_t t = 0; t < len; ++t) b[t] = a[t] * eb[t] + b[t];
}

template <typename Scalar>
void affine_scan_inclusive(std::vector<Scalar>& a, std::vector<Scalar>& b) {
  std::vector<Scalar> ea, eb;
  affine_scan_inclusive<Scalar>(std::span<const Scalar>(a), std::span<Scalar>(b), ea, eb);
}

template <typename Scalar>
MatrixX<Scalar> selective_scan_associative(const MatrixX<Scalar>& u, const MatrixX<Scalar>& delta,
                                           const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                                           const MatrixX<Scalar>& C) {
  using std::exp;
  check_selective_shapes(u, delta, A, B, C);
  const Index len = u.rows(), ch = u.cols(), n = A.cols();
  MatrixX<Scalar> y = MatrixX<Scalar>::Zero(len, ch);
  const MatrixX<Scalar> du = delta.cwiseProduct(u);
  MatrixX<Scalar> a(len, ch), b(len, ch);
  std::vector<Scalar> ea, eb;
  const auto span_of = [len](auto* p) { return std::span(p, static_cast<std::size_t>(len)); };
  for (Index s = 0; s < n; ++s) {
    a = (delta.array().rowwise() * A.col(s).transpose().array()).exp().matrix();
    b = du.array().colwise() * B.col(s).array();
    for (Index c = 0; c < ch; ++c) {
      affine_scan_inclusive<Scalar>(span_of(static_cast<const Scalar*>(a.col(c).data())), span_of(b.col(c).data()),
                                    ea, eb);
    }
    y.array() += b.array().colwise() * C.col(s).array();
  }
  return y;
}

/// Input-dependent projections of the selective SSM.
template <typename Scalar>
struct SelectiveSsm {
  MatrixX<Scalar> dt_weight;  // E x E
  MatrixX<Scalar> dt_bias;    // 1 x E
  MatrixX<Scalar> b_weight;   // E x N
  MatrixX<Scalar> c_weight;   // E x N
  MatrixX<Scalar> a_log;      // E x N, A = -exp(a_log)

  MatrixX<Scalar> A() const { return -a_log.array().exp().matrix(); }
};

template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(20) ? x : log1p(exp(x));
}

/// delta_t = softplus(u_t W_dt + b_dt), B_t = u_t W_B, C_t = u_t W_C, then the scan.
template <typename Scalar>
MatrixX<Scalar> selective_scan(const MatrixX<Scalar>& u, const SelectiveSsm<Scalar>& p,
                               ScanAlgorithm algorithm = ScanAlgorithm::associative) {
  if (u.cols() != p.dt_weight.rows()) fail(ErrorCode::invalid_input, "selective_scan: channel mismatch");
  MatrixX<Scalar> pre = (u * p.dt_weight).rowwise() + p.dt_bias.row(0);
  MatrixX<Scalar> delta = pre.unaryExpr([](Scalar x) { return softplus(x); });
  const MatrixX<Scalar> B = u * p.b_weight;
  const MatrixX<Scalar> C = u * p.c_weight;
  const MatrixX<Scalar> A = p.A();
  return algorithm == ScanAlgorithm::sequential ? selective_scan_sequential(u, delta, A, B, C)
                                                : selective_scan_associative(u, delta, A, B, C);
}

}  // namespace mambapf::ssm
