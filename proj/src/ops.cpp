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

#include "mambapf/ops.hpp"

#include <cmath>
#include <string>

#include "mambapf/error.hpp"

namespace mambapf::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::invalid_input, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                       std::to_string(b.cols()));
  }
}

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    fail(ErrorCode::invalid_input, std::string(op) + ": expected 1x" + std::to_string(a.cols()) + " row");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::invalid_input, "matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                                       std::to_string(b.rows()) + " differ");
  }
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return a.tape().record(a.value() * s, {a}, [a, s](Tape& t, const Tensor& g) { t.accumulate(a, g * s); });
}

Var add_row(Var a, Var row) {
  require_row(a.value(), row.value(), "add_row");
  Tensor out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  require_row(a.value(), row.value(), "mul_row");
  Tensor out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, (g.array().rowwise() * row.value().row(0).array()).matrix());
    if (t.requires_grad(row)) t.accumulate(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var silu(Var a) {
  const auto x = a.value().array();
  Tensor out = (x / (1.0 + (-x).exp())).matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const auto x = a.value().array();
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x).exp());
    t.accumulate(a, (g.array() * s * (1.0 + x * (1.0 - s))).matrix());
  });
}

Var tanh(Var a) {
  return a.tape().record(a.value().array().tanh().matrix(), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor y = a.value().array().tanh().matrix();
    t.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var softplus(Var a) {
  const auto x = a.value().array();
  Tensor out = (x > 20.0).select(x, x.min(20.0).exp().log1p()).matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, (g.array() / (1.0 + (-a.value().array()).exp())).matrix());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  require_row(xv, gamma.value(), "layer_norm");
  require_row(xv, beta.value(), "layer_norm");
  const Eigen::Index n = xv.rows();
  const double c = static_cast<double>(xv.cols());
  Eigen::VectorXd inv_std(n);
  Tensor xhat(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).sum() / c;
    const double var = (xv.row(i).array() - mu).square().sum() / c;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Tensor out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, xhat, inv_std, c](Tape& t, const Tensor& g) {
                           if (t.requires_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                           if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
                           if (!t.requires_grad(x)) return;
                           const Tensor gh = g.array().rowwise() * gamma.value().row(0).array();
                           Tensor gx(g.rows(), g.cols());
                           for (Eigen::Index i = 0; i < g.rows(); ++i) {
                             const double m1 = gh.row(i).sum() / c;
                             const double m2 = gh.row(i).cwiseProduct(xhat.row(i)).sum() / c;
                             gx.row(i) = inv_std(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
                           }
                           t.accumulate(x, gx);
                         });
}

Var causal_dwconv(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  const Eigen::Index len = xv.rows(), ch = xv.cols(), width = w.cols();
  if (w.rows() != ch) fail(ErrorCode::invalid_input, "causal_dwconv: weight rows must equal channels");
  require_row(xv, bias.value(), "causal_dwconv");
  Tensor out = bias.value().replicate(len, 1);
  for (Eigen::Index j = 0; j < width && j < len; ++j) {
    out.bottomRows(len - j).array() +=
        xv.topRows(len - j).array().rowwise() * w.col(j).transpose().array();
  }
  return x.tape().record(std::move(out), {x, weight, bias}, [x, weight, bias](Tape& t, const Tensor& g) {
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    const Eigen::Index len = xv.rows(), width = w.cols();
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
    if (t.requires_grad(weight)) {
      Tensor gw = Tensor::Zero(w.rows(), width);
      for (Eigen::Index j = 0; j < width && j < len; ++j) {
        gw.col(j) = g.bottomRows(len - j).cwiseProduct(xv.topRows(len - j)).colwise().sum().transpose();
      }
      t.accumulate(weight, gw);
    }
    if (t.requires_grad(x)) {
      Tensor gx = Tensor::Zero(len, xv.cols());
      for (Eigen::Index j = 0; j < width && j < len; ++j) {
        gx.topRows(len - j).array() += g.bottomRows(len - j).array().rowwise() * w.col(j).transpose().array();
      }
      t.accumulate(x, gx);
    }
  });
}

Var gather_rows(Var a, std::span<const Eigen::Index> index) {
  const Tensor& av = a.value();
  Tensor out(static_cast<Eigen::Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= av.rows()) fail(ErrorCode::invalid_input, "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(index[i]);
  }
  std::vector<Eigen::Index> idx(index.begin(), index.end());
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
    Tensor ga = Tensor::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, ga);
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) fail(ErrorCode::invalid_input, "concat_cols: row counts differ");
  Tensor out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape().record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(cb));
  });
}

Var segment_sum_rows(Var a, Eigen::Index group) {
  const Tensor& av = a.value();
  if (group < 1 || av.rows() % group != 0) fail(ErrorCode::invalid_input, "segment_sum_rows: bad group size");
  const Eigen::Index n = av.rows() / group;
  Tensor out = Tensor::Zero(n, av.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < group; ++j) out.row(i) += av.row(i * group + j);
  }
  return a.tape().record(std::move(out), {a}, [a, group, n](Tape& t, const Tensor& g) {
    Tensor ga(n * group, g.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < group; ++j) ga.row(i * group + j) = g.row(i);
    }
    t.accumulate(a, ga);
  });
}

Var sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_scalars(std::span<const Var> terms) {
  if (terms.empty()) fail(ErrorCode::invalid_input, "sum_scalars: no terms");
  Tensor out(1, 1);
  out(0, 0) = 0.0;
  for (const Var& v : terms) {
    if (v.value().size() != 1) fail(ErrorCode::invalid_input, "sum_scalars: term is not 1x1");
    out(0, 0) += v.value()(0, 0);
  }
  std::vector<Var> parents(terms.begin(), terms.end());
  return terms.front().tape().record(std::move(out), terms, [parents](Tape& t, const Tensor& g) {
    for (const Var& p : parents) t.accumulate(p, g);
  });
}

}  // namespace mambapf::ad
