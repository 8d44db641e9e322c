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
#include <span>
#include <vector>

#include "mambapf/autodiff.hpp"

namespace mambapf::ad {

// Elementwise and linear-algebra ops recorded on the tape of their inputs.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a (n x c) + row (1 x c), broadcast over rows.
Var add_row(Var a, Var row);
/// a (n x c) * row (1 x c), broadcast over rows.
Var mul_row(Var a, Var row);

Var silu(Var a);
Var tanh(Var a);
Var softplus(Var a);

/// Per-row layer normalisation with affine gamma/beta (1 x c each).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Causal depth-wise 1-D convolution along rows:
/// y(t, c) = bias(c) + sum_j weight(c, j) * x(t - j, c), zero padded.
Var causal_dwconv(Var x, Var weight, Var bias);

/// out.row(i) = a.row(index[i]); gradients are scatter-added back.
Var gather_rows(Var a, std::span<const Eigen::Index> index);
Var concat_cols(Var a, Var b);
/// Sums consecutive blocks of `group` rows: (n*group x c) -> (n x c).
Var segment_sum_rows(Var a, Eigen::Index group);

/// Sum of all entries, 1x1.
Var sum(Var a);
/// Mean of all entries, 1x1.
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// Sum of 1x1 nodes.
Var sum_scalars(std::span<const Var> terms);

/// Plain-matrix activations shared with tests and pure forward paths.
inline double silu_value(double x) { return x / (1.0 + std::exp(-x)); }
inline double softplus_value(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

}  // namespace mambapf::ad
