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

#include <functional>

#include <Eigen/Core>

namespace mambapf {

struct GradCheckResult {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

/// Compares `analytic` against central differences of f at theta:
///   max_i |a_i - n_i| / max(1e-12, |a_i| + |n_i|).
GradCheckResult finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic, double eps);

/// Same, with f returning both value and gradient; the gradient at theta is
/// taken as the analytic one.
GradCheckResult finite_diff_check(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& f, const Eigen::VectorXd& theta,
    double eps);

}  // namespace mambapf
