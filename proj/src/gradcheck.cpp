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

#include "mambapf/gradcheck.hpp"

#include <cmath>
#include <string>

#include "mambapf/error.hpp"

namespace mambapf {

GradCheckResult finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::invalid_input, "finite_diff_check: eps must be positive");
  if (analytic.size() != theta.size()) fail(ErrorCode::invalid_input, "finite_diff_check: gradient size mismatch");
  GradCheckResult r;
  r.analytic = analytic;
  r.numeric.resize(theta.size());
  Eigen::VectorXd x = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    x(i) = theta(i) + eps;
    const double fp = f(x);
    x(i) = theta(i) - eps;
    const double fm = f(x);
    x(i) = theta(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(ErrorCode::numeric, "finite_diff_check: non-finite value at coordinate " + std::to_string(i));
    }
    r.numeric(i) = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic(i) - r.numeric(i)) / std::max(1e-12, std::abs(analytic(i)) + std::abs(r.numeric(i)));
    if (r.worst_index < 0 || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

GradCheckResult finite_diff_check(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& f, const Eigen::VectorXd& theta,
    double eps) {
  Eigen::VectorXd g;
  const double f0 = f(theta, &g);
  if (!std::isfinite(f0)) fail(ErrorCode::numeric, "finite_diff_check: non-finite value at theta");
  return finite_diff_check([&f](const Eigen::VectorXd& x) { return f(x, nullptr); }, theta, g, eps);
}

}  // namespace mambapf
