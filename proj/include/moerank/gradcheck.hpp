/*
 * Copyright 2026 The moerank authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "moerank/optim.hpp"

namespace moerank {

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;

  bool within(double tol) const { return max_rel_err < tol; }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& g : groups) {
      os << g.name << ": max_rel_err=" << g.max_rel_err << " (analytic=" << g.analytic_at_worst
         << ", numeric=" << g.numeric_at_worst << " at flat index " << g.worst_index << ")\n";
    }
    return os.str();
  }
};

/// Compares the analytic gradients already stored in each ParamTensor::grad
/// against central finite differences of `loss_fn`, which must re-evaluate
/// the forward pass at the current parameter values. `loss_fn` has to be
/// deterministic: any noise or sampling inside it must be replayed from a
/// fixed seed so that two calls at the same point return the same value.
inline GradCheckReport grad_check(const std::function<double()>& loss_fn,
                                  const std::vector<ParamTensor*>& params, double h = 1e-5) {
  GradCheckReport report;
  for (ParamTensor* p : params) {
    GradCheckGroup group;
    group.name = p->name;
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      const double f_plus = loss_fn();
      p->value.data[i] = saved - h;
      const double f_minus = loss_fn();
      p->value.data[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double analytic = p->grad.data[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel_err = abs_err / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      if (rel_err > group.max_rel_err) {
        group.max_rel_err = rel_err;
        group.max_abs_err = abs_err;
        group.worst_index = static_cast<int>(i);
        group.analytic_at_worst = analytic;
        group.numeric_at_worst = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace moerank
