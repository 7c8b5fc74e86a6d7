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

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "moerank/matrix.hpp"

namespace moerank {

/// One trainable tensor: value, accumulated gradient and Adam moments.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  long step_count = 0;

  ParamTensor() = default;
  ParamTensor(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols), adam_m(rows, cols), adam_v(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One AdamW update. Weight decay is decoupled: it scales the value directly
/// and never enters the moment estimates.
inline void adamw_step(ParamTensor& p, const AdamWConfig& c) {
  for (double g : p.grad.data) {
    if (!std::isfinite(g))
      throw std::runtime_error("adamw: non-finite gradient in parameter '" + p.name + "'");
  }
  p.step_count += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(p.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(p.step_count));
  for (size_t i = 0; i < p.value.data.size(); ++i) {
    const double g = p.grad.data[i];
    double& m = p.adam_m.data[i];
    double& v = p.adam_v.data[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    const double prev = p.value.data[i];
    p.value.data[i] = prev - c.lr * m_hat / (std::sqrt(v_hat) + c.eps) - c.lr * c.weight_decay * prev;
  }
}

}  // namespace moerank
