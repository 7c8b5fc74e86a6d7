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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace moerank {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Dense row-major matrix of doubles. The whole engine runs in 64-bit
/// precision so that finite-difference gradient checks have headroom and
/// trained trajectories are reproducible bit-for-bit under a fixed seed.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

// ---------------------------------------------------------------------------
// Affine layer: y = x W + b for a row vector x.
// ---------------------------------------------------------------------------

inline std::vector<double> affine(const std::vector<double>& x, const Matrix& w,
                                  const std::vector<double>& b) {
  if (static_cast<int>(x.size()) != w.rows)
    throw std::invalid_argument("affine: x has " + std::to_string(x.size()) +
                                " entries but W has " + std::to_string(w.rows) + " rows");
  if (static_cast<int>(b.size()) != w.cols)
    throw std::invalid_argument("affine: b has " + std::to_string(b.size()) +
                                " entries but W has " + std::to_string(w.cols) + " cols");
  std::vector<double> y(w.cols);
  for (int j = 0; j < w.cols; ++j) {
    double acc = b[j];
    for (int i = 0; i < w.rows; ++i) acc += x[i] * w(i, j);
    y[j] = acc;
  }
  return y;
}

/// Accumulates dL/dx, dL/dW, dL/db given dL/dy. Gradients are added, never
/// overwritten, so a parameter shared across examples collects the batch sum.
inline void affine_backward(const std::vector<double>& x, const Matrix& w,
                            const std::vector<double>& dy, std::vector<double>* dx,
                            Matrix* dw, std::vector<double>* db) {
  if (dx) {
    for (int i = 0; i < w.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < w.cols; ++j) acc += w(i, j) * dy[j];
      (*dx)[i] += acc;
    }
  }
  if (dw) {
    for (int i = 0; i < w.rows; ++i)
      for (int j = 0; j < w.cols; ++j) (*dw)(i, j) += x[i] * dy[j];
  }
  if (db) {
    for (int j = 0; j < w.cols; ++j) (*db)[j] += dy[j];
  }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline std::vector<double> relu(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = relu(x[i]);
  return y;
}

/// dL/dz given pre-activation z and dL/d relu(z). Subgradient 0 at z == 0.
inline std::vector<double> relu_backward(const std::vector<double>& z,
                                         const std::vector<double>& dy) {
  std::vector<double> dz(z.size());
  for (size_t i = 0; i < z.size(); ++i) dz[i] = z[i] > 0.0 ? dy[i] : 0.0;
  return dz;
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sigmoid_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 - s);
}

inline double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

/// Numerically stabilized softmax. Entries equal to -inf act as mask
/// sentinels and map to exactly 0 in the output; the distribution is taken
/// over the remaining support.
inline std::vector<double> softmax(const std::vector<double>& x) {
  double mx = kNegInf;
  for (double v : x) mx = std::max(mx, v);
  if (mx == kNegInf) throw std::domain_error("softmax: empty support (all entries are -inf)");
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] == kNegInf ? 0.0 : std::exp(x[i] - mx);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

/// dL/dz for z the softmax input, given p = softmax(z) and dL/dp.
/// Masked entries (p == 0) receive zero gradient.
inline std::vector<double> softmax_backward(const std::vector<double>& p,
                                            const std::vector<double>& dp) {
  double dot = 0.0;
  for (size_t i = 0; i < p.size(); ++i) dot += dp[i] * p[i];
  std::vector<double> dz(p.size());
  for (size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (dp[i] - dot);
  return dz;
}

}  // namespace moerank
