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
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "moerank/gradcheck.hpp"
#include "moerank/matrix.hpp"
#include "moerank/optim.hpp"
#include "moerank/rng.hpp"

namespace moerank {
namespace {

// Independent oracle: plain triple-loop matmul plus bias, accumulating in
// ascending index order starting from the bias term.
std::vector<double> naive_affine(const std::vector<double>& x, const Matrix& w,
                                 const std::vector<double>& b) {
  std::vector<double> y(w.cols);
  for (int j = 0; j < w.cols; ++j) y[j] = b[j];
  for (int r = 0; r < 1; ++r) {
    for (int j = 0; j < w.cols; ++j) {
      for (int i = 0; i < w.rows; ++i) y[j] += x[i] * w(i, j);
    }
  }
  return y;
}

TEST(Affine, IdentityCase) {
  Matrix w(2, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  const auto y = affine({1.0, 2.0}, w, {0.0, 0.0});
  EXPECT_EQ(y, (std::vector<double>{1.0, 2.0}));
}

TEST(Affine, HandSum) {
  Matrix w(2, 1);
  w(0, 0) = 2.0;
  w(1, 0) = 3.0;
  const auto y = affine({1.0, 1.0}, w, {1.0});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 6.0);
}

TEST(Affine, MatchesNaiveOracleBitForBit) {
  Rng rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3, m = 4;
    std::vector<double> x(n);
    std::vector<double> b(m);
    Matrix w(n, m);
    for (auto& v : x) v = u(rng);
    for (auto& v : b) v = u(rng);
    for (auto& v : w.data) v = u(rng);
    const auto got = affine(x, w, b);
    const auto want = naive_affine(x, w, b);
    for (int j = 0; j < m; ++j) EXPECT_EQ(got[j], want[j]);  // exact, not approximate
  }
}

TEST(Affine, ShapeMismatchThrows) {
  Matrix w(2, 2);
  EXPECT_THROW(affine({1.0}, w, {0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(affine({1.0, 2.0}, w, {0.0}), std::invalid_argument);
}

TEST(Affine, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4, m = 3;
    std::vector<double> x(n), b(m), c(m);  // c: fixed linear head making the loss scalar
    Matrix w(n, m);
    for (auto& v : x) v = u(rng);
    for (auto& v : b) v = u(rng);
    for (auto& v : c) v = u(rng);
    for (auto& v : w.data) v = u(rng);

    auto loss = [&]() {
      const auto y = affine(x, w, b);
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += c[j] * y[j];
      return acc;
    };

    std::vector<double> dx(n, 0.0), db(m, 0.0);
    Matrix dw(n, m);
    affine_backward(x, w, c, &dx, &dw, &db);

    for (int i = 0; i < n; ++i) {
      const double saved = x[i];
      x[i] = saved + h;
      const double fp = loss();
      x[i] = saved - h;
      const double fm = loss();
      x[i] = saved;
      EXPECT_NEAR(dx[i], (fp - fm) / (2 * h), 1e-4 * std::max(1.0, std::abs(dx[i])));
    }
    for (size_t i = 0; i < w.data.size(); ++i) {
      const double saved = w.data[i];
      w.data[i] = saved + h;
      const double fp = loss();
      w.data[i] = saved - h;
      const double fm = loss();
      w.data[i] = saved;
      EXPECT_NEAR(dw.data[i], (fp - fm) / (2 * h), 1e-4 * std::max(1.0, std::abs(dw.data[i])));
    }
  }
}

TEST(Activations, SigmoidAtZero) { EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5); }

TEST(Activations, SoftmaxSymmetry) {
  const auto p = softmax({0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Activations, SoftmaxMaskedEntryIsExactlyZero) {
  for (double a : {-3.0, 0.0, 1.5, 40.0}) {
    const auto p = softmax({a, kNegInf});
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(p[1], 0.0);
  }
}

TEST(Activations, SoftmaxEmptySupportThrows) {
  EXPECT_THROW(softmax({kNegInf, kNegInf}), std::domain_error);
}

TEST(Activations, SoftmaxIsProbabilityDistribution) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(10);
    for (auto& v : z) v = u(rng);
    if (trial % 3 == 0) z[trial % 10] = kNegInf;
    const auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Activations, SoftmaxBackwardMatchesFiniteDifferences) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(6), c(6);
    for (auto& v : z) v = u(rng);
    for (auto& v : c) v = u(rng);
    auto loss = [&]() {
      const auto p = softmax(z);
      double acc = 0.0;
      for (size_t i = 0; i < p.size(); ++i) acc += c[i] * p[i];
      return acc;
    };
    const auto dz = softmax_backward(softmax(z), c);
    for (size_t i = 0; i < z.size(); ++i) {
      const double saved = z[i];
      z[i] = saved + h;
      const double fp = loss();
      z[i] = saved - h;
      const double fm = loss();
      z[i] = saved;
      EXPECT_NEAR(dz[i], (fp - fm) / (2 * h), 1e-7);
    }
  }
}

TEST(Activations, ReluBackwardAwayFromKink) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(8), c(8);
    for (auto& v : z) v = u(rng);
    for (auto& v : c) v = u(rng);
    auto loss = [&]() {
      const auto a = relu(z);
      double acc = 0.0;
      for (size_t i = 0; i < a.size(); ++i) acc += c[i] * a[i];
      return acc;
    };
    const auto dz = relu_backward(z, c);
    for (size_t i = 0; i < z.size(); ++i) {
      if (std::abs(z[i]) < 10 * h) continue;  // skip points next to the kink
      const double saved = z[i];
      z[i] = saved + h;
      const double fp = loss();
      z[i] = saved - h;
      const double fm = loss();
      z[i] = saved;
      EXPECT_NEAR(dz[i], (fp - fm) / (2 * h), 1e-7);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

TEST(AdamW, ZeroGradZeroDecayIsIdentity) {
  ParamTensor p("w", 2, 3);
  for (size_t i = 0; i < p.value.data.size(); ++i) p.value.data[i] = 0.1 * (i + 1);
  const Matrix before = p.value;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(p, cfg);
  adamw_step(p, cfg);
  EXPECT_EQ(p.value.data, before.data);
  EXPECT_EQ(p.step_count, 2);
}

TEST(AdamW, FirstStepIsSignedUnitStep) {
  // Evaluating the update recurrence by hand at t=1 with constant gradient g
  // and no decay gives value -= lr * g / (|g| + eps).
  ParamTensor p("w", 1, 3);
  p.value.data = {1.0, -2.0, 0.5};
  p.grad.data = {0.3, -4.0, 1e-3};
  AdamWConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  const std::vector<double> before = p.value.data;
  adamw_step(p, cfg);
  for (int i = 0; i < 3; ++i) {
    const double g = std::vector<double>{0.3, -4.0, 1e-3}[i];
    EXPECT_NEAR(p.value.data[i], before[i] - cfg.lr * g / (std::abs(g) + cfg.eps), 1e-12);
  }
}

TEST(AdamW, DecoupledDecayShrinksValues) {
  ParamTensor p("w", 1, 2);
  p.value.data = {2.0, -3.0};
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  adamw_step(p, cfg);  // grad == 0
  EXPECT_DOUBLE_EQ(p.value.data[0], 2.0 * (1.0 - cfg.lr * cfg.weight_decay));
  EXPECT_DOUBLE_EQ(p.value.data[1], -3.0 * (1.0 - cfg.lr * cfg.weight_decay));
}

TEST(AdamW, NonFiniteGradientNamesParameter) {
  ParamTensor p("gate.infer", 1, 2);
  p.grad.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
  try {
    adamw_step(p, AdamWConfig{});
    FAIL() << "expected exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("gate.infer"), std::string::npos);
  }
}

TEST(AdamW, StepCountMonotone) {
  ParamTensor p("w", 1, 1);
  for (int i = 1; i <= 5; ++i) {
    adamw_step(p, AdamWConfig{});
    EXPECT_EQ(p.step_count, i);
  }
}

// ---------------------------------------------------------------------------
// Gradient checker
// ---------------------------------------------------------------------------

TEST(GradCheck, QuadraticLoss) {
  ParamTensor theta("theta", 2, 3);
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : theta.value.data) v = u(rng);

  auto loss = [&]() {
    double acc = 0.0;
    for (double v : theta.value.data) acc += v * v;
    return acc;
  };
  for (size_t i = 0; i < theta.value.data.size(); ++i) theta.grad.data[i] = 2.0 * theta.value.data[i];

  const auto report = grad_check(loss, {&theta}, 1e-5);
  EXPECT_LT(report.max_rel_err, 1e-8) << report.summary();
}

TEST(GradCheck, FlagsWrongGradient) {
  ParamTensor theta("theta", 1, 2);
  theta.value.data = {0.7, -0.4};
  auto loss = [&]() { return theta.value.data[0] * theta.value.data[0] + theta.value.data[1]; };
  theta.grad.data = {2.0 * 0.7, 5.0};  // second entry is wrong on purpose
  const auto report = grad_check(loss, {&theta}, 1e-5);
  EXPECT_FALSE(report.within(1e-4));
  EXPECT_EQ(report.groups[0].worst_index, 1);
}

}  // namespace
}  // namespace moerank
