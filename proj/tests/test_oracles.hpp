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

// Brute-force reference implementations written straight from the metric
// definitions. Deliberately naive and kept independent of the library's
// implementation paths: all-pairs loops, no sorting tricks.

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <vector>

#include "moerank/data.hpp"

namespace moerank::oracle {

inline std::optional<double> pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return num / pairs;
}

inline std::vector<int> ranking(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

inline std::optional<double> pair_auc_at(const std::vector<double>& scores,
                                         const std::vector<int>& labels, int cutoff) {
  const auto order = ranking(scores);
  std::vector<double> s;
  std::vector<int> l;
  for (int r = 0; r < std::min<int>(cutoff, static_cast<int>(order.size())); ++r) {
    s.push_back(scores[order[r]]);
    l.push_back(labels[order[r]]);
  }
  return pair_auc(s, l);
}

inline std::optional<double> ndcg(const std::vector<double>& scores, const std::vector<int>& labels,
                                  int cutoff) {
  const auto order = ranking(scores);
  const int n = static_cast<int>(scores.size());
  const int lim = cutoff > 0 ? std::min(cutoff, n) : n;
  double dcg = 0.0;
  for (int r = 0; r < lim; ++r)
    if (labels[order[r]] == 1) dcg += 1.0 / std::log2(r + 2.0);
  int n_pos = 0;
  for (int l : labels) n_pos += l;
  double idcg = 0.0;
  for (int r = 0; r < std::min(n_pos, lim); ++r) idcg += 1.0 / std::log2(r + 2.0);
  if (idcg == 0.0) return std::nullopt;
  return dcg / idcg;
}

inline double feature_importance(const std::vector<Session>& sessions, int feature) {
  double sum = 0.0;
  long counted = 0;
  for (const Session& s : sessions) {
    long pairs = 0;
    long hits = 0;
    for (const auto& a : s.examples)
      for (const auto& b : s.examples) {
        if (a.label == 1 && b.label == 0) {
          pairs += 1;
          if (a.numeric[feature] > b.numeric[feature]) hits += 1;
        }
      }
    if (pairs == 0) continue;
    sum += static_cast<double>(hits) / pairs;
    counted += 1;
  }
  return sum / counted;
}

}  // namespace moerank::oracle
