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
#include <vector>

#include "moerank/record_io.hpp"
#include "moerank/rng.hpp"

namespace moerank {

/// Synthetic two-level-category ranking data. Each sub-category owns a
/// ground-truth linear scorer whose weights are the parent top-category's
/// base vector plus a small per-SC jitter: sibling SCs rank items almost the
/// same way, different TCs rank them very differently. That inhomogeneity is
/// the structure the gate constraints are meant to exploit.
struct SynthSpec {
  int n_tc = 4;
  int n_sc_per_tc = 4;       // regular-size SCs per TC
  int small_sc_per_tc = 1;   // additional low-data SCs per TC (size skew)
  int sessions_per_sc = 2000;
  int small_sessions = 200;
  int items_per_session = 10;
  int n_numeric = 8;
  int n_extra_sparse = 2;    // item-side sparse features (brand-like)
  int extra_vocab = 50;
  double tc_weight_scale = 1.0;   // spread of TC base vectors around all-ones
  double sc_weight_jitter = 0.1;  // per-SC deviation from the TC base
  double sparse_effect_scale = 0.25;
  double label_noise = 0.05;       // per-item flip probability
  double positive_fraction = 0.2;  // top items by true score become positives
  double test_fraction = 0.1;
  std::vector<double> weight_override;  // when set, every SC uses exactly these weights
  std::uint64_t seed = 1;

  int scs_per_tc() const { return n_sc_per_tc + small_sc_per_tc; }
  int n_sc_total() const { return n_tc * scs_per_tc(); }

  void validate() const {
    if (n_tc < 1 || n_sc_per_tc < 1 || small_sc_per_tc < 0 || sessions_per_sc < 1 ||
        items_per_session < 1 || n_numeric < 1 || n_extra_sparse < 0)
      throw std::invalid_argument("SynthSpec: all counts must be >= 1 (small_sc_per_tc, n_extra_sparse >= 0)");
    if (small_sc_per_tc > 0 && small_sessions < 1)
      throw std::invalid_argument("SynthSpec: small_sessions must be >= 1");
    if (n_extra_sparse > 0 && extra_vocab < 1)
      throw std::invalid_argument("SynthSpec: extra_vocab must be >= 1");
    if (!(label_noise >= 0.0 && label_noise < 0.5))
      throw std::invalid_argument("SynthSpec: label_noise must be in [0, 0.5)");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
      throw std::invalid_argument("SynthSpec: positive_fraction must be in (0, 1)");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
      throw std::invalid_argument("SynthSpec: test_fraction must be in [0, 1)");
    if (!weight_override.empty() && static_cast<int>(weight_override.size()) != n_numeric)
      throw std::invalid_argument("SynthSpec: weight_override must have n_numeric entries");
  }
};

struct SynthTruth {
  std::vector<std::string> tc_labels;
  std::vector<std::string> sc_labels;
  std::vector<int> sc_parent;                     // sc index -> tc index
  std::vector<int> sc_train_sessions;             // sessions per sc in the train split
  std::vector<std::vector<double>> sc_weights;    // sc index -> numeric weights
  // sparse_effects[feature][tc][value]: additive score effect of a sparse value
  std::vector<std::vector<std::vector<double>>> sparse_effects;
};

struct RawSynthetic {
  Schema schema;
  std::vector<RawRecord> train;
  std::vector<RawRecord> test;
  SynthTruth truth;
};

struct SyntheticData {
  Dataset dataset;
  SynthTruth truth;
};

namespace detail {

/// Single-uniform-draw sampler over ranks 0..n-1 with weight 1/(1+rank).
/// Inverse-CDF keeps the draw portable and exactly reproducible.
class ZipfSampler {
 public:
  explicit ZipfSampler(int n) : cum_(n) {
    double acc = 0.0;
    for (int r = 0; r < n; ++r) {
      acc += 1.0 / (1.0 + r);
      cum_[r] = acc;
    }
  }
  int draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cum_.back());
    const double x = u(rng);
    auto it = std::lower_bound(cum_.begin(), cum_.end(), x);
    return static_cast<int>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
};

}  // namespace detail

inline RawSynthetic generate_synthetic_raw(const SynthSpec& spec) {
  spec.validate();
  RawSynthetic out;
  SynthTruth& truth = out.truth;

  const int n_sc = spec.n_sc_total();
  const int m = spec.n_numeric;

  // Ground-truth weights. Base vector all-ones so that with zero scale and
  // jitter the single-feature case degenerates to weight exactly 1.
  {
    Rng rng = make_rng(spec.seed, "synth.weights");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> tc_base(spec.n_tc, std::vector<double>(m));
    for (int t = 0; t < spec.n_tc; ++t) {
      truth.tc_labels.push_back("tc" + std::to_string(t));
      for (int f = 0; f < m; ++f) tc_base[t][f] = spec.tc_weight_scale * gauss(rng);
    }
    for (int t = 0; t < spec.n_tc; ++t) {
      for (int k = 0; k < spec.scs_per_tc(); ++k) {
        const int s = static_cast<int>(truth.sc_labels.size());
        truth.sc_labels.push_back("sc" + std::to_string(s));
        truth.sc_parent.push_back(t);
        std::vector<double> w(m);
        for (int f = 0; f < m; ++f) w[f] = 1.0 + tc_base[t][f] + spec.sc_weight_jitter * gauss(rng);
        if (!spec.weight_override.empty()) w = spec.weight_override;
        truth.sc_weights.push_back(std::move(w));
      }
    }

    truth.sparse_effects.assign(
        spec.n_extra_sparse,
        std::vector<std::vector<double>>(spec.n_tc, std::vector<double>(spec.extra_vocab, 0.0)));
    for (int e = 0; e < spec.n_extra_sparse; ++e)
      for (int t = 0; t < spec.n_tc; ++t)
        for (int v = 0; v < spec.extra_vocab; ++v)
          truth.sparse_effects[e][t][v] = spec.sparse_effect_scale * gauss(rng);
  }

  // Per-SC popularity order of sparse values: a Zipf draw over ranks mapped
  // through an SC-specific permutation, so top "brands" differ by category.
  std::vector<std::vector<std::vector<int>>> popularity(n_sc);
  {
    Rng rng = make_rng(spec.seed, "synth.popularity");
    for (int s = 0; s < n_sc; ++s) {
      popularity[s].resize(spec.n_extra_sparse);
      for (int e = 0; e < spec.n_extra_sparse; ++e) {
        std::vector<int>& perm = popularity[s][e];
        perm.resize(spec.extra_vocab);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
      }
    }
  }

  // Schema
  Schema& schema = out.schema;
  schema.session_column = "session";
  schema.label_column = "label";
  schema.sc_column = "sc";
  for (int e = 0; e < spec.n_extra_sparse; ++e) schema.sparse_columns.push_back("sp" + std::to_string(e));
  for (int f = 0; f < m; ++f) schema.numeric_columns.push_back("f" + std::to_string(f));
  for (int s = 0; s < n_sc; ++s)
    schema.parent_map[truth.sc_labels[s]] = truth.tc_labels[truth.sc_parent[s]];

  // Sessions
  truth.sc_train_sessions.assign(n_sc, 0);
  Rng rng = make_rng(spec.seed, "synth.sessions");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const detail::ZipfSampler zipf(spec.extra_vocab > 0 ? spec.extra_vocab : 1);
  const int n_pos = std::max(1, static_cast<int>(std::llround(spec.positive_fraction * spec.items_per_session)));

  for (int s = 0; s < n_sc; ++s) {
    const int t = truth.sc_parent[s];
    const bool small = (s % spec.scs_per_tc()) >= spec.n_sc_per_tc;
    const int n_sessions = small ? spec.small_sessions : spec.sessions_per_sc;
    for (int j = 0; j < n_sessions; ++j) {
      const int n_items = spec.items_per_session;
      std::vector<RawRecord> items(n_items);
      std::vector<double> score(n_items);
      for (int i = 0; i < n_items; ++i) {
        RawRecord& r = items[i];
        r.session = truth.sc_labels[s] + ":q" + std::to_string(j);
        r.sc = truth.sc_labels[s];
        r.numeric.resize(m);
        double g = 0.0;
        for (int f = 0; f < m; ++f) {
          r.numeric[f] = unif(rng);
          g += truth.sc_weights[s][f] * r.numeric[f];
        }
        for (int e = 0; e < spec.n_extra_sparse; ++e) {
          const int value = popularity[s][e][zipf.draw(rng)];
          r.sparse.push_back("v" + std::to_string(value));
          g += truth.sparse_effects[e][t][value];
        }
        score[i] = g;
      }
      std::vector<int> order(n_items);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
      for (int rank = 0; rank < n_items; ++rank) items[order[rank]].label = rank < n_pos ? 1 : 0;
      for (int i = 0; i < n_items; ++i)
        if (unif(rng) < spec.label_noise) items[i].label = 1 - items[i].label;

      // Even spread of test sessions across the generation order.
      const bool is_test =
          std::floor((j + 1) * spec.test_fraction) > std::floor(j * spec.test_fraction);
      auto& dst = is_test ? out.test : out.train;
      for (auto& r : items) dst.push_back(std::move(r));
      if (!is_test) truth.sc_train_sessions[s] += 1;
    }
  }
  return out;
}

inline SyntheticData generate_synthetic(const SynthSpec& spec) {
  RawSynthetic raw = generate_synthetic_raw(spec);
  SyntheticData out;
  out.dataset = build_dataset(raw.schema, raw.train, raw.test);
  out.truth = std::move(raw.truth);
  return out;
}

}  // namespace moerank
