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
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "moerank/rng.hpp"

namespace moerank {

/// Reserved id 0: every sparse vocabulary maps unseen values to this row.
constexpr int kOovId = 0;
inline const char* kOovToken = "<oov>";

struct Vocabulary {
  std::vector<std::string> id_to_value{kOovToken};
  std::unordered_map<std::string, int> value_to_id;

  int add(const std::string& v) {
    auto it = value_to_id.find(v);
    if (it != value_to_id.end()) return it->second;
    int id = static_cast<int>(id_to_value.size());
    id_to_value.push_back(v);
    value_to_id.emplace(v, id);
    return id;
  }

  int lookup(const std::string& v) const {
    auto it = value_to_id.find(v);
    return it == value_to_id.end() ? kOovId : it->second;
  }

  int size() const { return static_cast<int>(id_to_value.size()); }
};

/// Per-feature min-max statistics, computed on the training split only.
struct NormStats {
  std::vector<double> fmin;
  std::vector<double> fmax;

  double normalize(int feature, double raw) const {
    const double lo = fmin[feature];
    const double hi = fmax[feature];
    if (hi <= lo) return 0.0;
    return (raw - lo) / (hi - lo);
  }
};

/// Two-level category hierarchy in vocabulary-id space. parent[sc] is the
/// vocabulary id of the sub-category's unique top-category; parent[0] == 0.
struct CategoryTree {
  std::vector<int> parent;

  int parent_of(int sc_id) const {
    if (sc_id < 0 || sc_id >= static_cast<int>(parent.size())) return kOovId;
    return parent[sc_id];
  }
};

/// Declares column roles of a record file plus the SC -> TC parent map.
/// Model-facing sparse features are ordered [sc, tc, extra...].
struct Schema {
  std::string session_column = "session";
  std::string label_column = "label";
  std::string sc_column = "sc";
  std::string tc_name = "tc";  // derived feature name, not a file column
  std::vector<std::string> sparse_columns;  // extras beyond sc/tc
  std::vector<std::string> numeric_columns;
  std::map<std::string, std::string> parent_map;  // raw sc value -> raw tc value

  int n_sparse() const { return 2 + static_cast<int>(sparse_columns.size()); }
  int n_numeric() const { return static_cast<int>(numeric_columns.size()); }

  std::vector<std::string> sparse_feature_names() const {
    std::vector<std::string> names{sc_column, tc_name};
    names.insert(names.end(), sparse_columns.begin(), sparse_columns.end());
    return names;
  }
};

struct Example {
  std::vector<int> sparse_ids;  // vocabulary ids, order [sc, tc, extra...]
  std::vector<double> numeric;  // normalized
  int label = 0;

  int sc_id() const { return sparse_ids[0]; }
  int tc_id() const { return sparse_ids[1]; }
};

/// One query session: the ranked item list sharing a single sub-category.
struct Session {
  std::string id;
  int sc_id = 0;
  int tc_id = 0;
  std::vector<Example> examples;
};

struct Dataset {
  Schema schema;
  std::vector<Vocabulary> vocabs;  // aligned with schema.sparse_feature_names()
  NormStats stats;
  CategoryTree tree;
  std::vector<Session> train;
  std::vector<Session> test;

  int n_sparse() const { return schema.n_sparse(); }
  int n_numeric() const { return schema.n_numeric(); }

  std::vector<int> vocab_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(vocabs.size());
    for (const auto& v : vocabs) sizes.push_back(v.size());
    return sizes;
  }

  void validate_hierarchy() const {
    for (const auto* split : {&train, &test}) {
      for (const auto& s : *split) {
        if (s.tc_id != tree.parent_of(s.sc_id))
          throw std::runtime_error("dataset: session " + s.id + " violates sc->tc hierarchy");
        for (const auto& e : s.examples) {
          if (e.sc_id() != s.sc_id || e.tc_id() != s.tc_id)
            throw std::runtime_error("dataset: example in session " + s.id + " has mismatched category ids");
        }
      }
    }
  }
};

struct Batch {
  std::vector<const Session*> sessions;
  int n_examples = 0;
};

/// Splits sessions into batches of at least `batch_size` examples (except
/// possibly the last). Sessions are never split across batches, so a batch
/// always holds whole query sessions; order is shuffled under the seed.
inline std::vector<Batch> batch_iter(const std::vector<Session>& sessions, int batch_size,
                                     std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_iter: batch_size must be >= 1");
  std::vector<int> order(sessions.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  Batch current;
  for (int idx : order) {
    const Session& s = sessions[idx];
    current.sessions.push_back(&s);
    current.n_examples += static_cast<int>(s.examples.size());
    if (current.n_examples >= batch_size) {
      batches.push_back(std::move(current));
      current = Batch{};
    }
  }
  if (!current.sessions.empty()) batches.push_back(std::move(current));
  return batches;
}

}  // namespace moerank
