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

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "moerank/data.hpp"

namespace moerank {

/// One record as read from a file: raw string values, unnormalized numerics.
struct RawRecord {
  std::string session;
  std::string sc;
  std::vector<std::string> sparse;  // aligned with schema.sparse_columns
  std::vector<double> numeric;      // aligned with schema.numeric_columns
  int label = 0;
};

// ---------------------------------------------------------------------------
// Schema / stats files
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json schema_to_json(const Schema& s) {
  nlohmann::ordered_json j;
  j["session_column"] = s.session_column;
  j["label_column"] = s.label_column;
  j["sc_column"] = s.sc_column;
  j["sparse_columns"] = s.sparse_columns;
  j["numeric_columns"] = s.numeric_columns;
  j["normalization"] = "minmax";
  j["parent_map"] = s.parent_map;
  return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  s.session_column = j.at("session_column").get<std::string>();
  s.label_column = j.at("label_column").get<std::string>();
  s.sc_column = j.at("sc_column").get<std::string>();
  s.sparse_columns = j.at("sparse_columns").get<std::vector<std::string>>();
  s.numeric_columns = j.at("numeric_columns").get<std::vector<std::string>>();
  s.parent_map = j.at("parent_map").get<std::map<std::string, std::string>>();
  return s;
}

inline void save_schema(const std::string& path, const Schema& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schema file: " + path);
  out << schema_to_json(s).dump(2) << "\n";
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  nlohmann::json j;
  in >> j;
  return schema_from_json(j);
}

inline void save_stats(const std::string& path, const Schema& schema, const NormStats& stats) {
  nlohmann::ordered_json j;
  j["kind"] = "minmax";
  nlohmann::ordered_json feats;
  for (size_t i = 0; i < schema.numeric_columns.size(); ++i) {
    feats[schema.numeric_columns[i]] = {{"min", stats.fmin[i]}, {"max", stats.fmax[i]}};
  }
  j["features"] = feats;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stats file: " + path);
  out << j.dump(2) << "\n";
}

inline NormStats load_stats(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stats file: " + path);
  nlohmann::json j;
  in >> j;
  NormStats stats;
  for (const auto& col : schema.numeric_columns) {
    const auto& f = j.at("features").at(col);
    stats.fmin.push_back(f.at("min").get<double>());
    stats.fmax.push_back(f.at("max").get<double>());
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Record files: UTF-8, one flat JSON object per line.
// ---------------------------------------------------------------------------

inline void write_records(const std::string& path, const Schema& schema,
                          const std::vector<RawRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write record file: " + path);
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j[schema.session_column] = r.session;
    j[schema.sc_column] = r.sc;
    for (size_t i = 0; i < schema.sparse_columns.size(); ++i) j[schema.sparse_columns[i]] = r.sparse[i];
    for (size_t i = 0; i < schema.numeric_columns.size(); ++i) j[schema.numeric_columns[i]] = r.numeric[i];
    j[schema.label_column] = r.label;
    out << j.dump() << "\n";
  }
}

/// Parses a newline-delimited record file. A missing required column is an
/// error naming both the column and the 1-based line number.
inline std::vector<RawRecord> load_raw_records(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open record file: " + path);
  std::vector<RawRecord> records;
  std::string line;
  long line_no = 0;
  auto require = [&](const nlohmann::json& j, const std::string& col) -> const nlohmann::json& {
    auto it = j.find(col);
    if (it == j.end())
      throw std::runtime_error("record file " + path + ": missing column '" + col + "' at line " +
                               std::to_string(line_no));
    return *it;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("record file " + path + ": malformed line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    RawRecord r;
    r.session = require(j, schema.session_column).get<std::string>();
    r.sc = require(j, schema.sc_column).get<std::string>();
    for (const auto& col : schema.sparse_columns) r.sparse.push_back(require(j, col).get<std::string>());
    for (const auto& col : schema.numeric_columns) r.numeric.push_back(require(j, col).get<double>());
    r.label = require(j, schema.label_column).get<int>();
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

namespace detail {

/// Groups records into sessions by key, keeping first-occurrence order.
/// All records of a session must share one sc value.
inline std::vector<std::vector<const RawRecord*>> group_by_session(const std::vector<RawRecord>& records) {
  std::vector<std::vector<const RawRecord*>> groups;
  std::unordered_map<std::string, size_t> index;
  for (const auto& r : records) {
    auto it = index.find(r.session);
    if (it == index.end()) {
      index.emplace(r.session, groups.size());
      groups.push_back({&r});
    } else {
      if (groups[it->second].front()->sc != r.sc)
        throw std::runtime_error("session '" + r.session + "' mixes sub-categories '" +
                                 groups[it->second].front()->sc + "' and '" + r.sc + "'");
      groups[it->second].push_back(&r);
    }
  }
  return groups;
}

inline std::string parent_of_raw(const Schema& schema, const std::string& sc) {
  auto it = schema.parent_map.find(sc);
  if (it == schema.parent_map.end())
    throw std::runtime_error("schema parent_map has no entry for sub-category '" + sc + "'");
  return it->second;
}

}  // namespace detail

/// Maps raw records to normalized sessions using an existing vocabulary and
/// normalization stats (the evaluation path: unseen sparse values become OOV).
inline std::vector<Session> map_records(const Schema& schema, const std::vector<RawRecord>& records,
                                        const std::vector<Vocabulary>& vocabs, const NormStats& stats) {
  std::vector<Session> sessions;
  for (const auto& group : detail::group_by_session(records)) {
    Session s;
    s.id = group.front()->session;
    s.sc_id = vocabs[0].lookup(group.front()->sc);
    const std::string tc_raw = detail::parent_of_raw(schema, group.front()->sc);
    s.tc_id = vocabs[1].lookup(tc_raw);
    for (const RawRecord* r : group) {
      Example e;
      e.sparse_ids.push_back(s.sc_id);
      e.sparse_ids.push_back(s.tc_id);
      for (size_t i = 0; i < r->sparse.size(); ++i) e.sparse_ids.push_back(vocabs[2 + i].lookup(r->sparse[i]));
      e.numeric.resize(r->numeric.size());
      for (size_t i = 0; i < r->numeric.size(); ++i) e.numeric[i] = stats.normalize(static_cast<int>(i), r->numeric[i]);
      e.label = r->label;
      s.examples.push_back(std::move(e));
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

/// Builds a full dataset. Vocabularies and normalization stats come from the
/// train records only; test records are mapped through them afterwards, so
/// nothing from the test split can leak into preprocessing.
inline Dataset build_dataset(const Schema& schema, const std::vector<RawRecord>& train_records,
                             const std::vector<RawRecord>& test_records) {
  Dataset ds;
  ds.schema = schema;
  ds.vocabs.resize(schema.n_sparse());

  for (const auto& r : train_records) {
    int sc = ds.vocabs[0].add(r.sc);
    int tc = ds.vocabs[1].add(detail::parent_of_raw(schema, r.sc));
    if (static_cast<int>(ds.tree.parent.size()) <= sc) ds.tree.parent.resize(sc + 1, kOovId);
    ds.tree.parent[sc] = tc;
    for (size_t i = 0; i < r.sparse.size(); ++i) ds.vocabs[2 + i].add(r.sparse[i]);
  }
  if (ds.tree.parent.empty()) ds.tree.parent.resize(1, kOovId);

  const int m = schema.n_numeric();
  ds.stats.fmin.assign(m, std::numeric_limits<double>::infinity());
  ds.stats.fmax.assign(m, -std::numeric_limits<double>::infinity());
  for (const auto& r : train_records) {
    for (int i = 0; i < m; ++i) {
      ds.stats.fmin[i] = std::min(ds.stats.fmin[i], r.numeric[i]);
      ds.stats.fmax[i] = std::max(ds.stats.fmax[i], r.numeric[i]);
    }
  }
  if (train_records.empty()) {
    ds.stats.fmin.assign(m, 0.0);
    ds.stats.fmax.assign(m, 1.0);
  }

  ds.train = map_records(schema, train_records, ds.vocabs, ds.stats);
  ds.test = map_records(schema, test_records, ds.vocabs, ds.stats);
  return ds;
}

/// Loads a train record file (and optional test file) into a dataset.
inline Dataset load_records(const std::string& train_path, const Schema& schema,
                            const std::string& test_path = "") {
  auto train = load_raw_records(train_path, schema);
  std::vector<RawRecord> test;
  if (!test_path.empty()) test = load_raw_records(test_path, schema);
  return build_dataset(schema, train, test);
}

}  // namespace moerank
