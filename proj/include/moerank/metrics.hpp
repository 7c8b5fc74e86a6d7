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
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moerank/data.hpp"
#include "moerank/model.hpp"

namespace moerank {

struct SessionScores {
  const Session* session = nullptr;
  std::vector<double> scores;  // aligned with session->examples
};

namespace detail {

/// Stable ranking by descending score; ties keep input order.
inline std::vector<int> rank_order(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace detail

/// Pairwise AUC of one session: concordant (positive, negative) pairs over
/// all such pairs, ties counted 0.5. Empty when either class is missing.
inline std::optional<double> session_auc_single(const std::vector<double>& scores,
                                                const std::vector<int>& labels) {
  std::vector<double> neg;
  std::vector<double> pos;
  for (size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) return std::nullopt;
  std::sort(neg.begin(), neg.end());
  double num = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    num += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return num / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// AUC restricted to the top-`cutoff` ranked items of the session.
inline std::optional<double> session_auc_at(const std::vector<double>& scores,
                                            const std::vector<int>& labels, int cutoff) {
  const std::vector<int> order = detail::rank_order(scores);
  const int lim = std::min<int>(cutoff, static_cast<int>(order.size()));
  std::vector<double> s(lim);
  std::vector<int> l(lim);
  for (int r = 0; r < lim; ++r) {
    s[r] = scores[order[r]];
    l[r] = labels[order[r]];
  }
  return session_auc_single(s, l);
}

/// Binary-gain NDCG with optional cutoff (0 means no cutoff). Empty when the
/// session has no positive item (IDCG = 0).
inline std::optional<double> ndcg_single(const std::vector<double>& scores,
                                         const std::vector<int>& labels, int cutoff = 0) {
  const int n = static_cast<int>(scores.size());
  const int lim = cutoff > 0 ? std::min(cutoff, n) : n;
  const std::vector<int> order = detail::rank_order(scores);
  double dcg = 0.0;
  for (int r = 0; r < lim; ++r) dcg += labels[order[r]] / std::log2(r + 2.0);
  int n_pos = 0;
  for (int l : labels) n_pos += l;
  double idcg = 0.0;
  for (int r = 0; r < std::min(n_pos, lim); ++r) idcg += 1.0 / std::log2(r + 2.0);
  if (idcg == 0.0) return std::nullopt;
  return dcg / idcg;
}

struct SessionMetricReport {
  double auc = std::numeric_limits<double>::quiet_NaN();
  double auc_at_10 = std::numeric_limits<double>::quiet_NaN();
  double ndcg = std::numeric_limits<double>::quiet_NaN();
  double ndcg_at_10 = std::numeric_limits<double>::quiet_NaN();
  long n_sessions_total = 0;
  long n_sessions_counted = 0;  // eligible for full AUC (>=1 pos and >=1 neg)
  long n_skipped_auc = 0;
  long n_counted_auc10 = 0;
  long n_counted_ndcg = 0;
  long n_counted_ndcg10 = 0;

  /// Explicit marker for "no countable session": metrics stay NaN.
  bool empty() const { return n_sessions_counted == 0; }
};

/// Session-averaged ranking metrics. Sessions missing a class are excluded
/// from the affected metric and counted separately, per metric.
inline SessionMetricReport session_metrics(const std::vector<SessionScores>& scored, int cutoff = 10) {
  SessionMetricReport r;
  double auc_sum = 0, auc10_sum = 0, ndcg_sum = 0, ndcg10_sum = 0;
  for (const auto& ss : scored) {
    r.n_sessions_total += 1;
    std::vector<int> labels;
    labels.reserve(ss.session->examples.size());
    for (const auto& e : ss.session->examples) labels.push_back(e.label);

    if (auto a = session_auc_single(ss.scores, labels)) {
      auc_sum += *a;
      r.n_sessions_counted += 1;
    } else {
      r.n_skipped_auc += 1;
    }
    if (auto a = session_auc_at(ss.scores, labels, cutoff)) {
      auc10_sum += *a;
      r.n_counted_auc10 += 1;
    }
    if (auto v = ndcg_single(ss.scores, labels, 0)) {
      ndcg_sum += *v;
      r.n_counted_ndcg += 1;
    }
    if (auto v = ndcg_single(ss.scores, labels, cutoff)) {
      ndcg10_sum += *v;
      r.n_counted_ndcg10 += 1;
    }
  }
  if (r.n_sessions_counted > 0) r.auc = auc_sum / r.n_sessions_counted;
  if (r.n_counted_auc10 > 0) r.auc_at_10 = auc10_sum / r.n_counted_auc10;
  if (r.n_counted_ndcg > 0) r.ndcg = ndcg_sum / r.n_counted_ndcg;
  if (r.n_counted_ndcg10 > 0) r.ndcg_at_10 = ndcg10_sum / r.n_counted_ndcg10;
  return r;
}

inline std::string metric_report_text(const SessionMetricReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "auc=" << r.auc << "\n"
     << "auc_at_10=" << r.auc_at_10 << "\n"
     << "ndcg=" << r.ndcg << "\n"
     << "ndcg_at_10=" << r.ndcg_at_10 << "\n"
     << "n_sessions=" << r.n_sessions_total << "\n"
     << "n_sessions_counted=" << r.n_sessions_counted << "\n"
     << "n_skipped_auc=" << r.n_skipped_auc << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Feature importance (per-feature session-pair agreement with purchases)
// ---------------------------------------------------------------------------

/// Session-averaged fraction of (purchased, not-purchased) item pairs a
/// numeric feature orders correctly. Strict inequality: ties score zero.
inline double feature_importance(const std::vector<Session>& sessions, int feature) {
  double fi_sum = 0.0;
  long counted = 0;
  for (const Session& s : sessions) {
    long pairs = 0;
    long correct = 0;
    for (const auto& a : s.examples) {
      if (a.label != 1) continue;
      for (const auto& b : s.examples) {
        if (b.label != 0) continue;
        pairs += 1;
        if (a.numeric[feature] > b.numeric[feature]) correct += 1;
      }
    }
    if (pairs == 0) continue;
    fi_sum += static_cast<double>(correct) / static_cast<double>(pairs);
    counted += 1;
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN() : fi_sum / counted;
}

// ---------------------------------------------------------------------------
// Gate-vector clustering
// ---------------------------------------------------------------------------

struct GateVectorRecord {
  int sc_id = 0;
  int tc_id = 0;
  std::string sc_label;
  std::string tc_label;
  std::string group;
  std::vector<double> gate_vector;
};

/// Mean cross-group / mean within-group pairwise distance of gate vectors.
/// Higher means semantically grouped categories pick more similar experts.
/// Degenerate inputs: all-identical vectors give 1; zero within-group spread
/// with separated groups gives +inf.
inline double gate_cluster_separation(const std::vector<GateVectorRecord>& records) {
  std::map<std::string, int> group_sizes;
  for (const auto& r : records) group_sizes[r.group] += 1;
  if (group_sizes.size() < 2)
    throw std::invalid_argument("gate_cluster_separation: need at least two semantic groups");
  for (const auto& [g, n] : group_sizes)
    if (n < 2)
      throw std::invalid_argument("gate_cluster_separation: group '" + g + "' has fewer than 2 records");

  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  double within = 0.0, cross = 0.0;
  long n_within = 0, n_cross = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    for (size_t j = i + 1; j < records.size(); ++j) {
      const double d = dist(records[i].gate_vector, records[j].gate_vector);
      if (records[i].group == records[j].group) {
        within += d;
        n_within += 1;
      } else {
        cross += d;
        n_cross += 1;
      }
    }
  }
  const double w = within / n_within;
  const double c = cross / n_cross;
  if (w == 0.0 && c == 0.0) return 1.0;
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  return c / w;
}

enum class GateVectorSource { Probs, PInfer };

/// One gate vector per distinct sub-category, averaged over its sessions
/// (they coincide for query-side gate inputs in evaluation mode).
inline std::vector<GateVectorRecord> export_gate_vectors(
    const ModelParams& params, const std::vector<Session>& sessions,
    const std::vector<Vocabulary>& vocabs,
    const std::map<std::string, std::string>& group_map = {},
    GateVectorSource source = GateVectorSource::Probs) {
  std::map<int, GateVectorRecord> by_sc;
  std::map<int, int> counts;
  for (const Session& s : sessions) {
    const GateDecision d = gate_for_session(params, s);
    const std::vector<double>& v = source == GateVectorSource::Probs ? d.gate_probs : d.p_infer;
    auto it = by_sc.find(s.sc_id);
    if (it == by_sc.end()) {
      GateVectorRecord rec;
      rec.sc_id = s.sc_id;
      rec.tc_id = s.tc_id;
      rec.sc_label = vocabs[0].id_to_value[s.sc_id];
      rec.tc_label = vocabs[1].id_to_value[s.tc_id];
      auto g = group_map.find(rec.tc_label);
      rec.group = g == group_map.end() ? rec.tc_label : g->second;
      rec.gate_vector = v;
      by_sc.emplace(s.sc_id, std::move(rec));
      counts[s.sc_id] = 1;
    } else {
      for (size_t i = 0; i < v.size(); ++i) it->second.gate_vector[i] += v[i];
      counts[s.sc_id] += 1;
    }
  }
  std::vector<GateVectorRecord> out;
  out.reserve(by_sc.size());
  for (auto& [sc, rec] : by_sc) {
    for (double& x : rec.gate_vector) x /= counts[sc];
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string gate_vector_table(const std::vector<GateVectorRecord>& records) {
  std::ostringstream os;
  os << "sc_id\ttc_id\tgroup";
  const size_t n = records.empty() ? 0 : records.front().gate_vector.size();
  for (size_t i = 1; i <= n; ++i) os << "\tv" << i;
  os << "\n";
  for (const auto& r : records) {
    os << r.sc_label << "\t" << r.tc_label << "\t" << r.group;
    for (double v : r.gate_vector) os << "\t" << v;
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Sparse-value concentration (brand analysis)
// ---------------------------------------------------------------------------

struct ConcentrationRow {
  std::string category;     // tc label
  long positives = 0;       // positive labels in the category
  int distinct_values = 0;  // distinct sparse values among positives
  int covering_values = 0;  // values covering >= 80% of positives
  double covering_fraction = 0.0;
};

/// For each top-category: how many distinct values of one sparse feature
/// cover 80% of the positive labels. Concentrated categories need few.
inline std::vector<ConcentrationRow> sparse_concentration(const std::vector<Session>& sessions,
                                                          int sparse_feature,
                                                          const std::vector<Vocabulary>& vocabs) {
  std::map<int, std::map<int, long>> pos_by_tc_value;
  for (const Session& s : sessions)
    for (const Example& e : s.examples)
      if (e.label == 1) pos_by_tc_value[s.tc_id][e.sparse_ids[sparse_feature]] += 1;

  std::vector<ConcentrationRow> rows;
  for (const auto& [tc, by_value] : pos_by_tc_value) {
    ConcentrationRow row;
    row.category = vocabs[1].id_to_value[tc];
    std::vector<long> counts;
    for (const auto& [value, n] : by_value) {
      row.positives += n;
      counts.push_back(n);
    }
    row.distinct_values = static_cast<int>(counts.size());
    std::sort(counts.rbegin(), counts.rend());
    long acc = 0;
    for (long c : counts) {
      acc += c;
      row.covering_values += 1;
      if (static_cast<double>(acc) >= 0.8 * static_cast<double>(row.positives)) break;
    }
    row.covering_fraction = static_cast<double>(row.covering_values) / row.distinct_values;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace moerank
