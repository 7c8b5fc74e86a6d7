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

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "moerank/data.hpp"
#include "moerank/metrics.hpp"
#include "moerank/model.hpp"

namespace moerank {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 256;  // examples per batch; batches hold whole sessions
  int epochs = 3;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int eval_every = 500;  // optimizer steps between validation evaluations
  double val_fraction = 0.1;
  int jobs = 0;  // parallel experiment cells; 0 = hardware concurrency

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (seeds.empty()) throw std::invalid_argument("TrainConfig: need at least one seed");
    if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
      throw std::invalid_argument("TrainConfig: val_fraction must be in [0, 1)");
  }
};

struct EvalPoint {
  long step = 0;
  LossBreakdown train_loss;  // mean over the batches since the last eval
  double val_auc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ModelParams params;  // best validation AUC (final params when never evaluated)
  std::vector<EvalPoint> history;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  long steps = 0;
  bool diverged = false;
  std::string diagnostic;
  double wall_seconds = 0.0;
};

struct EvalOutput {
  SessionMetricReport report;
  std::vector<SessionScores> scored;
};

inline EvalOutput evaluate_split(const ModelParams& p, const std::vector<Session>& sessions,
                                 int cutoff = 10) {
  EvalOutput out;
  out.scored.reserve(sessions.size());
  for (const Session& s : sessions) out.scored.push_back({&s, score_session(p, s)});
  out.report = session_metrics(out.scored, cutoff);
  return out;
}

namespace detail {

/// Deterministic by-session validation split of the train sessions.
inline void val_split(const std::vector<Session>& all, double fraction, std::uint64_t seed,
                      std::vector<const Session*>* fit, std::vector<const Session*>* val) {
  std::vector<int> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "train.valsplit");
  std::shuffle(order.begin(), order.end(), rng);
  const size_t n_val = static_cast<size_t>(fraction * all.size());
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_val ? val : fit)->push_back(&all[order[i]]);
}

inline std::vector<Batch> batches_of(const std::vector<const Session*>& sessions, int batch_size,
                                     std::uint64_t shuffle_seed) {
  std::vector<int> order(sessions.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  Batch current;
  for (int idx : order) {
    current.sessions.push_back(sessions[idx]);
    current.n_examples += static_cast<int>(sessions[idx]->examples.size());
    if (current.n_examples >= batch_size) {
      batches.push_back(std::move(current));
      current = Batch{};
    }
  }
  if (!current.sessions.empty()) batches.push_back(std::move(current));
  return batches;
}

inline double val_auc_of(const ModelParams& p, const std::vector<const Session*>& val) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<SessionScores> scored;
  scored.reserve(val.size());
  for (const Session* s : val) scored.push_back({s, score_session(p, *s)});
  return session_metrics(scored).auc;
}

}  // namespace detail

/// Trains one model. Deterministic under (config, seed, dataset): the seed
/// pins initialization, the validation split, shuffling and gating noise.
/// On divergence the last good snapshot is returned with a diagnostic.
inline TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                               const Dataset& dataset) {
  train_cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg = model_cfg.canonical();
  cfg.validate();
  const std::uint64_t seed = cfg.seed;

  TrainResult result;
  result.params = init_model_params(cfg, dataset.vocab_sizes());

  std::vector<const Session*> fit, val;
  detail::val_split(dataset.train, train_cfg.val_fraction, seed, &fit, &val);

  AdamWConfig opt;
  opt.lr = train_cfg.lr;
  opt.weight_decay = train_cfg.weight_decay;
  Rng noise_rng = make_rng(seed, "model.noise");

  ModelParams best = result.params;
  double best_auc = -std::numeric_limits<double>::infinity();
  bool evaluated = false;

  LossBreakdown interval_sum;
  long interval_batches = 0;
  auto record_eval = [&](long step) {
    EvalPoint pt;
    pt.step = step;
    if (interval_batches > 0) {
      pt.train_loss.ce = interval_sum.ce / interval_batches;
      pt.train_loss.hsc = interval_sum.hsc / interval_batches;
      pt.train_loss.adv = interval_sum.adv / interval_batches;
      pt.train_loss.total = interval_sum.total / interval_batches;
    }
    pt.val_auc = detail::val_auc_of(result.params, val);
    result.history.push_back(pt);
    interval_sum = {};
    interval_batches = 0;
    evaluated = true;
    if (!std::isnan(pt.val_auc) && pt.val_auc > best_auc) {
      best_auc = pt.val_auc;
      best = result.params;
    }
  };

  long step = 0;
  for (int epoch = 0; epoch < train_cfg.epochs && !result.diverged; ++epoch) {
    const auto batches = detail::batches_of(
        fit, train_cfg.batch_size, derive_seed(seed, "train.shuffle.epoch" + std::to_string(epoch)));
    for (const Batch& batch : batches) {
      try {
        const LossBreakdown loss = backward_and_update(result.params, batch, noise_rng, opt);
        interval_sum.ce += loss.ce;
        interval_sum.hsc += loss.hsc;
        interval_sum.adv += loss.adv;
        interval_sum.total += loss.total;
        interval_batches += 1;
      } catch (const std::runtime_error& e) {
        result.diverged = true;
        result.diagnostic = e.what();
        break;
      }
      ++step;
      if (step % train_cfg.eval_every == 0) record_eval(step);
    }
  }
  if (!result.diverged && (interval_batches > 0 || !evaluated) && step > 0) record_eval(step);

  result.steps = step;
  if (evaluated && best_auc > -std::numeric_limits<double>::infinity()) {
    result.params = std::move(best);
    result.best_val_auc = best_auc;
  } else if (result.diverged) {
    result.params = std::move(best);  // last good snapshot (possibly the init)
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// SC-size buckets (data-size skew analysis)
// ---------------------------------------------------------------------------

struct SizeBucket {
  long size_lo = 0;
  long size_hi = 0;
  std::vector<int> sc_ids;
  std::string label() const { return std::to_string(size_lo) + ".." + std::to_string(size_hi); }
};

/// Groups sub-categories by their train-split session counts. Few distinct
/// sizes (the synthetic skew case) get one bucket per size; otherwise the
/// SCs are split into up to `max_buckets` rank quantiles.
inline std::vector<SizeBucket> sc_size_buckets(const Dataset& ds, int max_buckets = 4) {
  std::map<int, long> size_by_sc;
  for (const Session& s : ds.train) size_by_sc[s.sc_id] += 1;
  std::map<long, std::vector<int>> by_size;
  for (const auto& [sc, n] : size_by_sc) by_size[n].push_back(sc);

  std::vector<SizeBucket> buckets;
  if (static_cast<int>(by_size.size()) <= max_buckets) {
    for (const auto& [size, scs] : by_size) {
      SizeBucket b;
      b.size_lo = b.size_hi = size;
      b.sc_ids = scs;
      buckets.push_back(std::move(b));
    }
    return buckets;
  }
  std::vector<std::pair<long, int>> ranked;  // (size, sc)
  for (const auto& [sc, n] : size_by_sc) ranked.emplace_back(n, sc);
  std::sort(ranked.begin(), ranked.end());
  const size_t per = (ranked.size() + max_buckets - 1) / max_buckets;
  for (size_t start = 0; start < ranked.size(); start += per) {
    SizeBucket b;
    const size_t end = std::min(ranked.size(), start + per);
    b.size_lo = ranked[start].first;
    b.size_hi = ranked[end - 1].first;
    for (size_t i = start; i < end; ++i) b.sc_ids.push_back(ranked[i].second);
    buckets.push_back(std::move(b));
  }
  return buckets;
}

struct BucketMetric {
  std::string label;
  long size_lo = 0;
  long size_hi = 0;
  long n_sessions = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<BucketMetric> bucket_auc(const std::vector<SizeBucket>& buckets,
                                            const std::vector<SessionScores>& scored) {
  std::vector<BucketMetric> out;
  for (const SizeBucket& b : buckets) {
    std::vector<char> member;
    int max_sc = 0;
    for (int sc : b.sc_ids) max_sc = std::max(max_sc, sc);
    member.assign(max_sc + 1, 0);
    for (int sc : b.sc_ids) member[sc] = 1;
    std::vector<SessionScores> subset;
    for (const auto& ss : scored)
      if (ss.session->sc_id <= max_sc && member[ss.session->sc_id]) subset.push_back(ss);
    BucketMetric m;
    m.label = b.label();
    m.size_lo = b.size_lo;
    m.size_hi = b.size_hi;
    m.n_sessions = static_cast<long>(subset.size());
    m.auc = session_metrics(subset).auc;
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment cells, comparison and sweeps
// ---------------------------------------------------------------------------

struct ExperimentCell {
  std::string label;
  Variant variant = Variant::Dnn;
  std::uint64_t seed = 0;
  ModelConfig cfg;
  bool invalid = false;  // grid point rejected before training
  bool failed = false;   // training aborted
  std::string diagnostic;
  SessionMetricReport test;
  double gate_separation = std::numeric_limits<double>::quiet_NaN();
  std::vector<BucketMetric> buckets;
  std::vector<EvalPoint> history;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  long steps = 0;
  double wall_seconds = 0.0;
};

inline void run_cell(ExperimentCell& cell, const TrainConfig& train_cfg, const Dataset& dataset,
                     const std::vector<SizeBucket>& buckets) {
  TrainResult tr = train_model(cell.cfg, train_cfg, dataset);
  cell.history = tr.history;
  cell.best_val_auc = tr.best_val_auc;
  cell.steps = tr.steps;
  cell.wall_seconds = tr.wall_seconds;
  if (tr.diverged) {
    cell.failed = true;
    cell.diagnostic = tr.diagnostic;
    return;
  }
  EvalOutput eval = evaluate_split(tr.params, dataset.test);
  cell.test = eval.report;
  cell.buckets = bucket_auc(buckets, eval.scored);
  try {
    const auto records = export_gate_vectors(tr.params, dataset.test, dataset.vocabs);
    cell.gate_separation = gate_cluster_separation(records);
  } catch (const std::invalid_argument&) {
    // Too few categories/groups for a separation statistic; leave NaN.
  }
}

/// Runs tasks over a small worker pool; results land in caller-owned slots so
/// the output is independent of completion order.
inline void parallel_run(int n_tasks, int jobs, const std::function<void(int)>& fn) {
  int n_workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min(n_workers, n_tasks));
  if (n_workers == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ComparisonResult {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<ExperimentCell> cells;  // variant-major, seed-minor

  const ExperimentCell& cell(Variant v, std::uint64_t seed) const {
    for (const auto& c : cells)
      if (c.variant == v && c.seed == seed) return c;
    throw std::out_of_range("no such comparison cell");
  }
};

/// Trains every (variant, seed) pair on the dataset and evaluates on the
/// test split. DNN is the baseline row all improvements are read against.
inline ComparisonResult run_comparison(const std::vector<Variant>& variants, const ModelConfig& base,
                                       const TrainConfig& train_cfg, const Dataset& dataset) {
  ComparisonResult result;
  result.variants = variants;
  result.seeds = train_cfg.seeds;
  const auto buckets = sc_size_buckets(dataset);
  for (Variant v : variants) {
    for (std::uint64_t seed : train_cfg.seeds) {
      ExperimentCell cell;
      cell.variant = v;
      cell.seed = seed;
      cell.cfg = base;
      cell.cfg.variant = v;
      cell.cfg.seed = seed;
      cell.cfg = cell.cfg.canonical();
      cell.label = std::string(variant_name(v)) + "/seed" + std::to_string(seed);
      result.cells.push_back(std::move(cell));
    }
  }
  parallel_run(static_cast<int>(result.cells.size()), train_cfg.jobs,
               [&](int i) { run_cell(result.cells[i], train_cfg, dataset, buckets); });
  return result;
}

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stdev = 0.0;
  int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  double sum = 0.0;
  for (double x : xs)
    if (!std::isnan(x)) {
      sum += x;
      out.n += 1;
    }
  if (out.n == 0) return out;
  out.mean = sum / out.n;
  double ss = 0.0;
  for (double x : xs)
    if (!std::isnan(x)) ss += (x - out.mean) * (x - out.mean);
  out.stdev = out.n > 1 ? std::sqrt(ss / (out.n - 1)) : 0.0;
  return out;
}

inline std::vector<double> collect(const ComparisonResult& r, Variant v,
                                   const std::function<double(const ExperimentCell&)>& get) {
  std::vector<double> xs;
  for (const auto& c : r.cells)
    if (c.variant == v && !c.failed && !c.invalid) xs.push_back(get(c));
  return xs;
}

/// Tab-separated table shaped like the model-comparison results: one row per
/// variant, mean and stdev over seeds for the four session metrics.
inline std::string comparison_table(const ComparisonResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant\tauc_at_10\tauc_at_10_std\tauc\tauc_std\tndcg_at_10\tndcg_at_10_std\tndcg\tndcg_std\tn_seeds\n";
  for (Variant v : r.variants) {
    const auto a10 = mean_std(collect(r, v, [](const auto& c) { return c.test.auc_at_10; }));
    const auto a = mean_std(collect(r, v, [](const auto& c) { return c.test.auc; }));
    const auto n10 = mean_std(collect(r, v, [](const auto& c) { return c.test.ndcg_at_10; }));
    const auto n = mean_std(collect(r, v, [](const auto& c) { return c.test.ndcg; }));
    os << variant_name(v) << "\t" << a10.mean << "\t" << a10.stdev << "\t" << a.mean << "\t" << a.stdev
       << "\t" << n10.mean << "\t" << n10.stdev << "\t" << n.mean << "\t" << n.stdev << "\t" << a.n
       << "\n";
  }
  return os.str();
}

/// Long-format per-seed bucket breakdown (data-size skew analysis).
inline std::string bucket_table(const ComparisonResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant\tseed\tbucket\tn_sessions\tauc\n";
  for (const auto& c : r.cells) {
    if (c.failed || c.invalid) continue;
    for (const auto& b : c.buckets)
      os << variant_name(c.variant) << "\t" << c.seed << "\t" << b.label << "\t" << b.n_sessions << "\t"
         << b.auc << "\n";
  }
  return os.str();
}

inline std::string separation_table(const ComparisonResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant\tseed\tgate_separation\n";
  for (const auto& c : r.cells) {
    if (c.failed || c.invalid) continue;
    os << variant_name(c.variant) << "\t" << c.seed << "\t" << c.gate_separation << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Hyper-parameter sweeps
// ---------------------------------------------------------------------------

enum class SweepAxis { Nkd, Lambda, GateInputAxis };

inline const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Nkd: return "nkd";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::GateInputAxis: return "gate_input";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "nkd") return SweepAxis::Nkd;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "gate_input") return SweepAxis::GateInputAxis;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (expected nkd|lambda|gate_input)");
}

struct SweepGrid {
  SweepAxis axis = SweepAxis::Nkd;
  std::vector<std::array<int, 3>> nkd;                 // (N, K, D)
  std::vector<std::pair<double, double>> lambdas;      // (lambda1, lambda2)
  std::vector<GateInput> gate_inputs;

  static SweepGrid default_nkd() {
    SweepGrid g;
    g.axis = SweepAxis::Nkd;
    for (int n : {10, 16, 32})
      for (int k : {2, 4})
        for (int d : {1, 2}) g.nkd.push_back({n, k, d});
    return g;
  }
  static SweepGrid default_lambda() {
    SweepGrid g;
    g.axis = SweepAxis::Lambda;
    for (double l1 : {0.1, 0.01, 1e-3, 1e-4})
      for (double l2 : {0.1, 0.01, 1e-3, 1e-4}) g.lambdas.emplace_back(l1, l2);
    return g;
  }
  static SweepGrid default_gate_input() {
    SweepGrid g;
    g.axis = SweepAxis::GateInputAxis;
    g.gate_inputs = {GateInput::Sc, GateInput::TcSc, GateInput::AllSparse};
    return g;
  }

  size_t size() const {
    switch (axis) {
      case SweepAxis::Nkd: return nkd.size();
      case SweepAxis::Lambda: return lambdas.size();
      case SweepAxis::GateInputAxis: return gate_inputs.size();
    }
    return 0;
  }
};

struct SweepCellResult {
  std::string label;
  ModelConfig cfg;
  bool invalid = false;
  std::string why;
  std::vector<ExperimentCell> per_seed;
  MeanStd auc;
  MeanStd auc_at_10;
  MeanStd ndcg;
  MeanStd ndcg_at_10;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Nkd;
  std::vector<SweepCellResult> cells;
};

/// One experiment per grid point (averaged over the configured seeds).
/// Invalid grid points (e.g. D > N - K) are flagged and skipped, not fatal.
inline SweepResult sweep(const SweepGrid& grid, const ModelConfig& base, const TrainConfig& train_cfg,
                         const Dataset& dataset) {
  if (grid.size() == 0) throw std::invalid_argument("sweep: empty grid");
  SweepResult result;
  result.axis = grid.axis;
  const auto buckets = sc_size_buckets(dataset);

  for (size_t i = 0; i < grid.size(); ++i) {
    SweepCellResult cell;
    cell.cfg = base;
    std::ostringstream label;
    switch (grid.axis) {
      case SweepAxis::Nkd: {
        const auto [n, k, d] = grid.nkd[i];
        cell.cfg.n_experts = n;
        cell.cfg.top_k = k;
        cell.cfg.n_disagree = d;
        label << "N=" << n << ",K=" << k << ",D=" << d;
        break;
      }
      case SweepAxis::Lambda: {
        cell.cfg.lambda1 = grid.lambdas[i].first;
        cell.cfg.lambda2 = grid.lambdas[i].second;
        label << "l1=" << grid.lambdas[i].first << ",l2=" << grid.lambdas[i].second;
        break;
      }
      case SweepAxis::GateInputAxis: {
        cell.cfg.gate_input = grid.gate_inputs[i];
        label << "gate=" << gate_input_name(grid.gate_inputs[i]);
        break;
      }
    }
    cell.label = label.str();
    try {
      cell.cfg.canonical().validate();
    } catch (const std::invalid_argument& e) {
      cell.invalid = true;
      cell.why = e.what();
    }
    result.cells.push_back(std::move(cell));
  }

  // Flatten (cell, seed) into one task list for the worker pool.
  struct Task {
    int cell;
    int seed_idx;
  };
  std::vector<Task> tasks;
  for (size_t c = 0; c < result.cells.size(); ++c) {
    if (result.cells[c].invalid) continue;
    result.cells[c].per_seed.resize(train_cfg.seeds.size());
    for (size_t s = 0; s < train_cfg.seeds.size(); ++s) {
      auto& ec = result.cells[c].per_seed[s];
      ec.cfg = result.cells[c].cfg;
      ec.cfg.seed = train_cfg.seeds[s];
      ec.cfg = ec.cfg.canonical();
      ec.variant = ec.cfg.variant;
      ec.seed = train_cfg.seeds[s];
      ec.label = result.cells[c].label + "/seed" + std::to_string(ec.seed);
      tasks.push_back({static_cast<int>(c), static_cast<int>(s)});
    }
  }
  parallel_run(static_cast<int>(tasks.size()), train_cfg.jobs, [&](int t) {
    auto& ec = result.cells[tasks[t].cell].per_seed[tasks[t].seed_idx];
    run_cell(ec, train_cfg, dataset, buckets);
  });

  for (auto& cell : result.cells) {
    if (cell.invalid) continue;
    auto grab = [&](const std::function<double(const ExperimentCell&)>& get) {
      std::vector<double> xs;
      for (const auto& ec : cell.per_seed)
        if (!ec.failed) xs.push_back(get(ec));
      return mean_std(xs);
    };
    cell.auc = grab([](const auto& c) { return c.test.auc; });
    cell.auc_at_10 = grab([](const auto& c) { return c.test.auc_at_10; });
    cell.ndcg = grab([](const auto& c) { return c.test.ndcg; });
    cell.ndcg_at_10 = grab([](const auto& c) { return c.test.ndcg_at_10; });
  }
  return result;
}

inline std::string sweep_table(const SweepResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "cell\tstatus\tauc\tauc_std\tauc_at_10\tndcg\tndcg_at_10\tn_seeds\n";
  for (const auto& c : r.cells) {
    if (c.invalid) {
      os << c.label << "\tinvalid\tnan\tnan\tnan\tnan\tnan\t0\n";
      continue;
    }
    os << c.label << "\tok\t" << c.auc.mean << "\t" << c.auc.stdev << "\t" << c.auc_at_10.mean << "\t"
       << c.ndcg.mean << "\t" << c.ndcg_at_10.mean << "\t" << c.auc.n << "\n";
  }
  return os.str();
}

}  // namespace moerank
