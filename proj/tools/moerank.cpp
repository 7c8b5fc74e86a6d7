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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "moerank/checkpoint.hpp"
#include "moerank/config.hpp"
#include "moerank/metrics.hpp"
#include "moerank/record_io.hpp"
#include "moerank/synthetic.hpp"
#include "moerank/train.hpp"

namespace fs = std::filesystem;
using namespace moerank;

namespace {

void emit(const std::string& text, const std::string& out_path) {
  std::cout << text;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write output file: " + out_path);
    out << text;
  }
}

Dataset load_data_dir(const std::string& dir) {
  const fs::path base(dir);
  const Schema schema = load_schema((base / "schema.json").string());
  const fs::path test_path = base / "test.jsonl";
  return load_records((base / "train.jsonl").string(), schema,
                      fs::exists(test_path) ? test_path.string() : "");
}

const std::vector<Session>& pick_split(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "test") return ds.test;
  throw std::runtime_error("unknown split '" + split + "' (expected train|test)");
}

ModelConfig model_config_for(const std::string& config_path, const Dataset& ds) {
  ModelConfig cfg;
  if (!config_path.empty()) cfg = model_config_from_ini(load_ini(config_path));
  cfg.n_sparse = ds.n_sparse();
  cfg.n_numeric = ds.n_numeric();
  return cfg;
}

TrainConfig train_config_for(const std::string& config_path) {
  if (config_path.empty()) return TrainConfig{};
  return train_config_from_ini(load_ini(config_path));
}

/// Maps a record file through a trained bundle's vocabularies and stats.
std::vector<Session> sessions_for_bundle(const ModelBundle& bundle, const std::string& data_dir,
                                         const std::string& split) {
  const fs::path path = fs::path(data_dir) / (split + ".jsonl");
  if (!fs::exists(path)) throw std::runtime_error("record file not found: " + path.string());
  const auto raw = load_raw_records(path.string(), bundle.schema);
  return map_records(bundle.schema, raw, bundle.vocabs, bundle.stats);
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir, long long seed) {
  SynthSpec spec;
  if (!spec_path.empty()) spec = synth_spec_from_ini(load_ini(spec_path));
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);

  RawSynthetic raw = generate_synthetic_raw(spec);
  fs::create_directories(out_dir);
  const fs::path base(out_dir);
  write_records((base / "train.jsonl").string(), raw.schema, raw.train);
  write_records((base / "test.jsonl").string(), raw.schema, raw.test);
  save_schema((base / "schema.json").string(), raw.schema);

  Dataset ds = build_dataset(raw.schema, raw.train, raw.test);
  ds.validate_hierarchy();
  save_stats((base / "stats.json").string(), raw.schema, ds.stats);

  std::cout << "wrote " << out_dir << ": " << ds.train.size() << " train sessions, " << ds.test.size()
            << " test sessions, " << raw.train.size() << "+" << raw.test.size() << " records, "
            << spec.n_sc_total() << " sub-categories under " << spec.n_tc << " top-categories\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& out_path,
              long long seed, const std::string& variant) {
  const Dataset ds = load_data_dir(data_dir);
  ModelConfig cfg = model_config_for(config_path, ds);
  TrainConfig tc = train_config_for(config_path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!variant.empty()) cfg.variant = parse_variant(variant);

  const TrainResult result = train_model(cfg, tc, ds);
  if (result.diverged) {
    std::cerr << "training diverged: " << result.diagnostic << " (saving last good checkpoint)\n";
  }
  ModelBundle bundle{result.params, ds.schema, ds.vocabs, ds.stats, ds.tree};
  save_checkpoint(out_path, bundle);

  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant=" << variant_name(bundle.params.config.variant) << "\n"
     << "steps=" << result.steps << "\n"
     << "best_val_auc=" << result.best_val_auc << "\n"
     << "checkpoint=" << out_path << "\n";
  for (const auto& pt : result.history)
    os << "step=" << pt.step << " ce=" << pt.train_loss.ce << " hsc=" << pt.train_loss.hsc
       << " adv=" << pt.train_loss.adv << " total=" << pt.train_loss.total << " val_auc=" << pt.val_auc
       << "\n";
  std::cout << os.str();
  std::cerr << "wall_seconds=" << result.wall_seconds << "\n";
  return result.diverged ? 1 : 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& out_path) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint file not found: " + checkpoint);
  const ModelBundle bundle = load_checkpoint(checkpoint);
  const auto sessions = sessions_for_bundle(bundle, data_dir, split);
  const EvalOutput eval = evaluate_split(bundle.params, sessions);
  emit(metric_report_text(eval.report), out_path);
  return 0;
}

int cmd_compare(const std::string& data_dir, const std::string& config_path,
                const std::vector<std::uint64_t>& seeds, const std::string& variants_csv,
                const std::string& out_path, int jobs) {
  const Dataset ds = load_data_dir(data_dir);
  const ModelConfig base = model_config_for(config_path, ds);
  TrainConfig tc = train_config_for(config_path);
  if (!seeds.empty()) tc.seeds = seeds;
  if (jobs > 0) tc.jobs = jobs;

  std::vector<Variant> variants{Variant::Dnn, Variant::Moe, Variant::AdvMoe, Variant::HscMoe,
                                Variant::AdvHscMoe};
  if (!variants_csv.empty()) {
    variants.clear();
    std::stringstream ss(variants_csv);
    std::string item;
    while (std::getline(ss, item, ',')) variants.push_back(parse_variant(item));
  }

  const ComparisonResult result = run_comparison(variants, base, tc, ds);
  std::ostringstream os;
  os << "# metrics (mean and stdev over seeds)\n" << comparison_table(result);
  os << "\n# per-seed AUC by SC-size bucket\n" << bucket_table(result);
  os << "\n# per-seed gate cluster separation (groups = top categories)\n" << separation_table(result);
  emit(os.str(), out_path);
  for (const auto& c : result.cells)
    if (c.failed) std::cerr << "cell " << c.label << " failed: " << c.diagnostic << "\n";
  return 0;
}

SweepGrid grid_for(SweepAxis axis, const std::string& grid_arg) {
  SweepGrid g;
  switch (axis) {
    case SweepAxis::Nkd: g = SweepGrid::default_nkd(); break;
    case SweepAxis::Lambda: g = SweepGrid::default_lambda(); break;
    case SweepAxis::GateInputAxis: g = SweepGrid::default_gate_input(); break;
  }
  if (grid_arg.empty()) return g;
  g.nkd.clear();
  g.lambdas.clear();
  g.gate_inputs.clear();
  std::stringstream cells(grid_arg);
  std::string cell;
  while (std::getline(cells, cell, ';')) {
    if (cell.empty()) continue;
    std::stringstream parts(cell);
    std::string a, b, c;
    switch (axis) {
      case SweepAxis::Nkd:
        if (!std::getline(parts, a, ',') || !std::getline(parts, b, ',') || !std::getline(parts, c, ','))
          throw std::runtime_error("nkd grid cell must be N,K,D: " + cell);
        g.nkd.push_back({std::stoi(a), std::stoi(b), std::stoi(c)});
        break;
      case SweepAxis::Lambda:
        if (!std::getline(parts, a, ',') || !std::getline(parts, b, ','))
          throw std::runtime_error("lambda grid cell must be l1,l2: " + cell);
        g.lambdas.emplace_back(std::stod(a), std::stod(b));
        break;
      case SweepAxis::GateInputAxis:
        g.gate_inputs.push_back(parse_gate_input(cell));
        break;
    }
  }
  return g;
}

int cmd_sweep(const std::string& data_dir, const std::string& config_path, const std::string& axis_name,
              const std::string& grid_arg, const std::vector<std::uint64_t>& seeds,
              const std::string& out_path, int jobs) {
  const Dataset ds = load_data_dir(data_dir);
  const ModelConfig base = model_config_for(config_path, ds);
  TrainConfig tc = train_config_for(config_path);
  if (!seeds.empty()) tc.seeds = seeds;
  if (jobs > 0) tc.jobs = jobs;

  const SweepAxis axis = parse_sweep_axis(axis_name);
  const SweepResult result = sweep(grid_for(axis, grid_arg), base, tc, ds);
  emit(sweep_table(result), out_path);
  return 0;
}

int cmd_export_gates(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
                     const std::string& group_map_path, const std::string& source,
                     const std::string& out_path) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint file not found: " + checkpoint);
  const ModelBundle bundle = load_checkpoint(checkpoint);
  const auto sessions = sessions_for_bundle(bundle, data_dir, split);

  std::map<std::string, std::string> group_map;
  if (!group_map_path.empty()) {
    std::ifstream in(group_map_path);
    if (!in) throw std::runtime_error("cannot open group map file: " + group_map_path);
    nlohmann::json j;
    in >> j;
    group_map = j.get<std::map<std::string, std::string>>();
  }
  const GateVectorSource src =
      source == "pinfer" ? GateVectorSource::PInfer : GateVectorSource::Probs;
  const auto records = export_gate_vectors(bundle.params, sessions, bundle.vocabs, group_map, src);
  emit(gate_vector_table(records), out_path);
  try {
    std::cout << "separation=" << gate_cluster_separation(records) << "\n";
  } catch (const std::invalid_argument& e) {
    std::cout << "separation=nan (" << e.what() << ")\n";
  }
  return 0;
}

int cmd_feature_importance(const std::string& data_dir, const std::string& split,
                           const std::string& feature, bool by_tc, const std::string& concentration_col,
                           const std::string& out_path) {
  const Dataset ds = load_data_dir(data_dir);
  const auto& sessions = pick_split(ds, split);

  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  std::vector<int> features;
  for (size_t f = 0; f < ds.schema.numeric_columns.size(); ++f)
    if (feature == "all" || feature == ds.schema.numeric_columns[f]) features.push_back(static_cast<int>(f));
  if (features.empty()) throw std::runtime_error("unknown numeric feature '" + feature + "'");

  os << "feature\tcategory\tfi\tn_sessions\n";
  for (int f : features) {
    os << ds.schema.numeric_columns[f] << "\tall\t" << feature_importance(sessions, f) << "\t"
       << sessions.size() << "\n";
    if (by_tc) {
      std::map<int, std::vector<Session>> by_cat;
      for (const Session& s : sessions) by_cat[s.tc_id].push_back(s);
      for (const auto& [tc, subset] : by_cat)
        os << ds.schema.numeric_columns[f] << "\t" << ds.vocabs[1].id_to_value[tc] << "\t"
           << feature_importance(subset, f) << "\t" << subset.size() << "\n";
    }
  }

  if (!concentration_col.empty()) {
    int idx = -1;
    const auto names = ds.schema.sparse_feature_names();
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == concentration_col) idx = static_cast<int>(i);
    if (idx < 0) throw std::runtime_error("unknown sparse feature '" + concentration_col + "'");
    os << "\n# value concentration: distinct values covering 80% of positives\n";
    os << "category\tpositives\tdistinct\tcovering\tfraction\n";
    for (const auto& row : sparse_concentration(sessions, idx, ds.vocabs))
      os << row.category << "\t" << row.positives << "\t" << row.distinct_values << "\t"
         << row.covering_values << "\t" << row.covering_fraction << "\n";
  }
  emit(os.str(), out_path);
  return 0;
}

/// Pretty-prints a tab-separated results table with aligned columns.
int cmd_report(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open results file: " + in_path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      rows.push_back({line});
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  std::vector<size_t> widths;
  for (const auto& row : rows) {
    if (row.size() < 2) continue;
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    if (row.size() < 2) {
      if (!row.empty()) os << row[0];
      os << "\n";
      continue;
    }
    for (size_t i = 0; i < row.size(); ++i) {
      os << row[i];
      if (i + 1 < row.size()) os << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    os << "\n";
  }
  emit(os.str(), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moerank: mixture-of-experts learning-to-rank engine"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_spec, gd_out;
  long long gd_seed = -1;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic hierarchical-category dataset");
  gen->add_option("--spec", gd_spec, "SynthSpec config file ([synth] section)");
  gen->add_option("--out", gd_out, "Output directory")->required();
  gen->add_option("--seed", gd_seed, "Override the spec seed");

  // train
  std::string tr_data, tr_config, tr_out = "checkpoint.json", tr_variant;
  long long tr_seed = -1;
  auto* train = app.add_subcommand("train", "Train one model and write a checkpoint");
  train->add_option("--data", tr_data, "Dataset directory (from gen-data)")->required();
  train->add_option("--config", tr_config, "Config file ([model] and [train] sections)");
  train->add_option("--out", tr_out, "Checkpoint output path");
  train->add_option("--seed", tr_seed, "Override the model seed");
  train->add_option("--variant", tr_variant, "Override the model variant");

  // eval
  std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a record file");
  eval->add_option("--checkpoint", ev_ckpt)->required();
  eval->add_option("--data", ev_data, "Dataset directory")->required();
  eval->add_option("--split", ev_split, "train|test (default test)");
  eval->add_option("--out", ev_out, "Also write the report here");

  // compare
  std::string cp_data, cp_config, cp_variants, cp_out;
  std::vector<std::uint64_t> cp_seeds;
  int cp_jobs = 0;
  auto* compare = app.add_subcommand("compare", "Train and evaluate the model variants side by side");
  compare->add_option("--data", cp_data)->required();
  compare->add_option("--config", cp_config);
  compare->add_option("--seeds", cp_seeds, "Comma-separated seeds")->delimiter(',');
  compare->add_option("--variants", cp_variants, "Comma-separated variant subset");
  compare->add_option("--out", cp_out);
  compare->add_option("--jobs", cp_jobs, "Parallel training jobs");

  // sweep
  std::string sw_data, sw_config, sw_axis, sw_grid, sw_out;
  std::vector<std::uint64_t> sw_seeds;
  int sw_jobs = 0;
  auto* sw = app.add_subcommand("sweep", "Hyper-parameter sweep over one axis");
  sw->add_option("--data", sw_data)->required();
  sw->add_option("--config", sw_config);
  sw->add_option("--axis", sw_axis, "nkd|lambda|gate_input")->required();
  sw->add_option("--grid", sw_grid, "Grid cells, ';'-separated (e.g. \"10,2,1;16,4,2\")");
  sw->add_option("--seeds", sw_seeds)->delimiter(',');
  sw->add_option("--out", sw_out);
  sw->add_option("--jobs", sw_jobs);

  // export-gates
  std::string eg_ckpt, eg_data, eg_split = "test", eg_groups, eg_source = "probs", eg_out;
  auto* eg = app.add_subcommand("export-gates", "Export per-SC gate vectors for visualization");
  eg->add_option("--checkpoint", eg_ckpt)->required();
  eg->add_option("--data", eg_data)->required();
  eg->add_option("--split", eg_split);
  eg->add_option("--group-map", eg_groups, "JSON file mapping tc label -> semantic group");
  eg->add_option("--source", eg_source, "probs|pinfer (top-K probabilities or full softmax)");
  eg->add_option("--out", eg_out);

  // feature-importance
  std::string fi_data, fi_split = "train", fi_feature = "all", fi_conc, fi_out;
  bool fi_by_tc = false;
  auto* fi = app.add_subcommand("feature-importance", "Per-feature pairwise importance report");
  fi->add_option("--data", fi_data)->required();
  fi->add_option("--split", fi_split);
  fi->add_option("--feature", fi_feature, "Numeric column name or 'all'");
  fi->add_flag("--by-tc", fi_by_tc, "Break down by top category");
  fi->add_option("--concentration", fi_conc, "Sparse column for the value-concentration report");
  fi->add_option("--out", fi_out);

  // report
  std::string rp_in, rp_out;
  auto* rp = app.add_subcommand("report", "Pretty-print a results table");
  rp->add_option("--in", rp_in)->required();
  rp->add_option("--out", rp_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gd_spec, gd_out, gd_seed);
    if (train->parsed()) return cmd_train(tr_data, tr_config, tr_out, tr_seed, tr_variant);
    if (eval->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_out);
    if (compare->parsed()) return cmd_compare(cp_data, cp_config, cp_seeds, cp_variants, cp_out, cp_jobs);
    if (sw->parsed()) return cmd_sweep(sw_data, sw_config, sw_axis, sw_grid, sw_seeds, sw_out, sw_jobs);
    if (eg->parsed())
      return cmd_export_gates(eg_ckpt, eg_data, eg_split, eg_groups, eg_source, eg_out);
    if (fi->parsed())
      return cmd_feature_importance(fi_data, fi_split, fi_feature, fi_by_tc, fi_conc, fi_out);
    if (rp->parsed()) return cmd_report(rp_in, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
