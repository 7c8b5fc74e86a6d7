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
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "moerank/model.hpp"
#include "moerank/synthetic.hpp"
#include "moerank/train.hpp"

namespace moerank {

/// Declarative config files: `key = value` lines under `[section]` headers,
/// `#` or `;` comments. Unknown keys are rejected so typos fail loudly.
using IniSection = std::map<std::string, std::string>;
using IniFile = std::map<std::string, IniSection>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline IniFile parse_ini(std::istream& in, const std::string& origin = "<stream>") {
  IniFile file;
  std::string section;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      file[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    file[section][key] = value;
  }
  return file;
}

inline IniFile load_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_ini(in, path);
}

namespace detail {

class SectionReader {
 public:
  SectionReader(const IniFile& file, const std::string& section) : name_(section) {
    auto it = file.find(section);
    if (it != file.end()) entries_ = it->second;
  }

  ~SectionReader() = default;

  bool has(const std::string& key) {
    seen_.push_back(key);
    return entries_.count(key) > 0;
  }

  std::string str(const std::string& key, const std::string& dflt) {
    seen_.push_back(key);
    auto it = entries_.find(key);
    return it == entries_.end() ? dflt : it->second;
  }

  double real(const std::string& key, double dflt) {
    seen_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw std::runtime_error("config [" + name_ + "] " + key + ": not a number: " + it->second);
    }
  }

  long integer(const std::string& key, long dflt) {
    seen_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    try {
      return std::stol(it->second);
    } catch (...) {
      throw std::runtime_error("config [" + name_ + "] " + key + ": not an integer: " + it->second);
    }
  }

  bool flag(const std::string& key, bool dflt) {
    seen_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config [" + name_ + "] " + key + ": expected true/false");
  }

  template <typename T, typename Parse>
  std::vector<T> list(const std::string& key, std::vector<T> dflt, Parse parse) {
    seen_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    std::vector<T> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(parse(t));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : entries_) {
      (void)value;
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw std::runtime_error("config [" + name_ + "]: unknown key '" + key + "'");
    }
  }

 private:
  std::string name_;
  IniSection entries_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline SynthSpec synth_spec_from_ini(const IniFile& file) {
  detail::SectionReader r(file, "synth");
  SynthSpec s;
  s.n_tc = static_cast<int>(r.integer("n_tc", s.n_tc));
  s.n_sc_per_tc = static_cast<int>(r.integer("n_sc_per_tc", s.n_sc_per_tc));
  s.small_sc_per_tc = static_cast<int>(r.integer("small_sc_per_tc", s.small_sc_per_tc));
  s.sessions_per_sc = static_cast<int>(r.integer("sessions_per_sc", s.sessions_per_sc));
  s.small_sessions = static_cast<int>(r.integer("small_sessions", s.small_sessions));
  s.items_per_session = static_cast<int>(r.integer("items_per_session", s.items_per_session));
  s.n_numeric = static_cast<int>(r.integer("n_numeric", s.n_numeric));
  s.n_extra_sparse = static_cast<int>(r.integer("n_extra_sparse", s.n_extra_sparse));
  s.extra_vocab = static_cast<int>(r.integer("extra_vocab", s.extra_vocab));
  s.tc_weight_scale = r.real("tc_weight_scale", s.tc_weight_scale);
  s.sc_weight_jitter = r.real("sc_weight_jitter", s.sc_weight_jitter);
  s.sparse_effect_scale = r.real("sparse_effect_scale", s.sparse_effect_scale);
  s.label_noise = r.real("label_noise", s.label_noise);
  s.positive_fraction = r.real("positive_fraction", s.positive_fraction);
  s.test_fraction = r.real("test_fraction", s.test_fraction);
  s.weight_override = r.list<double>("weight_override", {}, [](const std::string& t) { return std::stod(t); });
  s.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long>(s.seed)));
  r.reject_unknown();
  s.validate();
  return s;
}

inline ModelConfig model_config_from_ini(const IniFile& file) {
  detail::SectionReader r(file, "model");
  ModelConfig c;
  c.n_experts = static_cast<int>(r.integer("n_experts", c.n_experts));
  c.top_k = static_cast<int>(r.integer("top_k", c.top_k));
  c.n_disagree = static_cast<int>(r.integer("n_disagree", c.n_disagree));
  c.embed_dim = static_cast<int>(r.integer("embed_dim", c.embed_dim));
  c.expert_widths = r.list<int>("expert_widths", c.expert_widths,
                                [](const std::string& t) { return std::stoi(t); });
  c.lambda1 = r.real("lambda1", c.lambda1);
  c.lambda2 = r.real("lambda2", c.lambda2);
  c.variant = parse_variant(r.str("variant", variant_name(c.variant)));
  c.gate_input = parse_gate_input(r.str("gate_input", gate_input_name(c.gate_input)));
  c.combine = r.str("combine", "logit") == "prob" ? Combine::ProbWeighted : Combine::LogitWeighted;
  c.noise_enabled = r.flag("noise", c.noise_enabled);
  c.adv_stop_topk_grad = r.flag("adv_stop_topk_grad", c.adv_stop_topk_grad);
  c.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long>(c.seed)));
  r.reject_unknown();
  return c;
}

inline TrainConfig train_config_from_ini(const IniFile& file) {
  detail::SectionReader r(file, "train");
  TrainConfig c;
  c.lr = r.real("lr", c.lr);
  c.weight_decay = r.real("weight_decay", c.weight_decay);
  c.batch_size = static_cast<int>(r.integer("batch_size", c.batch_size));
  c.epochs = static_cast<int>(r.integer("epochs", c.epochs));
  c.seeds = r.list<std::uint64_t>("seeds", c.seeds,
                                  [](const std::string& t) { return std::stoull(t); });
  c.eval_every = static_cast<int>(r.integer("eval_every", c.eval_every));
  c.val_fraction = r.real("val_fraction", c.val_fraction);
  c.jobs = static_cast<int>(r.integer("jobs", c.jobs));
  r.reject_unknown();
  c.validate();
  return c;
}

}  // namespace moerank
