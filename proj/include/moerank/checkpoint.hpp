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

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "moerank/data.hpp"
#include "moerank/model.hpp"
#include "moerank/record_io.hpp"

namespace moerank {

namespace detail {

inline const char* kB64Alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string b64_encode(const unsigned char* data, size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (size_t i = 0; i < n; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64Alphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64Alphabet[v & 63] : '=');
  }
  return out;
}

inline std::vector<unsigned char> b64_decode(const std::string& s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  unsigned buf = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw std::runtime_error("checkpoint: invalid base64 payload");
    buf = (buf << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((buf >> bits) & 0xff));
    }
  }
  return out;
}

/// Raw little-endian doubles in base64: round-trips bit-for-bit.
inline std::string encode_matrix(const Matrix& m) {
  return b64_encode(reinterpret_cast<const unsigned char*>(m.data.data()), m.data.size() * sizeof(double));
}

inline void decode_matrix(const std::string& s, Matrix& m) {
  std::vector<unsigned char> bytes = b64_decode(s);
  if (bytes.size() != m.data.size() * sizeof(double))
    throw std::runtime_error("checkpoint: tensor payload size mismatch");
  std::memcpy(m.data.data(), bytes.data(), bytes.size());
}

}  // namespace detail

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["n_experts"] = c.n_experts;
  j["top_k"] = c.top_k;
  j["n_disagree"] = c.n_disagree;
  j["embed_dim"] = c.embed_dim;
  j["expert_widths"] = c.expert_widths;
  j["n_sparse"] = c.n_sparse;
  j["n_numeric"] = c.n_numeric;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["variant"] = variant_name(c.variant);
  j["gate_input"] = gate_input_name(c.gate_input);
  j["combine"] = c.combine == Combine::LogitWeighted ? "logit" : "prob";
  j["noise_enabled"] = c.noise_enabled;
  j["adv_stop_topk_grad"] = c.adv_stop_topk_grad;
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_experts = j.at("n_experts").get<int>();
  c.top_k = j.at("top_k").get<int>();
  c.n_disagree = j.at("n_disagree").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.expert_widths = j.at("expert_widths").get<std::vector<int>>();
  c.n_sparse = j.at("n_sparse").get<int>();
  c.n_numeric = j.at("n_numeric").get<int>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.gate_input = parse_gate_input(j.at("gate_input").get<std::string>());
  c.combine = j.at("combine").get<std::string>() == "prob" ? Combine::ProbWeighted : Combine::LogitWeighted;
  c.noise_enabled = j.at("noise_enabled").get<bool>();
  c.adv_stop_topk_grad = j.at("adv_stop_topk_grad").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// Everything needed to score new record files with a trained model:
/// parameters plus the train-split vocabularies, normalization stats and
/// category tree they were built against.
struct ModelBundle {
  ModelParams params;
  Schema schema;
  std::vector<Vocabulary> vocabs;
  NormStats stats;
  CategoryTree tree;
};

inline void save_checkpoint(const std::string& path, const ModelBundle& b) {
  nlohmann::ordered_json j;
  j["format"] = "moerank-checkpoint";
  j["version"] = 1;
  j["config"] = model_config_to_json(b.params.config);
  j["schema"] = schema_to_json(b.schema);

  nlohmann::ordered_json vocabs = nlohmann::ordered_json::array();
  for (const auto& v : b.vocabs) vocabs.push_back(v.id_to_value);
  j["vocabs"] = vocabs;
  j["stats"] = {{"min", b.stats.fmin}, {"max", b.stats.fmax}};
  j["tree_parent"] = b.tree.parent;

  nlohmann::ordered_json tensors;
  for (const ParamTensor* t : b.params.named_tensors()) {
    tensors[t->name] = {{"rows", t->value.rows}, {"cols", t->value.cols},
                        {"data", detail::encode_matrix(t->value)}};
  }
  j["tensors"] = tensors;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file: " + path);
  out << j.dump() << "\n";
}

inline ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != std::string("moerank-checkpoint"))
    throw std::runtime_error("not a moerank checkpoint: " + path);
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);

  ModelBundle b;
  b.schema = schema_from_json(j.at("schema"));
  for (const auto& arr : j.at("vocabs")) {
    Vocabulary v;
    v.id_to_value = arr.get<std::vector<std::string>>();
    for (size_t i = 0; i < v.id_to_value.size(); ++i) v.value_to_id[v.id_to_value[i]] = static_cast<int>(i);
    b.vocabs.push_back(std::move(v));
  }
  b.stats.fmin = j.at("stats").at("min").get<std::vector<double>>();
  b.stats.fmax = j.at("stats").at("max").get<std::vector<double>>();
  b.tree.parent = j.at("tree_parent").get<std::vector<int>>();

  const ModelConfig cfg = model_config_from_json(j.at("config"));
  std::vector<int> vocab_sizes;
  for (const auto& v : b.vocabs) vocab_sizes.push_back(v.size());
  b.params = init_model_params(cfg, vocab_sizes);
  for (ParamTensor* t : b.params.named_tensors()) {
    const auto& tj = j.at("tensors").at(t->name);
    if (tj.at("rows").get<int>() != t->value.rows || tj.at("cols").get<int>() != t->value.cols)
      throw std::runtime_error("checkpoint tensor '" + t->name + "' has unexpected shape");
    detail::decode_matrix(tj.at("data").get<std::string>(), t->value);
  }
  return b;
}

}  // namespace moerank
