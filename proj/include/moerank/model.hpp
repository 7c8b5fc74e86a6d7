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
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moerank/data.hpp"
#include "moerank/matrix.hpp"
#include "moerank/optim.hpp"
#include "moerank/rng.hpp"

namespace moerank {

enum class Variant { Dnn, Moe, AdvMoe, HscMoe, AdvHscMoe };
enum class GateInput { Sc, TcSc, AllSparse };
enum class Combine { LogitWeighted, ProbWeighted };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Dnn: return "dnn";
    case Variant::Moe: return "moe";
    case Variant::AdvMoe: return "adv_moe";
    case Variant::HscMoe: return "hsc_moe";
    case Variant::AdvHscMoe: return "adv_hsc_moe";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Dnn, Variant::Moe, Variant::AdvMoe, Variant::HscMoe, Variant::AdvHscMoe})
    if (s == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant '" + s + "' (expected dnn|moe|adv_moe|hsc_moe|adv_hsc_moe)");
}

inline const char* gate_input_name(GateInput g) {
  switch (g) {
    case GateInput::Sc: return "sc";
    case GateInput::TcSc: return "tc_sc";
    case GateInput::AllSparse: return "all_sparse";
  }
  return "?";
}

inline GateInput parse_gate_input(const std::string& s) {
  for (GateInput g : {GateInput::Sc, GateInput::TcSc, GateInput::AllSparse})
    if (s == gate_input_name(g)) return g;
  throw std::invalid_argument("unknown gate input '" + s + "' (expected sc|tc_sc|all_sparse)");
}

struct ModelConfig {
  int n_experts = 10;
  int top_k = 4;
  int n_disagree = 1;
  int embed_dim = 16;
  std::vector<int> expert_widths{32, 16, 8, 1};
  int n_sparse = 4;   // total sparse features, order [sc, tc, extras...]
  int n_numeric = 8;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  Variant variant = Variant::AdvHscMoe;
  GateInput gate_input = GateInput::Sc;
  Combine combine = Combine::LogitWeighted;
  bool noise_enabled = true;
  bool adv_stop_topk_grad = false;
  std::uint64_t seed = 1;

  bool uses_hsc() const { return variant == Variant::HscMoe || variant == Variant::AdvHscMoe; }
  bool uses_adv() const { return variant == Variant::AdvMoe || variant == Variant::AdvHscMoe; }
  double eff_lambda1() const { return uses_hsc() ? lambda1 : 0.0; }
  double eff_lambda2() const { return uses_adv() ? lambda2 : 0.0; }
  int eff_disagree() const { return uses_adv() ? n_disagree : 0; }

  int input_width() const { return n_sparse * embed_dim + n_numeric; }
  int gate_width() const {
    switch (gate_input) {
      case GateInput::Sc: return embed_dim;
      case GateInput::TcSc: return 2 * embed_dim;
      case GateInput::AllSparse: return n_sparse * embed_dim;
    }
    return embed_dim;
  }
  /// Gate decisions are per-session unless item-side features feed the gate.
  bool gate_per_session() const { return gate_input != GateInput::AllSparse; }

  /// The DNN baseline is the degenerate family member: one expert, no
  /// gating noise, no regularizers.
  ModelConfig canonical() const {
    ModelConfig c = *this;
    if (c.variant == Variant::Dnn) {
      c.n_experts = 1;
      c.top_k = 1;
      c.n_disagree = 0;
      c.noise_enabled = false;
    }
    return c;
  }

  void validate() const {
    if (n_experts < 1) throw std::invalid_argument("ModelConfig: n_experts must be >= 1");
    if (top_k < 1 || top_k > n_experts)
      throw std::invalid_argument("ModelConfig: need 1 <= top_k <= n_experts");
    if (n_disagree < 0 || n_disagree > n_experts - top_k)
      throw std::invalid_argument("ModelConfig: need 0 <= n_disagree <= n_experts - top_k");
    if (embed_dim < 1) throw std::invalid_argument("ModelConfig: embed_dim must be >= 1");
    if (expert_widths.empty() || expert_widths.back() != 1)
      throw std::invalid_argument("ModelConfig: expert_widths must end in output width 1");
    for (int w : expert_widths)
      if (w < 1) throw std::invalid_argument("ModelConfig: expert widths must be >= 1");
    if (n_sparse < 2) throw std::invalid_argument("ModelConfig: need sc and tc sparse features");
    if (n_numeric < 0) throw std::invalid_argument("ModelConfig: n_numeric must be >= 0");
  }
};

/// Multi-layer perceptron with ReLU between affine layers and a linear
/// scalar output (the expert logit).
struct Mlp {
  std::vector<ParamTensor> weights;
  std::vector<ParamTensor> biases;
};

struct ModelParams {
  ModelConfig config;
  std::vector<ParamTensor> embeddings;  // per sparse feature, vocab x q
  std::vector<Mlp> experts;
  ParamTensor gate_infer;       // W^I, gate_width x N
  ParamTensor gate_noise;       // W^noise, gate_width x N
  ParamTensor gate_constraint;  // W^C, q x N (always fed the TC embedding)

  std::vector<ParamTensor*> named_tensors() {
    std::vector<ParamTensor*> out;
    for (auto& e : embeddings) out.push_back(&e);
    for (auto& ex : experts) {
      for (size_t l = 0; l < ex.weights.size(); ++l) {
        out.push_back(&ex.weights[l]);
        out.push_back(&ex.biases[l]);
      }
    }
    out.push_back(&gate_infer);
    out.push_back(&gate_noise);
    out.push_back(&gate_constraint);
    return out;
  }

  std::vector<const ParamTensor*> named_tensors() const {
    auto self = const_cast<ModelParams*>(this);
    auto ptrs = self->named_tensors();
    return {ptrs.begin(), ptrs.end()};
  }

  long long parameter_count() const {
    long long n = 0;
    for (const auto* t : named_tensors()) n += static_cast<long long>(t->value.size());
    return n;
  }

  void zero_grads() {
    for (auto* t : named_tensors()) t->zero_grad();
  }
};

namespace detail {

inline void glorot_init(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / (m.rows + m.cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& x : m.data) x = u(rng);
}

inline std::vector<double> matvec(const std::vector<double>& x, const Matrix& w) {
  std::vector<double> y(w.cols, 0.0);
  for (int j = 0; j < w.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < w.rows; ++i) acc += x[i] * w(i, j);
    y[j] = acc;
  }
  return y;
}

/// dW += outer(x, dy); dx += W dy
inline void matvec_backward(const std::vector<double>& x, const Matrix& w,
                            const std::vector<double>& dy, Matrix* dw, std::vector<double>* dx) {
  if (dw) {
    for (int i = 0; i < w.rows; ++i)
      for (int j = 0; j < w.cols; ++j) (*dw)(i, j) += x[i] * dy[j];
  }
  if (dx) {
    for (int i = 0; i < w.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < w.cols; ++j) acc += w(i, j) * dy[j];
      (*dx)[i] += acc;
    }
  }
}

inline int safe_row(const ParamTensor& table, int id) {
  return (id < 0 || id >= table.value.rows) ? kOovId : id;
}

inline void add_to_embedding_grad(ParamTensor& table, int id, const double* v, int q) {
  const int row = safe_row(table, id);
  double* g = table.grad.row(row);
  for (int i = 0; i < q; ++i) g[i] += v[i];
}

}  // namespace detail

/// Glorot-uniform init for embeddings and weights, zero biases. The draw
/// order is fixed (embeddings, experts, gates) so a seed pins every tensor.
inline ModelParams init_model_params(const ModelConfig& config, const std::vector<int>& vocab_sizes) {
  ModelConfig cfg = config.canonical();
  cfg.validate();
  if (static_cast<int>(vocab_sizes.size()) != cfg.n_sparse)
    throw std::invalid_argument("init_model_params: vocab_sizes must have n_sparse entries");

  ModelParams p;
  p.config = cfg;
  Rng rng = make_rng(cfg.seed, "model.init");

  for (int f = 0; f < cfg.n_sparse; ++f) {
    p.embeddings.emplace_back("embed" + std::to_string(f), vocab_sizes[f], cfg.embed_dim);
    detail::glorot_init(p.embeddings.back().value, rng);
  }
  for (int e = 0; e < cfg.n_experts; ++e) {
    Mlp mlp;
    int in_w = cfg.input_width();
    for (size_t l = 0; l < cfg.expert_widths.size(); ++l) {
      const int out_w = cfg.expert_widths[l];
      const std::string base = "expert" + std::to_string(e) + ".l" + std::to_string(l);
      mlp.weights.emplace_back(base + ".w", in_w, out_w);
      mlp.biases.emplace_back(base + ".b", 1, out_w);
      detail::glorot_init(mlp.weights.back().value, rng);
      in_w = out_w;
    }
    p.experts.push_back(std::move(mlp));
  }
  p.gate_infer = ParamTensor("gate.infer", cfg.gate_width(), cfg.n_experts);
  p.gate_noise = ParamTensor("gate.noise", cfg.gate_width(), cfg.n_experts);
  p.gate_constraint = ParamTensor("gate.constraint", cfg.embed_dim, cfg.n_experts);
  detail::glorot_init(p.gate_infer.value, rng);
  detail::glorot_init(p.gate_noise.value, rng);
  detail::glorot_init(p.gate_constraint.value, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Forward building blocks
// ---------------------------------------------------------------------------

struct ForwardStats {
  long long expert_evals = 0;
  long long examples = 0;
};

/// Model input: embedded sparse features followed by normalized numerics.
inline std::vector<double> assemble_input(const Example& ex, const ModelParams& p) {
  const int q = p.config.embed_dim;
  std::vector<double> x;
  x.reserve(p.config.input_width());
  for (int f = 0; f < p.config.n_sparse; ++f) {
    const ParamTensor& table = p.embeddings[f];
    const int row = detail::safe_row(table, ex.sparse_ids[f]);
    const double* v = table.value.row(row);
    x.insert(x.end(), v, v + q);
  }
  x.insert(x.end(), ex.numeric.begin(), ex.numeric.end());
  return x;
}

struct GateScores {
  std::vector<double> raw;        // x_gate W^I
  std::vector<double> noisy;      // raw + eps * softplus(x_gate W^noise)
  std::vector<double> noise_raw;  // empty when noise is off
  std::vector<double> eps;        // empty when noise is off
};

/// Raw and (during training) noise-perturbed gate scores. The noise standard
/// deviation is learned per expert through W^noise.
inline GateScores inference_gate_scores(const std::vector<double>& x_gate, const ModelParams& p,
                                        bool training, Rng* rng) {
  GateScores s;
  s.raw = detail::matvec(x_gate, p.gate_infer.value);
  if (training && p.config.noise_enabled) {
    if (!rng) throw std::invalid_argument("inference_gate_scores: training noise requires an rng");
    s.noise_raw = detail::matvec(x_gate, p.gate_noise.value);
    s.eps.resize(s.raw.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    s.noisy.resize(s.raw.size());
    for (size_t i = 0; i < s.raw.size(); ++i) {
      s.eps[i] = gauss(*rng);
      s.noisy[i] = s.raw[i] + s.eps[i] * softplus(s.noise_raw[i]);
    }
  } else {
    s.noisy = s.raw;
  }
  return s;
}

struct TopK {
  std::vector<double> masked;  // top-K scores kept, the rest -inf
  std::vector<int> indices;    // ascending expert indices of the top K
};

/// Keeps the K largest scores and masks the rest with -inf. Ties break
/// toward the lower expert index so selection is deterministic.
inline TopK top_k_select(const std::vector<double>& scores, int k) {
  const int n = static_cast<int>(scores.size());
  if (k < 1 || k > n) throw std::invalid_argument("top_k_select: need 1 <= K <= N");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  TopK out;
  out.indices.assign(order.begin(), order.begin() + k);
  std::sort(out.indices.begin(), out.indices.end());
  out.masked.assign(n, kNegInf);
  for (int i : out.indices) out.masked[i] = scores[i];
  return out;
}

/// Softmax over the masked scores: exactly K positive probabilities.
inline std::vector<double> gate_probs(const std::vector<double>& masked) { return softmax(masked); }

/// Squared gap between the two gate distributions on the active coordinates.
inline double hsc_loss(const std::vector<double>& p_infer, const std::vector<double>& p_constraint,
                       const std::vector<int>& topk) {
  double acc = 0.0;
  for (int i : topk) {
    const double d = p_infer[i] - p_constraint[i];
    acc += d * d;
  }
  return acc;
}

/// Uniform sample of D disagreeing experts from outside the top-K set.
/// Consumes no randomness when D == 0.
inline std::vector<int> sample_disagreeing(const std::vector<int>& topk, int n_experts, int n_disagree,
                                           Rng& rng) {
  const int idle = n_experts - static_cast<int>(topk.size());
  if (n_disagree < 0 || n_disagree > idle)
    throw std::invalid_argument("sample_disagreeing: need 0 <= D <= N - K");
  if (n_disagree == 0) return {};
  std::vector<char> in_topk(n_experts, 0);
  for (int i : topk) in_topk[i] = 1;
  std::vector<int> pool;
  pool.reserve(idle);
  for (int i = 0; i < n_experts; ++i)
    if (!in_topk[i]) pool.push_back(i);
  for (int i = 0; i < n_disagree; ++i) {
    std::uniform_int_distribution<int> u(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[i], pool[u(rng)]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + n_disagree);
  std::sort(out.begin(), out.end());
  return out;
}

/// Pairwise squared disagreement between active and idle expert probabilities.
inline double adv_loss_from_sigmoids(const std::vector<double>& topk_sig,
                                     const std::vector<double>& disagree_sig) {
  double acc = 0.0;
  for (double a : topk_sig)
    for (double b : disagree_sig) {
      const double d = a - b;
      acc += d * d;
    }
  return acc;
}

// ---------------------------------------------------------------------------
// Expert towers
// ---------------------------------------------------------------------------

struct MlpCache {
  std::vector<std::vector<double>> inputs;   // input to each affine layer
  std::vector<std::vector<double>> preacts;  // z of each layer
  double logit = 0.0;
};

inline double expert_forward(const ModelParams& p, int expert, const std::vector<double>& x,
                             MlpCache* cache, ForwardStats* stats) {
  const Mlp& mlp = p.experts[expert];
  const size_t n_layers = mlp.weights.size();
  if (stats) stats->expert_evals += 1;
  std::vector<double> act = x;
  for (size_t l = 0; l < n_layers; ++l) {
    std::vector<double> z = affine(act, mlp.weights[l].value, mlp.biases[l].value.data);
    if (cache) {
      cache->inputs.push_back(std::move(act));
      cache->preacts.push_back(z);
    }
    act = (l + 1 < n_layers) ? relu(z) : std::move(z);
  }
  const double logit = act[0];
  if (cache) cache->logit = logit;
  return logit;
}

/// Accumulates tower gradients given dL/dlogit and adds dL/dx into dx_accum.
inline void expert_backward(ModelParams& p, int expert, const MlpCache& cache, double dlogit,
                            std::vector<double>* dx_accum) {
  Mlp& mlp = p.experts[expert];
  const int n_layers = static_cast<int>(mlp.weights.size());
  std::vector<double> up{dlogit};
  for (int l = n_layers - 1; l >= 0; --l) {
    std::vector<double> dz = (l == n_layers - 1) ? up : relu_backward(cache.preacts[l], up);
    if (l > 0) {
      std::vector<double> dprev(cache.inputs[l].size(), 0.0);
      affine_backward(cache.inputs[l], mlp.weights[l].value, dz, &dprev, &mlp.weights[l].grad,
                      &mlp.biases[l].grad.data);
      up = std::move(dprev);
    } else {
      affine_backward(cache.inputs[l], mlp.weights[l].value, dz, dx_accum, &mlp.weights[l].grad,
                      &mlp.biases[l].grad.data);
    }
  }
}

// ---------------------------------------------------------------------------
// Gate decisions and prediction
// ---------------------------------------------------------------------------

struct GateDecision {
  std::vector<double> raw_scores;
  std::vector<double> noisy_scores;
  std::vector<int> topk_indices;
  std::vector<double> gate_probs;    // exactly K nonzeros, sums to 1
  std::vector<double> p_infer;       // full softmax of raw scores
  std::vector<double> p_constraint;  // full softmax of constraint scores
  std::vector<int> disagree_indices;
};

struct Prediction {
  double logit = 0.0;
  double y_hat = 0.0;
  std::vector<std::pair<int, double>> expert_logits;  // (expert, logit) over top-K
};

/// Weighted combination of the active expert towers. Only the experts in the
/// decision's top-K set are evaluated.
inline Prediction predict(const ModelParams& p, const std::vector<double>& x, const GateDecision& gate,
                          std::vector<MlpCache>* caches = nullptr, ForwardStats* stats = nullptr) {
  Prediction out;
  double acc = 0.0;
  for (int i : gate.topk_indices) {
    MlpCache* cache = nullptr;
    if (caches) {
      caches->emplace_back();
      cache = &caches->back();
    }
    const double logit = expert_forward(p, i, x, cache, stats);
    out.expert_logits.emplace_back(i, logit);
    if (p.config.combine == Combine::LogitWeighted) {
      acc += gate.gate_probs[i] * logit;
    } else {
      acc += gate.gate_probs[i] * sigmoid(logit);
    }
  }
  out.logit = acc;
  out.y_hat = p.config.combine == Combine::LogitWeighted ? sigmoid(acc) : acc;
  if (stats) stats->examples += 1;
  return out;
}

constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double y) { return std::clamp(y, kProbClamp, 1.0 - kProbClamp); }

inline double cross_entropy(double y_hat, int label) {
  const double y = clamp_prob(y_hat);
  return label == 1 ? -std::log(y) : -std::log1p(-y);
}

// ---------------------------------------------------------------------------
// Batch forward / backward
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double ce = 0.0;
  double hsc = 0.0;
  double adv = 0.0;
  double total = 0.0;
};

struct GateCache {
  std::vector<double> x_gate;
  GateScores scores;
  GateDecision decision;
  double hsc = 0.0;    // per-example HSC value for examples under this gate
  int n_examples = 0;  // examples sharing this gate unit
};

struct ExampleCache {
  const Example* ex = nullptr;
  int gate_index = 0;
  std::vector<double> x;
  std::vector<MlpCache> topk_caches;      // aligned with decision.topk_indices
  std::vector<MlpCache> disagree_caches;  // aligned with decision.disagree_indices
  std::vector<double> disagree_logits;
  double logit = 0.0;
  double y_hat = 0.0;
  double adv = 0.0;
};

struct SessionCache {
  const Session* session = nullptr;
  std::vector<double> x_tc;  // TC embedding feeding the constraint gate
  std::vector<GateCache> gates;
  std::vector<ExampleCache> examples;
};

struct BatchCache {
  std::vector<SessionCache> sessions;
  int n_examples = 0;
};

namespace detail {

inline std::vector<double> gate_input_vector(const ModelParams& p, const Session& s, const Example& ex) {
  const int q = p.config.embed_dim;
  auto row = [&](int feature, int id) { return p.embeddings[feature].value.row(safe_row(p.embeddings[feature], id)); };
  std::vector<double> x;
  switch (p.config.gate_input) {
    case GateInput::Sc:
      x.assign(row(0, s.sc_id), row(0, s.sc_id) + q);
      break;
    case GateInput::TcSc: {
      x.reserve(2 * q);
      x.assign(row(0, s.sc_id), row(0, s.sc_id) + q);
      const double* tc = row(1, s.tc_id);
      x.insert(x.end(), tc, tc + q);
      break;
    }
    case GateInput::AllSparse: {
      x.reserve(p.config.n_sparse * q);
      for (int f = 0; f < p.config.n_sparse; ++f) {
        const double* v = row(f, ex.sparse_ids[f]);
        x.insert(x.end(), v, v + q);
      }
      break;
    }
  }
  return x;
}

/// Routes a gate-input gradient slice back to the embedding rows it came from.
inline void route_gate_grad(ModelParams& p, const Session& s, const Example& ex,
                            const std::vector<double>& dx_gate) {
  const int q = p.config.embed_dim;
  switch (p.config.gate_input) {
    case GateInput::Sc:
      add_to_embedding_grad(p.embeddings[0], s.sc_id, dx_gate.data(), q);
      break;
    case GateInput::TcSc:
      add_to_embedding_grad(p.embeddings[0], s.sc_id, dx_gate.data(), q);
      add_to_embedding_grad(p.embeddings[1], s.tc_id, dx_gate.data() + q, q);
      break;
    case GateInput::AllSparse:
      for (int f = 0; f < p.config.n_sparse; ++f)
        add_to_embedding_grad(p.embeddings[f], ex.sparse_ids[f], dx_gate.data() + f * q, q);
      break;
  }
}

inline GateCache make_gate(const ModelParams& p, const Session& s, const Example& ex,
                           const std::vector<double>& x_tc, bool training, Rng* rng) {
  const ModelConfig& cfg = p.config;
  GateCache g;
  g.x_gate = gate_input_vector(p, s, ex);
  g.scores = inference_gate_scores(g.x_gate, p, training, rng);
  TopK tk = top_k_select(g.scores.noisy, cfg.top_k);
  g.decision.raw_scores = g.scores.raw;
  g.decision.noisy_scores = g.scores.noisy;
  g.decision.topk_indices = std::move(tk.indices);
  g.decision.gate_probs = gate_probs(tk.masked);
  g.decision.p_infer = softmax(g.scores.raw);
  g.decision.p_constraint = softmax(matvec(x_tc, p.gate_constraint.value));
  if (training && cfg.eff_disagree() > 0) {
    if (!rng) throw std::invalid_argument("make_gate: disagreeing-expert sampling requires an rng");
    g.decision.disagree_indices =
        sample_disagreeing(g.decision.topk_indices, cfg.n_experts, cfg.eff_disagree(), *rng);
  }
  if (cfg.eff_lambda1() != 0.0)
    g.hsc = hsc_loss(g.decision.p_infer, g.decision.p_constraint, g.decision.topk_indices);
  return g;
}

}  // namespace detail

/// Gate decision for one session under the current parameters (evaluation
/// mode unless an rng is supplied and training is requested).
inline GateDecision gate_for_session(const ModelParams& p, const Session& s, bool training = false,
                                     Rng* rng = nullptr) {
  if (!p.config.gate_per_session())
    throw std::invalid_argument("gate_for_session: gate input uses item-side features; gate is per example");
  const int q = p.config.embed_dim;
  const ParamTensor& tc_table = p.embeddings[1];
  const double* tc_row = tc_table.value.row(detail::safe_row(tc_table, s.tc_id));
  std::vector<double> x_tc(tc_row, tc_row + q);
  return detail::make_gate(p, s, s.examples.front(), x_tc, training, rng).decision;
}

/// Forward pass over a session-grouped batch. When `cache` is non-null every
/// intermediate needed by the backward pass is recorded. Returns per-batch
/// mean losses; `total` already carries the variant's effective lambdas.
inline LossBreakdown combined_loss(const ModelParams& p, const Batch& batch, bool training, Rng* rng,
                                   BatchCache* cache, ForwardStats* stats = nullptr) {
  const ModelConfig& cfg = p.config;
  const int q = cfg.embed_dim;
  LossBreakdown sum;
  long n = 0;
  if (cache) {
    cache->sessions.clear();
    cache->sessions.reserve(batch.sessions.size());
    cache->n_examples = batch.n_examples;
  }
  for (const Session* sp : batch.sessions) {
    const Session& s = *sp;
    if (s.examples.empty()) continue;
    SessionCache sc_cache;
    sc_cache.session = sp;
    const ParamTensor& tc_table = p.embeddings[1];
    const double* tc_row = tc_table.value.row(detail::safe_row(tc_table, s.tc_id));
    sc_cache.x_tc.assign(tc_row, tc_row + q);

    if (cfg.gate_per_session()) {
      sc_cache.gates.push_back(detail::make_gate(p, s, s.examples.front(), sc_cache.x_tc, training, rng));
      sc_cache.gates[0].n_examples = static_cast<int>(s.examples.size());
    } else {
      sc_cache.gates.reserve(s.examples.size());
      for (const Example& ex : s.examples) {
        sc_cache.gates.push_back(detail::make_gate(p, s, ex, sc_cache.x_tc, training, rng));
        sc_cache.gates.back().n_examples = 1;
      }
    }

    for (size_t ei = 0; ei < s.examples.size(); ++ei) {
      const Example& ex = s.examples[ei];
      ExampleCache ec;
      ec.ex = &ex;
      ec.gate_index = cfg.gate_per_session() ? 0 : static_cast<int>(ei);
      GateCache& gate = sc_cache.gates[ec.gate_index];
      ec.x = assemble_input(ex, p);
      Prediction pred = predict(p, ec.x, gate.decision, cache ? &ec.topk_caches : nullptr, stats);
      ec.logit = pred.logit;
      ec.y_hat = pred.y_hat;
      sum.ce += cross_entropy(ec.y_hat, ex.label);
      sum.hsc += gate.hsc;

      if (training && !gate.decision.disagree_indices.empty()) {
        std::vector<double> topk_sig, dis_sig;
        topk_sig.reserve(pred.expert_logits.size());
        for (const auto& [idx, logit] : pred.expert_logits) topk_sig.push_back(sigmoid(logit));
        for (int j : gate.decision.disagree_indices) {
          MlpCache* c = nullptr;
          if (cache) {
            ec.disagree_caches.emplace_back();
            c = &ec.disagree_caches.back();
          }
          const double logit = expert_forward(p, j, ec.x, c, stats);
          ec.disagree_logits.push_back(logit);
          dis_sig.push_back(sigmoid(logit));
        }
        ec.adv = adv_loss_from_sigmoids(topk_sig, dis_sig);
        sum.adv += ec.adv;
      }
      ++n;
      if (cache) sc_cache.examples.push_back(std::move(ec));
    }
    if (cache) cache->sessions.push_back(std::move(sc_cache));
  }
  if (n == 0) return {};
  LossBreakdown mean;
  mean.ce = sum.ce / n;
  mean.hsc = sum.hsc / n;
  mean.adv = sum.adv / n;
  mean.total = mean.ce + cfg.eff_lambda1() * mean.hsc - cfg.eff_lambda2() * mean.adv;
  return mean;
}

/// Backward pass for a cached batch. Gradient routing follows the training
/// objective's structure: expert towers receive CE and (negated) adversarial
/// contributions only, the inference gate receives all active terms, and the
/// constraint gate receives only the hierarchy term.
inline void backward_batch(ModelParams& p, const BatchCache& cache) {
  const ModelConfig& cfg = p.config;
  if (cache.n_examples == 0) return;
  const double inv_n = 1.0 / cache.n_examples;
  const double c_hsc = cfg.eff_lambda1() * inv_n;
  const double c_adv = cfg.eff_lambda2() * inv_n;
  const int n_experts = cfg.n_experts;
  const int q = cfg.embed_dim;

  for (const SessionCache& sc : cache.sessions) {
    const Session& s = *sc.session;
    std::vector<std::vector<double>> d_probs(sc.gates.size(), std::vector<double>(n_experts, 0.0));
    std::vector<double> d_p_constraint(n_experts, 0.0);
    bool constraint_active = false;

    for (const ExampleCache& ec : sc.examples) {
      const GateCache& gate = sc.gates[ec.gate_index];
      const GateDecision& gd = gate.decision;
      std::vector<double>& dP = d_probs[ec.gate_index];
      std::vector<double> dx(ec.x.size(), 0.0);

      // Cross entropy through the combined prediction. The clamp used in the
      // forward value is honored: a saturated prediction has zero gradient.
      const double y = ec.y_hat;
      std::vector<double> d_logit(gd.topk_indices.size(), 0.0);
      if (y > kProbClamp && y < 1.0 - kProbClamp) {
        if (cfg.combine == Combine::LogitWeighted) {
          const double dz = inv_n * (y - ec.ex->label);
          for (size_t k = 0; k < gd.topk_indices.size(); ++k) {
            const int i = gd.topk_indices[k];
            d_logit[k] += dz * gd.gate_probs[i];
            dP[i] += dz * ec.topk_caches[k].logit;
          }
        } else {
          const double dy = inv_n * (y - ec.ex->label) / (y * (1.0 - y));
          for (size_t k = 0; k < gd.topk_indices.size(); ++k) {
            const int i = gd.topk_indices[k];
            const double si = sigmoid(ec.topk_caches[k].logit);
            d_logit[k] += dy * gd.gate_probs[i] * si * (1.0 - si);
            dP[i] += dy * si;
          }
        }
      }

      // Adversarial term (subtracted from the loss).
      std::vector<double> d_dis_logit(ec.disagree_logits.size(), 0.0);
      if (c_adv != 0.0 && !ec.disagree_logits.empty()) {
        for (size_t k = 0; k < gd.topk_indices.size(); ++k) {
          const double si = sigmoid(ec.topk_caches[k].logit);
          for (size_t d = 0; d < ec.disagree_logits.size(); ++d) {
            const double sj = sigmoid(ec.disagree_logits[d]);
            const double diff = si - sj;
            if (!cfg.adv_stop_topk_grad) d_logit[k] += -c_adv * 2.0 * diff * si * (1.0 - si);
            d_dis_logit[d] += c_adv * 2.0 * diff * sj * (1.0 - sj);
          }
        }
      }

      for (size_t k = 0; k < gd.topk_indices.size(); ++k)
        expert_backward(p, gd.topk_indices[k], ec.topk_caches[k], d_logit[k], &dx);
      for (size_t d = 0; d < ec.disagree_caches.size(); ++d)
        expert_backward(p, gd.disagree_indices[d], ec.disagree_caches[d], d_dis_logit[d], &dx);

      for (int f = 0; f < cfg.n_sparse; ++f)
        detail::add_to_embedding_grad(p.embeddings[f], ec.ex->sparse_ids[f], dx.data() + f * q, q);
    }

    for (size_t gi = 0; gi < sc.gates.size(); ++gi) {
      const GateCache& gate = sc.gates[gi];
      const GateDecision& gd = gate.decision;
      std::vector<double> d_masked = softmax_backward(gd.gate_probs, d_probs[gi]);
      std::vector<double> d_raw = d_masked;  // masked entries already carry 0
      std::vector<double> dx_gate(gate.x_gate.size(), 0.0);

      if (!gate.scores.noise_raw.empty()) {
        std::vector<double> d_noise_raw(n_experts, 0.0);
        for (int i = 0; i < n_experts; ++i)
          d_noise_raw[i] = d_masked[i] * gate.scores.eps[i] * sigmoid(gate.scores.noise_raw[i]);
        detail::matvec_backward(gate.x_gate, p.gate_noise.value, d_noise_raw, &p.gate_noise.grad, &dx_gate);
      }

      if (c_hsc != 0.0) {
        const double mult = c_hsc * gate.n_examples;
        std::vector<double> d_p_infer(n_experts, 0.0);
        for (int i : gd.topk_indices) {
          const double d = 2.0 * mult * (gd.p_infer[i] - gd.p_constraint[i]);
          d_p_infer[i] = d;
          d_p_constraint[i] -= d;
        }
        constraint_active = true;
        std::vector<double> d_raw_hsc = softmax_backward(gd.p_infer, d_p_infer);
        for (int i = 0; i < n_experts; ++i) d_raw[i] += d_raw_hsc[i];
      }

      detail::matvec_backward(gate.x_gate, p.gate_infer.value, d_raw, &p.gate_infer.grad, &dx_gate);
      const Example& ex = s.examples[cfg.gate_per_session() ? 0 : gi];
      detail::route_gate_grad(p, s, ex, dx_gate);
    }

    if (constraint_active) {
      std::vector<double> d_c_raw = softmax_backward(sc.gates[0].decision.p_constraint, d_p_constraint);
      std::vector<double> dx_tc(q, 0.0);
      detail::matvec_backward(sc.x_tc, p.gate_constraint.value, d_c_raw, &p.gate_constraint.grad, &dx_tc);
      detail::add_to_embedding_grad(p.embeddings[1], s.tc_id, dx_tc.data(), q);
    }
  }
}

/// One optimization step: forward, backward, AdamW on every tensor.
inline LossBreakdown backward_and_update(ModelParams& p, const Batch& batch, Rng& rng,
                                         const AdamWConfig& opt, ForwardStats* stats = nullptr) {
  p.zero_grads();
  BatchCache cache;
  LossBreakdown loss = combined_loss(p, batch, /*training=*/true, &rng, &cache, stats);
  if (!std::isfinite(loss.total))
    throw std::runtime_error("backward_and_update: non-finite training loss (ce=" +
                             std::to_string(loss.ce) + ")");
  backward_batch(p, cache);
  for (ParamTensor* t : p.named_tensors()) adamw_step(*t, opt);
  return loss;
}

/// Evaluation-mode scores for one session (no noise, no regularizer terms).
inline std::vector<double> score_session(const ModelParams& p, const Session& s,
                                         ForwardStats* stats = nullptr) {
  std::vector<double> scores;
  scores.reserve(s.examples.size());
  const int q = p.config.embed_dim;
  const ParamTensor& tc_table = p.embeddings[1];
  const double* tc_row = tc_table.value.row(detail::safe_row(tc_table, s.tc_id));
  std::vector<double> x_tc(tc_row, tc_row + q);

  std::optional<GateCache> shared;
  if (p.config.gate_per_session())
    shared = detail::make_gate(p, s, s.examples.front(), x_tc, /*training=*/false, nullptr);
  for (const Example& ex : s.examples) {
    const GateCache gate = shared ? *shared : detail::make_gate(p, s, ex, x_tc, false, nullptr);
    const std::vector<double> x = assemble_input(ex, p);
    scores.push_back(predict(p, x, gate.decision, nullptr, stats).y_hat);
  }
  return scores;
}

}  // namespace moerank
