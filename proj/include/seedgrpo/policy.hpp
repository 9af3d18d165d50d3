// Copyright 2026 The seedgrpo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seedgrpo/error.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/task.hpp"
#include "seedgrpo/tokens.hpp"

namespace seedgrpo {

using LogitRow = std::array<double, kVocabSize>;

/// Log-softmax of one logit row, shifted by the row max for stability.
inline LogitRow log_softmax(std::span<const double, kVocabSize> logits) {
  const auto top = std::max_element(logits.begin(), logits.end());
  const double m = *top;
  double rest = 0.0;  // mass outside the argmax, relative to it
  for (auto it = logits.begin(); it != logits.end(); ++it)
    if (it != top) rest += std::exp(*it - m);
  const double log_z = std::log1p(rest);
  LogitRow out;
  for (int v = 0; v < kVocabSize; ++v) out[v] = (logits[v] - m) - log_z;
  return out;
}

inline LogitRow softmax(std::span<const double, kVocabSize> logits) {
  LogitRow out = log_softmax(logits);
  for (double& x : out) x = std::exp(x);
  return out;
}

/// Tabular order-k autoregressive softmax policy.
///
/// The conditional at each step is a softmax over one row of the logit
/// table. The row is selected by the state function
///   (a mod M, b mod M, last k emitted tokens),
/// where M is the task modulus and the context is left-padded with BOS.
class PolicyParams {
 public:
  static constexpr int kMaxContextOrder = 4;

  PolicyParams(int modulus, int context_order) : modulus_(modulus), context_order_(context_order) {
    if (modulus < 2) throw ConfigError("policy.modulus must be >= 2");
    if (context_order < 0 || context_order > kMaxContextOrder)
      throw ConfigError("policy.context_order must be in [0, 4]");
    contexts_ = 1;
    for (int i = 0; i < context_order_; ++i) contexts_ *= kVocabSize;
    logits_.assign(num_states() * kVocabSize, 0.0);
  }

  int modulus() const { return modulus_; }
  int context_order() const { return context_order_; }
  std::size_t num_contexts() const { return contexts_; }
  std::size_t num_states() const {
    return static_cast<std::size_t>(modulus_) * static_cast<std::size_t>(modulus_) * contexts_;
  }

  /// State index for the next token after `emitted` has been generated.
  std::size_t state_index(const Prompt& prompt, std::span<const Token> emitted) const {
    const auto m = static_cast<std::int64_t>(modulus_);
    const auto pair = static_cast<std::size_t>(floor_mod(prompt.a, m) * m + floor_mod(prompt.b, m));
    std::size_t ctx = 0;
    for (int j = context_order_; j >= 1; --j) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(emitted.size()) - j;
      const Token t = pos >= 0 ? emitted[static_cast<std::size_t>(pos)] : kBos;
      ctx = ctx * kVocabSize + static_cast<std::size_t>(t);
    }
    return pair * contexts_ + ctx;
  }

  std::span<double, kVocabSize> row(std::size_t state) {
    return std::span<double, kVocabSize>(logits_.data() + state * kVocabSize, kVocabSize);
  }
  std::span<const double, kVocabSize> row(std::size_t state) const {
    return std::span<const double, kVocabSize>(logits_.data() + state * kVocabSize, kVocabSize);
  }

  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }

  bool all_finite() const {
    return std::all_of(logits_.begin(), logits_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  int modulus_;
  int context_order_;
  std::size_t contexts_ = 1;
  std::vector<double> logits_;
};

/// Frozen copy of a policy, shared read-only between samplers.
using PolicySnapshot = std::shared_ptr<const PolicyParams>;

inline PolicySnapshot snapshot(const PolicyParams& params) {
  return std::make_shared<const PolicyParams>(params);
}

/// One sampled response o_i.
struct Rollout {
  std::vector<Token> tokens;
  std::vector<double> per_token_logp;
  double total_logp = 0.0;
  std::optional<std::string> answer;

  std::size_t length() const { return tokens.size(); }
  friend bool operator==(const Rollout&, const Rollout&) = default;
};

inline Rollout sample_rollout(const PolicyParams& params, const Prompt& prompt, CounterRng& rng,
                              std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  Rollout r;
  r.tokens.reserve(max_len);
  r.per_token_logp.reserve(max_len);
  while (r.tokens.size() < max_len) {
    const LogitRow lp = log_softmax(params.row(params.state_index(prompt, r.tokens)));
    const double u = rng.uniform();
    double cum = 0.0;
    Token pick = kVocabSize - 1;
    for (Token v = 0; v < kVocabSize; ++v) {
      cum += std::exp(lp[v]);
      if (u < cum) {
        pick = v;
        break;
      }
    }
    r.tokens.push_back(pick);
    r.per_token_logp.push_back(lp[pick]);
    if (pick == kEos) break;
  }
  for (double x : r.per_token_logp) r.total_logp += x;
  r.answer = canonicalize_answer(r.tokens);
  return r;
}

inline void check_tokens(std::span<const Token> tokens) {
  if (tokens.empty()) throw InputError("token sequence is empty");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!is_valid_token(tokens[i]))
      throw InputError("token id " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                       " is outside the vocabulary [0, " + std::to_string(kVocabSize) + ")");
}

/// Per-step (state, log-prob) pairs of a fixed token sequence.
struct TokenScores {
  std::vector<std::size_t> states;
  std::vector<double> logp;
};

inline TokenScores score_tokens(const PolicyParams& params, const Prompt& prompt, std::span<const Token> tokens) {
  check_tokens(tokens);
  TokenScores s;
  s.states.reserve(tokens.size());
  s.logp.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::size_t state = params.state_index(prompt, tokens.first(t));
    s.states.push_back(state);
    s.logp.push_back(log_softmax(params.row(state))[tokens[t]]);
  }
  return s;
}

/// log pi(o | q): sum of per-token log-probs, accumulated left to right.
inline double sequence_logprob(const PolicyParams& params, const Prompt& prompt, std::span<const Token> tokens) {
  double total = 0.0;
  for (double x : score_tokens(params, prompt, tokens).logp) total += x;
  return total;
}

/// Gradient with respect to the logit table, stored by touched state.
/// Untouched rows are implicitly zero. Iteration order is by state index.
class SparseGrad {
 public:
  LogitRow& row(std::size_t state) {
    auto [it, inserted] = rows_.try_emplace(state);
    if (inserted) it->second.fill(0.0);
    return it->second;
  }

  const std::map<std::size_t, LogitRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  double at(std::size_t state, Token v) const {
    auto it = rows_.find(state);
    return it == rows_.end() ? 0.0 : it->second[v];
  }

  /// this += scale * other
  void add(const SparseGrad& other, double scale) {
    for (const auto& [s, r] : other.rows_) {
      LogitRow& dst = row(s);
      for (int v = 0; v < kVocabSize; ++v) dst[v] += scale * r[v];
    }
  }

  double squared_norm() const {
    double acc = 0.0;
    for (const auto& [s, r] : rows_)
      for (double x : r) acc += x * x;
    return acc;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  /// Adds weight * (onehot(token) - softmax(row(state))) to row(state):
  /// the gradient of weight * log softmax(logits[state])[token].
  void accumulate_logprob(const PolicyParams& params, std::size_t state, Token token, double weight) {
    const LogitRow p = softmax(params.row(state));
    LogitRow& dst = row(state);
    for (int v = 0; v < kVocabSize; ++v) dst[v] -= weight * p[v];
    dst[token] += weight;
  }

 private:
  std::map<std::size_t, LogitRow> rows_;
};

/// Gradient of sequence_logprob with respect to the logits.
inline SparseGrad logprob_grad(const PolicyParams& params, const Prompt& prompt, std::span<const Token> tokens) {
  const TokenScores s = score_tokens(params, prompt, tokens);
  SparseGrad g;
  for (std::size_t t = 0; t < tokens.size(); ++t) g.accumulate_logprob(params, s.states[t], tokens[t], 1.0);
  return g;
}

/// params += step * grad
inline void apply_update(PolicyParams& params, const SparseGrad& grad, double step) {
  for (const auto& [s, r] : grad.rows()) {
    auto dst = params.row(s);
    for (int v = 0; v < kVocabSize; ++v) dst[v] += step * r[v];
  }
}

/// Argmax decode; ties go to the lowest token id.
inline std::vector<Token> greedy_decode(const PolicyParams& params, const Prompt& prompt, std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  std::vector<Token> out;
  while (out.size() < max_len) {
    const auto r = params.row(params.state_index(prompt, out));
    const auto best = static_cast<Token>(std::max_element(r.begin(), r.end()) - r.begin());
    out.push_back(best);
    if (best == kEos) break;
  }
  return out;
}

/// A policy whose greedy path (and, for large `confidence`, whose samples)
/// spell the correct answer followed by EOS for every residue pair.
inline PolicyParams oracle_policy(int modulus, int context_order, double confidence = 50.0) {
  PolicyParams params(modulus, context_order);
  std::vector<std::optional<Token>> assigned(params.num_states());
  for (int a = 0; a < modulus; ++a) {
    for (int b = 0; b < modulus; ++b) {
      const Prompt p = make_prompt(0, a, b, modulus);
      std::vector<Token> path = digits_of(static_cast<std::uint64_t>(floor_mod(a + b, modulus)));
      path.push_back(kEos);
      std::vector<Token> prefix;
      for (Token t : path) {
        const std::size_t s = params.state_index(p, prefix);
        if (assigned[s] && *assigned[s] != t)
          throw ConfigError("policy.context_order too small to encode every answer path");
        assigned[s] = t;
        params.row(s)[t] = confidence;
        prefix.push_back(t);
      }
    }
  }
  return params;
}

}  // namespace seedgrpo
