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

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "seedgrpo/error.hpp"
#include "seedgrpo/policy.hpp"

namespace seedgrpo {

enum class MassMode { count, prob };

inline std::string_view to_string(MassMode m) { return m == MassMode::count ? "count" : "prob"; }

inline MassMode parse_mass_mode(std::string_view s) {
  if (s == "count") return MassMode::count;
  if (s == "prob") return MassMode::prob;
  throw ConfigError("entropy mode must be 'count' or 'prob', got '" + std::string(s) + "'");
}

/// One meaning class C_k: an answer key plus the indices of its rollouts.
struct Cluster {
  std::string key;
  std::vector<std::size_t> members;
};

/// Partition of a rollout group into meaning classes, in first-occurrence order.
struct ClusterSet {
  std::vector<Cluster> clusters;

  std::size_t k() const { return clusters.size(); }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    for (const auto& c : clusters) out.push_back(c.members.size());
    return out;
  }
};

/// Meaning key of a rollout. Parsed answers share a key iff their canonical
/// strings are equal; an unparseable rollout is keyed by its raw tokens.
inline std::string answer_key(const Rollout& r) {
  if (r.answer) return "=" + *r.answer;
  std::string key = "!";
  for (Token t : r.tokens) key.push_back(static_cast<char>('a' + t));
  return key;
}

inline ClusterSet cluster_by_answer(std::span<const Rollout> rollouts) {
  if (rollouts.empty()) throw InputError("cannot cluster an empty rollout group");
  ClusterSet out;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    std::string key = answer_key(rollouts[i]);
    auto [it, inserted] = index.try_emplace(key, out.clusters.size());
    if (inserted) out.clusters.push_back({std::move(key), {}});
    out.clusters[it->second].members.push_back(i);
  }
  return out;
}

/// p(C_k | q) for every observed cluster.
///
/// count: |C_k| / G.
/// prob:  sum of pi_old(o_i|q) over C_k, renormalized over the G samples;
///        evaluated in log space against the largest total_logp.
inline std::vector<double> cluster_mass(const ClusterSet& clusters, std::span<const Rollout> rollouts, MassMode mode) {
  const double g = static_cast<double>(rollouts.size());
  std::vector<double> masses;
  masses.reserve(clusters.k());
  if (mode == MassMode::count) {
    for (const auto& c : clusters.clusters) masses.push_back(static_cast<double>(c.members.size()) / g);
    return masses;
  }
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& r : rollouts) top = std::max(top, r.total_logp);
  if (!std::isfinite(top)) throw NumericError("prob-mode cluster mass: no rollout has finite log-probability");
  double z = 0.0;
  for (const auto& r : rollouts) z += std::exp(r.total_logp - top);
  for (const auto& c : clusters.clusters) {
    double s = 0.0;
    for (std::size_t i : c.members) s += std::exp(rollouts[i].total_logp - top);
    masses.push_back(s / z);
  }
  return masses;
}

/// Monte Carlo semantic entropy: -(1/K) sum_k log p(C_k|q), in nats.
/// Note this is an unweighted mean over observed clusters, not the
/// Shannon entropy of the masses.
inline double semantic_entropy(std::span<const double> masses) {
  if (masses.empty()) throw InputError("semantic entropy needs at least one cluster");
  double acc = 0.0;
  for (double m : masses) {
    if (!(m > 0.0)) throw NumericError("semantic entropy: cluster mass must be positive, got " + std::to_string(m));
    acc += std::log(m);
  }
  return -acc / static_cast<double>(masses.size());
}

/// SE_max = log G. Undefined below two samples.
inline double max_entropy(std::size_t group_size) {
  if (group_size < 2) throw ConfigError("G must be >= 2 for SE_max = log G to be positive");
  return std::log(static_cast<double>(group_size));
}

/// Reference weighted form -sum_c P(c) log P(c). Not used for training.
inline double weighted_semantic_entropy(std::span<const double> masses) {
  double acc = 0.0;
  for (double m : masses)
    if (m > 0.0) acc -= m * std::log(m);
  return acc;
}

struct EntropyReport {
  std::int64_t prompt_id = 0;
  std::size_t group_size = 0;
  double se = 0.0;
  double se_max = 0.0;
  std::size_t k = 0;
  std::vector<double> masses;
  double u = 0.0;  // se / se_max
  MassMode mode = MassMode::count;
};

inline EntropyReport entropy_report(const ClusterSet& clusters, std::span<const Rollout> rollouts, MassMode mode) {
  EntropyReport rep;
  rep.group_size = rollouts.size();
  rep.k = clusters.k();
  rep.masses = cluster_mass(clusters, rollouts, mode);
  rep.se = semantic_entropy(rep.masses);
  rep.se_max = max_entropy(rollouts.size());
  rep.u = rep.se / rep.se_max;
  rep.mode = mode;
  return rep;
}

inline EntropyReport entropy_report(std::span<const Rollout> rollouts, MassMode mode) {
  return entropy_report(cluster_by_answer(rollouts), rollouts, mode);
}

inline nlohmann::json to_json(const EntropyReport& r) {
  return {{"prompt_id", r.prompt_id}, {"G", r.group_size}, {"K", r.k},          {"se", r.se},
          {"se_max", r.se_max},       {"u", r.u},          {"masses", r.masses}, {"mode", to_string(r.mode)}};
}

}  // namespace seedgrpo
