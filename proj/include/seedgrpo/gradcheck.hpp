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
#include <cstdint>
#include <numbers>
#include <set>
#include <vector>

#include <json.hpp>

#include "seedgrpo/advantage.hpp"
#include "seedgrpo/entropy.hpp"
#include "seedgrpo/policy.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/trainer.hpp"

namespace seedgrpo {

// Finite-difference check of objective_grad against batch_objective.
//
// Each trial draws a small random policy pair (pi_old, pi_theta), a batch of
// sampled groups with random 0/1 rewards, random modulation, and a clip
// width, then compares the analytic gradient with central differences over
// every logit of every visited state. Trials whose ratios sit within
// kKinkMargin of a clip boundary are redrawn: the objective is not
// differentiable there.

inline constexpr double kKinkMargin = 1e-3;

struct GradCheckTrial {
  std::uint64_t key = 0;
  double eps = 0.2;
  RatioGranularity granularity = RatioGranularity::token;
  double perturbation = 0.0;
  PolicyParams old_params{2, 0};
  PolicyParams params{2, 0};
  std::vector<RolloutGroup> groups;
};

struct GradCheckResult {
  double rel_error = 0.0;
  double grad_norm = 0.0;
  double fd_norm = 0.0;
  std::size_t coordinates = 0;
  std::size_t terms = 0;
  std::size_t clipped_terms = 0;
};

namespace detail {

inline double normal(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// True when some nonzero-advantage term has a ratio near 1 +/- eps.
inline bool near_kink(const GradCheckTrial& t) {
  for (const auto& g : t.groups) {
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      if (g.advantages.modulated[i] == 0.0) continue;
      const TokenScores now = score_tokens(t.params, g.prompt, g.rollouts[i].tokens);
      const TokenScores old = score_tokens(t.old_params, g.prompt, g.rollouts[i].tokens);
      std::vector<double> ratios;
      if (t.granularity == RatioGranularity::sequence) {
        double d = 0.0;
        for (std::size_t k = 0; k < now.logp.size(); ++k) d += now.logp[k] - old.logp[k];
        ratios.push_back(std::exp(d));
      } else {
        for (std::size_t k = 0; k < now.logp.size(); ++k) ratios.push_back(std::exp(now.logp[k] - old.logp[k]));
      }
      for (double r : ratios)
        if (std::abs(r - (1.0 - t.eps)) < kKinkMargin || std::abs(r - (1.0 + t.eps)) < kKinkMargin) return true;
    }
  }
  return false;
}

inline GradCheckTrial draw_trial(std::uint64_t key, RatioGranularity granularity) {
  CounterRng rng(key);
  static constexpr int kModuli[] = {2, 3, 5, 10};
  static constexpr double kPerturb[] = {0.0, 0.1, 0.5, 1.5};
  static constexpr WeightKind kKinds[] = {WeightKind::linear, WeightKind::exponential, WeightKind::focal};

  GradCheckTrial t;
  t.key = key;
  t.granularity = granularity;
  const int modulus = kModuli[rng.below(4)];
  const int k = static_cast<int>(rng.below(3));
  t.eps = 0.1 + 0.2 * rng.uniform();
  t.perturbation = kPerturb[rng.below(4)];
  t.old_params = PolicyParams(modulus, k);
  for (double& x : t.old_params.logits()) x = normal(rng);
  t.params = t.old_params;
  for (double& x : t.params.logits()) x += t.perturbation * normal(rng);

  ModulationConfig mod;
  mod.alpha = rng.uniform();
  mod.kind = kKinds[rng.below(3)];
  mod.gamma = 0.5 + 2.5 * rng.uniform();

  const std::size_t batch = 1 + rng.below(3);
  const std::size_t group_size = 2 + rng.below(5);
  const std::size_t max_len = 1 + rng.below(5);
  for (std::size_t j = 0; j < batch; ++j) {
    RolloutGroup g;
    g.prompt = make_prompt(static_cast<std::int64_t>(j), static_cast<std::int64_t>(rng.below(2 * modulus)),
                           static_cast<std::int64_t>(rng.below(2 * modulus)), modulus);
    for (std::size_t i = 0; i < group_size; ++i) {
      CounterRng rr(derive_key({key, j, i}));
      g.rollouts.push_back(sample_rollout(t.old_params, g.prompt, rr, max_len));
      g.rewards.push_back(static_cast<double>(rng.below(2)));
    }
    g.clusters = cluster_by_answer(g.rollouts);
    g.entropy = entropy_report(g.clusters, g.rollouts, MassMode::count);
    g.advantages = modulate(group_advantages(g.rewards), g.entropy.se, g.entropy.se_max, mod);
    t.groups.push_back(std::move(g));
  }
  return t;
}

}  // namespace detail

/// Deterministic trial for `key`; redraws (with a derived key) until no
/// ratio sits on a clip boundary.
inline GradCheckTrial make_grad_check_trial(std::uint64_t key, RatioGranularity granularity) {
  GradCheckTrial t = detail::draw_trial(key, granularity);
  while (detail::near_kink(t)) {
    key = mix64(key);
    t = detail::draw_trial(key, granularity);
  }
  return t;
}

inline GradCheckResult check_grad_trial(const GradCheckTrial& t, double h = 1e-5) {
  GradCheckResult res;
  const ObjectiveGrad og = objective_grad(t.params, t.old_params, t.groups, t.eps, t.granularity);
  res.terms = og.terms;
  for (const auto& g : t.groups)
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      if (g.advantages.modulated[i] == 0.0) continue;
      SurrogateStats st = surrogate_eval(t.params, t.old_params, g.prompt, g.rollouts[i], g.advantages.modulated[i],
                                         t.eps, t.granularity);
      res.clipped_terms += st.clipped;
    }

  std::set<std::size_t> states;
  for (const auto& g : t.groups)
    for (const auto& r : g.rollouts)
      for (std::size_t s : score_tokens(t.params, g.prompt, r.tokens).states) states.insert(s);

  PolicyParams probe = t.params;
  double diff2 = 0.0, g2 = 0.0, fd2 = 0.0;
  for (std::size_t s : states) {
    for (int v = 0; v < kVocabSize; ++v) {
      double& x = probe.row(s)[v];
      const double saved = x;
      x = saved + h;
      const double up = batch_objective(probe, t.old_params, t.groups, t.eps, t.granularity);
      x = saved - h;
      const double down = batch_objective(probe, t.old_params, t.groups, t.eps, t.granularity);
      x = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = og.grad.at(s, v);
      diff2 += (an - fd) * (an - fd);
      g2 += an * an;
      fd2 += fd * fd;
      ++res.coordinates;
    }
  }
  res.grad_norm = std::sqrt(g2);
  res.fd_norm = std::sqrt(fd2);
  const double scale = std::max(res.grad_norm, res.fd_norm);
  // Both gradients vanish when every nonzero term is clipped.
  res.rel_error = scale > 1e-10 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
  return res;
}

inline nlohmann::json describe_trial(const GradCheckTrial& t, const GradCheckResult& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : t.groups) {
    nlohmann::json rollouts = nlohmann::json::array();
    for (std::size_t i = 0; i < g.rollouts.size(); ++i)
      rollouts.push_back({{"tokens", g.rollouts[i].tokens},
                          {"reward", g.rewards[i]},
                          {"advantage", g.advantages.modulated[i]}});
    groups.push_back({{"prompt", prompt_to_json(g.prompt)}, {"factor", g.advantages.factor}, {"rollouts", rollouts}});
  }
  return {{"replay_key", t.key},
          {"granularity", to_string(t.granularity)},
          {"eps", t.eps},
          {"perturbation", t.perturbation},
          {"modulus", t.params.modulus()},
          {"context_order", t.params.context_order()},
          {"rel_error", r.rel_error},
          {"grad_norm", r.grad_norm},
          {"fd_norm", r.fd_norm},
          {"coordinates", r.coordinates},
          {"terms", r.terms},
          {"clipped_terms", r.clipped_terms},
          {"groups", groups}};
}

struct GradCheckReport {
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  nlohmann::json worst;
  std::size_t token_trials = 0;
  std::size_t sequence_trials = 0;
  std::size_t clipped_trials = 0;  // trials with at least one clipped nonzero term
};

inline std::uint64_t grad_check_key(std::uint64_t seed, std::size_t trial) {
  return derive_key({seed, 0x67726164ULL, trial});
}

/// Alternates granularity by trial index so both are always covered.
inline GradCheckReport run_grad_check(std::uint64_t seed, std::size_t trials, double h = 1e-5) {
  GradCheckReport rep;
  rep.trials = trials;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto gran = i % 2 == 0 ? RatioGranularity::token : RatioGranularity::sequence;
    const GradCheckTrial t = make_grad_check_trial(grad_check_key(seed, i), gran);
    const GradCheckResult r = check_grad_trial(t, h);
    (gran == RatioGranularity::token ? rep.token_trials : rep.sequence_trials) += 1;
    if (r.clipped_terms > 0) ++rep.clipped_trials;
    if (i == 0 || r.rel_error > rep.max_rel_error) {
      rep.max_rel_error = r.rel_error;
      rep.worst = describe_trial(t, r);
    }
  }
  return rep;
}

}  // namespace seedgrpo
