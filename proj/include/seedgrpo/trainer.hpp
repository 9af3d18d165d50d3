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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seedgrpo/advantage.hpp"
#include "seedgrpo/entropy.hpp"
#include "seedgrpo/error.hpp"
#include "seedgrpo/parallel.hpp"
#include "seedgrpo/policy.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/task.hpp"

namespace seedgrpo {

enum class RatioGranularity { token, sequence };
enum class Algorithm { seed_grpo, grpo };

inline std::string_view to_string(RatioGranularity g) { return g == RatioGranularity::token ? "token" : "sequence"; }
inline std::string_view to_string(Algorithm a) { return a == Algorithm::seed_grpo ? "seed-grpo" : "grpo"; }

inline RatioGranularity parse_granularity(std::string_view s) {
  if (s == "token") return RatioGranularity::token;
  if (s == "sequence") return RatioGranularity::sequence;
  throw ConfigError("trainer.ratio_granularity must be 'token' or 'sequence', got '" + std::string(s) + "'");
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "seed-grpo") return Algorithm::seed_grpo;
  if (s == "grpo") return Algorithm::grpo;
  throw ConfigError("trainer.algorithm must be 'seed-grpo' or 'grpo', got '" + std::string(s) + "'");
}

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t group_size = 8;
  double lr = 32.0;
  double clip_eps = 0.2;
  std::size_t steps = 2000;
  std::size_t inner_epochs = 1;
  RatioGranularity granularity = RatioGranularity::token;
  ModulationConfig modulation;
  MassMode entropy_mode = MassMode::count;
  std::size_t max_len = 4;
  std::uint64_t seed = 0;
  // grpo = Dr.GRPO baseline: entropy is still measured, never applied.
  Algorithm algorithm = Algorithm::seed_grpo;
  unsigned threads = 1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("trainer.B must be >= 1");
    if (group_size < 2) throw ConfigError("trainer.G must be >= 2 (SE_max = log G is undefined below 2)");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("trainer.lr must be finite and > 0");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("trainer.clip_eps must be in (0, 1)");
    if (inner_epochs < 1) throw ConfigError("trainer.inner_epochs must be >= 1");
    if (max_len < 1) throw ConfigError("trainer.max_len must be >= 1");
    if (threads < 1) throw ConfigError("trainer.threads must be >= 1");
    modulation.validate();
  }
};

/// G rollouts for one prompt together with everything derived from them.
struct RolloutGroup {
  Prompt prompt;
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;
  ClusterSet clusters;
  EntropyReport entropy;
  GroupAdvantages advantages;
};

/// Rollout stream key: (seed, step, batch slot, prompt id, rollout index).
inline std::uint64_t rollout_key(std::uint64_t seed, std::uint64_t step, std::uint64_t slot, std::int64_t prompt_id,
                                 std::uint64_t index) {
  return derive_key({seed, 0x726f6c6cULL, step, slot, static_cast<std::uint64_t>(prompt_id), index});
}

/// Fills rewards, clusters, entropy and advantages of a group whose
/// rollouts are already present.
inline void score_group(RolloutGroup& group, const TrainConfig& config) {
  group.rewards.clear();
  for (const auto& r : group.rollouts) group.rewards.push_back(static_cast<double>(verify(group.prompt, r.answer)));
  group.clusters = cluster_by_answer(group.rollouts);
  group.entropy = entropy_report(group.clusters, group.rollouts, config.entropy_mode);
  group.entropy.prompt_id = group.prompt.prompt_id;
  const std::vector<double> raw = group_advantages(group.rewards);
  group.advantages = config.algorithm == Algorithm::grpo
                         ? unmodulated(raw)
                         : modulate(raw, group.entropy.se, group.entropy.se_max, config.modulation);
}

inline RolloutGroup sample_group(const PolicyParams& old_params, const Prompt& prompt, const TrainConfig& config,
                                 std::uint64_t step, std::uint64_t slot) {
  RolloutGroup group;
  group.prompt = prompt;
  group.rollouts.reserve(config.group_size);
  for (std::size_t i = 0; i < config.group_size; ++i) {
    CounterRng rng(rollout_key(config.seed, step, slot, prompt.prompt_id, i));
    group.rollouts.push_back(sample_rollout(old_params, prompt, rng, config.max_len));
  }
  score_group(group, config);
  return group;
}

struct SurrogateStats {
  double value = 0.0;
  std::size_t terms = 0;
  std::size_t clipped = 0;
};

namespace detail {

struct ClipChoice {
  double value;
  bool clipped;
};

// min(r*A, clip(r, 1-eps, 1+eps)*A). Ties take the unclipped branch.
inline ClipChoice clipped_min(double ratio, double adv, double eps) {
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
  if (clipped < unclipped) return {clipped, true};
  return {unclipped, false};
}

}  // namespace detail

/// Clipped surrogate L_i for one rollout, optionally accumulating
/// grad_scale * dL_i/dtheta into `grad`.
///
/// sequence: one ratio pi(o|q)/pi_old(o|q) for the whole response.
/// token:    one ratio per token, the advantage broadcast to every token,
///           summed without dividing by the response length.
/// The clipped branch is constant in theta and contributes no gradient.
inline SurrogateStats surrogate_eval(const PolicyParams& params, const PolicyParams& old_params, const Prompt& prompt,
                                     const Rollout& rollout, double adv, double eps, RatioGranularity granularity,
                                     SparseGrad* grad = nullptr, double grad_scale = 1.0,
                                     std::size_t rollout_index = 0) {
  const TokenScores now = score_tokens(params, prompt, rollout.tokens);
  const TokenScores old = score_tokens(old_params, prompt, rollout.tokens);
  auto check_old = [&](double lp) {
    if (!std::isfinite(lp))
      throw NumericError("non-finite old log-probability for prompt " + std::to_string(prompt.prompt_id) +
                         ", rollout " + std::to_string(rollout_index));
  };
  SurrogateStats st;
  if (granularity == RatioGranularity::sequence) {
    double lp_now = 0.0, lp_old = 0.0;
    for (double x : now.logp) lp_now += x;
    for (double x : old.logp) lp_old += x;
    check_old(lp_old);
    const double ratio = std::exp(lp_now - lp_old);
    const auto choice = detail::clipped_min(ratio, adv, eps);
    st.value = choice.value;
    st.terms = 1;
    st.clipped = choice.clipped ? 1 : 0;
    if (grad && !choice.clipped && adv != 0.0) {
      const double w = grad_scale * adv * ratio;
      for (std::size_t t = 0; t < rollout.tokens.size(); ++t)
        grad->accumulate_logprob(params, now.states[t], rollout.tokens[t], w);
    }
    return st;
  }
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    check_old(old.logp[t]);
    const double ratio = std::exp(now.logp[t] - old.logp[t]);
    const auto choice = detail::clipped_min(ratio, adv, eps);
    st.value += choice.value;
    st.terms += 1;
    st.clipped += choice.clipped ? 1 : 0;
    if (grad && !choice.clipped && adv != 0.0)
      grad->accumulate_logprob(params, now.states[t], rollout.tokens[t], grad_scale * adv * ratio);
  }
  return st;
}

inline double surrogate_term(const PolicyParams& params, const PolicyParams& old_params, const Prompt& prompt,
                             const Rollout& rollout, double adv, double eps, RatioGranularity granularity) {
  return surrogate_eval(params, old_params, prompt, rollout, adv, eps, granularity).value;
}

/// (1/G) sum_i L_i, using the group's modulated advantages.
inline double group_objective(const PolicyParams& params, const PolicyParams& old_params, const RolloutGroup& group,
                              double eps, RatioGranularity granularity) {
  double acc = 0.0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i)
    acc += surrogate_term(params, old_params, group.prompt, group.rollouts[i], group.advantages.modulated[i], eps,
                          granularity);
  return acc / static_cast<double>(group.rollouts.size());
}

/// Mean over prompts of the group objectives.
inline double batch_objective(const PolicyParams& params, const PolicyParams& old_params,
                              std::span<const RolloutGroup> groups, double eps, RatioGranularity granularity) {
  double acc = 0.0;
  for (const auto& g : groups) acc += group_objective(params, old_params, g, eps, granularity);
  return acc / static_cast<double>(groups.size());
}

struct ObjectiveGrad {
  SparseGrad grad;
  double objective = 0.0;
  std::size_t terms = 0;
  std::size_t clipped = 0;
};

/// Gradient of batch_objective. Per-group work may run in parallel; the
/// reduction is in group order so the result is independent of `threads`.
inline ObjectiveGrad objective_grad(const PolicyParams& params, const PolicyParams& old_params,
                                    std::span<const RolloutGroup> groups, double eps, RatioGranularity granularity,
                                    unsigned threads = 1) {
  if (groups.empty()) throw InputError("objective_grad: empty batch");
  struct Partial {
    SparseGrad grad;
    double objective = 0.0;
    std::size_t terms = 0;
    std::size_t clipped = 0;
  };
  std::vector<Partial> parts(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t gi) {
    const RolloutGroup& g = groups[gi];
    const double inv_g = 1.0 / static_cast<double>(g.rollouts.size());
    Partial& p = parts[gi];
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const auto st = surrogate_eval(params, old_params, g.prompt, g.rollouts[i], g.advantages.modulated[i], eps,
                                     granularity, &p.grad, inv_g, i);
      p.objective += st.value;
      p.terms += st.terms;
      p.clipped += st.clipped;
    }
    p.objective *= inv_g;
  });
  ObjectiveGrad out;
  const double inv_b = 1.0 / static_cast<double>(groups.size());
  for (const auto& p : parts) {
    out.grad.add(p.grad, inv_b);
    out.objective += p.objective;
    out.terms += p.terms;
    out.clipped += p.clipped;
  }
  out.objective *= inv_b;
  return out;
}

struct StepMetrics {
  std::size_t step = 0;
  std::size_t group_size = 0;
  double mean_reward = 0.0;
  double mean_se = 0.0;
  double mean_u = 0.0;
  double mean_factor = 0.0;
  std::vector<std::size_t> k_histogram;  // index K = 1..G; slot 0 unused
  double objective = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double wall_time_s = 0.0;

  /// Field-wise equality excluding wall time.
  bool same_values(const StepMetrics& o) const {
    return step == o.step && group_size == o.group_size && mean_reward == o.mean_reward && mean_se == o.mean_se &&
           mean_u == o.mean_u && mean_factor == o.mean_factor && k_histogram == o.k_histogram &&
           objective == o.objective && grad_norm == o.grad_norm && clip_fraction == o.clip_fraction;
  }
};

inline nlohmann::json to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"G", m.group_size},
          {"mean_reward", m.mean_reward},
          {"mean_se", m.mean_se},
          {"mean_u", m.mean_u},
          {"mean_factor", m.mean_factor},
          {"k_histogram", m.k_histogram},
          {"objective", m.objective},
          {"grad_norm", m.grad_norm},
          {"clip_fraction", m.clip_fraction},
          {"wall_time_s", m.wall_time_s}};
}

struct TrainerState {
  PolicyParams params;
  std::size_t step = 0;
};

namespace detail {

inline std::string describe_group(const RolloutGroup& g) {
  std::ostringstream os;
  os << "prompt " << g.prompt.prompt_id << " (a=" << g.prompt.a << ", b=" << g.prompt.b << ", truth "
     << g.prompt.truth_answer << "), factor " << g.advantages.factor << ", rollouts:";
  for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
    os << "\n  [" << i << "] adv=" << g.advantages.modulated[i] << " logp=" << g.rollouts[i].total_logp << " tokens=";
    for (Token t : g.rollouts[i].tokens) os << token_name(t);
  }
  return os.str();
}

}  // namespace detail

/// One outer step: freeze pi_old, sample and score G rollouts per prompt,
/// then take `inner_epochs` plain gradient-ascent steps on the surrogate.
inline StepMetrics train_step(TrainerState& state, const TrainConfig& config, std::span<const Prompt> batch,
                              std::vector<RolloutGroup>* groups_out = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  if (batch.empty()) throw InputError("train_step: empty prompt batch");
  const PolicySnapshot old = snapshot(state.params);

  std::vector<RolloutGroup> groups(batch.size());
  parallel_for(batch.size(), config.threads, [&](std::size_t j) {
    groups[j] = sample_group(*old, batch[j], config, state.step, j);
  });

  StepMetrics m;
  m.step = state.step;
  m.group_size = config.group_size;
  m.k_histogram.assign(config.group_size + 1, 0);
  for (const auto& g : groups) {
    double r = 0.0;
    for (double x : g.rewards) r += x;
    m.mean_reward += r / static_cast<double>(g.rewards.size());
    m.mean_se += g.entropy.se;
    m.mean_u += g.entropy.u;
    m.mean_factor += g.advantages.factor;
    m.k_histogram[g.entropy.k] += 1;
  }
  const double inv_b = 1.0 / static_cast<double>(groups.size());
  m.mean_reward *= inv_b;
  m.mean_se *= inv_b;
  m.mean_u *= inv_b;
  m.mean_factor *= inv_b;

  std::size_t terms = 0, clipped = 0;
  for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
    ObjectiveGrad og = objective_grad(state.params, *old, groups, config.clip_eps, config.granularity, config.threads);
    if (epoch == 0) {
      m.objective = og.objective;
      m.grad_norm = og.grad.norm();
    }
    terms += og.terms;
    clipped += og.clipped;
    apply_update(state.params, og.grad, config.lr);
    for (const auto& [s, row] : og.grad.rows()) {
      const auto r = state.params.row(s);
      if (std::all_of(r.begin(), r.end(), [](double x) { return std::isfinite(x); })) continue;
      std::string dump;
      for (const auto& g : groups) {
        for (const auto& ro : g.rollouts) {
          const TokenScores rs = score_tokens(*old, g.prompt, ro.tokens);
          if (std::find(rs.states.begin(), rs.states.end(), s) != rs.states.end()) {
            dump = detail::describe_group(g);
            break;
          }
        }
        if (!dump.empty()) break;
      }
      throw NumericError("non-finite logits in state " + std::to_string(s) + " after step " +
                         std::to_string(state.step) + ", epoch " + std::to_string(epoch) + "; offending group: " + dump);
    }
  }
  m.clip_fraction = terms ? static_cast<double>(clipped) / static_cast<double>(terms) : 0.0;
  if (groups_out) *groups_out = std::move(groups);
  ++state.step;
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

/// Deterministic batching: each pass over the dataset uses a fresh
/// permutation keyed by (seed, epoch); batches are consecutive slices of the
/// concatenated permutations.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
      : n_(dataset_size), b_(batch_size), seed_(seed) {
    if (n_ == 0) throw InputError("training dataset is empty");
  }

  std::vector<std::size_t> indices(std::size_t step) {
    std::vector<std::size_t> out;
    out.reserve(b_);
    for (std::size_t j = 0; j < b_; ++j) {
      const std::size_t pos = step * b_ + j;
      const std::size_t epoch = pos / n_;
      if (epoch != cached_epoch_ || order_.empty()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        CounterRng rng(derive_key({seed_, 0x62617463ULL, epoch}));
        for (std::size_t i = n_ - 1; i > 0; --i) std::swap(order_[i], order_[rng.below(i + 1)]);
        cached_epoch_ = epoch;
      }
      out.push_back(order_[pos % n_]);
    }
    return out;
  }

 private:
  std::size_t n_, b_;
  std::uint64_t seed_;
  std::size_t cached_epoch_ = 0;
  std::vector<std::size_t> order_;
};

struct TrainResult {
  PolicyParams params;
  std::vector<StepMetrics> metrics;
};

/// Called after every step with the metrics and the updated parameters.
using StepCallback = std::function<void(const StepMetrics&, const PolicyParams&)>;

inline TrainResult train(const TrainConfig& config, PolicyParams initial, std::span<const Prompt> dataset,
                         const StepCallback& on_step = {}) {
  config.validate();
  TrainerState state{std::move(initial), 0};
  TrainResult result{state.params, {}};
  if (config.steps == 0) return result;
  BatchSchedule schedule(dataset.size(), config.batch_size, config.seed);
  result.metrics.reserve(config.steps);
  std::vector<Prompt> batch;
  for (std::size_t s = 0; s < config.steps; ++s) {
    batch.clear();
    for (std::size_t i : schedule.indices(s)) batch.push_back(dataset[i]);
    result.metrics.push_back(train_step(state, config, batch));
    if (on_step) on_step(result.metrics.back(), state.params);
  }
  result.params = std::move(state.params);
  return result;
}

/// Starts from the uniform policy (all logits zero).
inline TrainResult train(const TrainConfig& config, int context_order, std::span<const Prompt> dataset,
                         const StepCallback& on_step = {}) {
  if (dataset.empty()) throw InputError("training dataset is empty");
  return train(config, PolicyParams(dataset.front().modulus, context_order), dataset, on_step);
}

}  // namespace seedgrpo
