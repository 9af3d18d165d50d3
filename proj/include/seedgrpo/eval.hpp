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
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "seedgrpo/advantage.hpp"
#include "seedgrpo/entropy.hpp"
#include "seedgrpo/parallel.hpp"
#include "seedgrpo/policy.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/task.hpp"
#include "seedgrpo/trainer.hpp"

namespace seedgrpo {

inline std::uint64_t eval_key(std::uint64_t seed, std::uint64_t slot, std::int64_t prompt_id, std::uint64_t index) {
  return derive_key({seed, 0x6576616cULL, slot, static_cast<std::uint64_t>(prompt_id), index});
}

/// Fraction of prompts whose greedy decode verifies.
inline double pass_at_1(const PolicyParams& params, std::span<const Prompt> prompts, std::size_t max_len) {
  if (prompts.empty()) throw InputError("pass_at_1: empty prompt list");
  std::size_t ok = 0;
  for (const auto& p : prompts) ok += static_cast<std::size_t>(verify(p, canonicalize_answer(greedy_decode(params, p, max_len))));
  return static_cast<double>(ok) / static_cast<double>(prompts.size());
}

/// Mean over prompts of (correct samples / k).
inline double avg_at_k(const PolicyParams& params, std::span<const Prompt> prompts, std::size_t k, std::uint64_t seed,
                       std::size_t max_len) {
  if (k < 1) throw ConfigError("avg@k requires k >= 1");
  if (prompts.empty()) throw InputError("avg_at_k: empty prompt list");
  double acc = 0.0;
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < k; ++i) {
      CounterRng rng(eval_key(seed, j, prompts[j].prompt_id, i));
      ok += static_cast<std::size_t>(verify(prompts[j], sample_rollout(params, prompts[j], rng, max_len).answer));
    }
    acc += static_cast<double>(ok) / static_cast<double>(k);
  }
  return acc / static_cast<double>(prompts.size());
}

inline std::vector<Rollout> sample_eval_group(const PolicyParams& params, const Prompt& prompt, std::size_t slot,
                                              std::size_t group_size, std::uint64_t seed, std::size_t max_len) {
  std::vector<Rollout> out;
  out.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    // Offset the index so profile draws never coincide with avg@k draws.
    CounterRng rng(eval_key(seed, slot, prompt.prompt_id, 0x100000000ULL + i));
    out.push_back(sample_rollout(params, prompt, rng, max_len));
  }
  return out;
}

/// Per-prompt semantic entropy of G fresh samples.
inline std::vector<EntropyReport> entropy_profile(const PolicyParams& params, std::span<const Prompt> prompts,
                                                  std::size_t group_size, MassMode mode, std::uint64_t seed,
                                                  std::size_t max_len) {
  max_entropy(group_size);  // validates G >= 2
  std::vector<EntropyReport> out;
  out.reserve(prompts.size());
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    const auto rollouts = sample_eval_group(params, prompts[j], j, group_size, seed, max_len);
    EntropyReport rep = entropy_report(rollouts, mode);
    rep.prompt_id = prompts[j].prompt_id;
    out.push_back(std::move(rep));
  }
  return out;
}

struct EvalOptions {
  std::size_t max_len = 4;
  std::size_t group_size = 8;
  MassMode mode = MassMode::count;
  std::size_t avg_k = 0;  // 0 skips avg@k
  std::uint64_t seed = 0;
};

struct EvalRecord {
  std::int64_t prompt_id = 0;
  bool correct = false;
  double se = 0.0;
  std::size_t k = 0;
};

struct EvalReport {
  double pass_at_1 = 0.0;
  std::optional<double> avg_at_k;
  std::size_t k = 0;
  std::vector<EvalRecord> records;
};

inline EvalReport evaluate(const PolicyParams& params, std::span<const Prompt> prompts, const EvalOptions& opt) {
  EvalReport rep;
  rep.pass_at_1 = pass_at_1(params, prompts, opt.max_len);
  if (opt.avg_k > 0) {
    rep.avg_at_k = avg_at_k(params, prompts, opt.avg_k, opt.seed, opt.max_len);
    rep.k = opt.avg_k;
  }
  const auto profile = entropy_profile(params, prompts, opt.group_size, opt.mode, opt.seed, opt.max_len);
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    const bool ok = verify(prompts[j], canonicalize_answer(greedy_decode(params, prompts[j], opt.max_len))) == 1;
    rep.records.push_back({prompts[j].prompt_id, ok, profile[j].se, profile[j].k});
  }
  return rep;
}

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"prompt_id", r.prompt_id}, {"correct", r.correct}, {"se", r.se}, {"K", r.k}};
}

struct SweepGrid {
  std::vector<double> alphas{0.0, 0.01, 0.02};
  std::vector<WeightKind> kinds{WeightKind::linear, WeightKind::exponential, WeightKind::focal};
  std::vector<std::size_t> group_sizes{8, 16};
  std::vector<std::uint64_t> seeds{0};

  void validate() const {
    if (alphas.empty()) throw ConfigError("sweep.alphas is empty");
    if (kinds.empty()) throw ConfigError("sweep.f_kinds is empty");
    if (group_sizes.empty()) throw ConfigError("sweep.G_values is empty");
    if (seeds.empty()) throw ConfigError("sweep.seeds is empty");
  }

  std::size_t size() const { return alphas.size() * kinds.size() * group_sizes.size() * seeds.size(); }

  /// Cell configs in row-major order (alpha, f, G, seed).
  std::vector<TrainConfig> cells(const TrainConfig& base) const {
    validate();
    std::vector<TrainConfig> out;
    out.reserve(size());
    for (double a : alphas)
      for (WeightKind f : kinds)
        for (std::size_t g : group_sizes)
          for (std::uint64_t s : seeds) {
            TrainConfig c = base;
            c.modulation.alpha = a;
            c.modulation.kind = f;
            c.group_size = g;
            c.seed = s;
            out.push_back(c);
          }
    return out;
  }
};

struct SweepRow {
  TrainConfig config;
  double pass_at_1 = 0.0;
  double mean_se = 0.0;
  double mean_factor = 0.0;
  std::string status = "ok";
};

struct RunSummary {
  double pass_at_1 = 0.0;
  double mean_se = 0.0;
  double mean_factor = 0.0;
};

inline RunSummary summarize(const TrainResult& result, std::span<const Prompt> eval_set, std::size_t max_len) {
  RunSummary s;
  s.pass_at_1 = pass_at_1(result.params, eval_set, max_len);
  if (!result.metrics.empty()) {
    for (const auto& m : result.metrics) {
      s.mean_se += m.mean_se;
      s.mean_factor += m.mean_factor;
    }
    s.mean_se /= static_cast<double>(result.metrics.size());
    s.mean_factor /= static_cast<double>(result.metrics.size());
  }
  return s;
}

/// Trains and evaluates every grid cell. Cells may run concurrently; each
/// row depends only on its own config. A failing cell is recorded in its
/// status column and the sweep carries on.
inline std::vector<SweepRow> ablation_sweep(const TrainConfig& base, int context_order, const SweepGrid& grid,
                                            std::span<const Prompt> train_set, std::span<const Prompt> eval_set,
                                            unsigned threads = 1) {
  const auto cells = grid.cells(base);
  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.config = cells[i];
    row.config.threads = 1;
    try {
      const auto result = train(row.config, context_order, train_set);
      const auto s = summarize(result, eval_set, row.config.max_len);
      row.pass_at_1 = s.pass_at_1;
      row.mean_se = s.mean_se;
      row.mean_factor = s.mean_factor;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      row.pass_at_1 = row.mean_se = row.mean_factor = std::nan("");
    }
  });
  return rows;
}

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  return nlohmann::json(x).dump();
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline constexpr const char* kSweepCsvHeader =
    "alpha,f_kind,gamma,G,seed,steps,pass_at_1,mean_se,mean_factor,status,config_hash";

/// Writes the header and one row per cell. `hash_of` maps a cell config to
/// its config hash.
inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows,
                            const std::function<std::string(const TrainConfig&)>& hash_of) {
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& c = r.config;
    os << format_double(c.modulation.alpha) << ',' << to_string(c.modulation.kind) << ','
       << format_double(c.modulation.gamma) << ',' << c.group_size << ',' << c.seed << ',' << c.steps << ','
       << format_double(r.pass_at_1) << ',' << format_double(r.mean_se) << ',' << format_double(r.mean_factor) << ','
       << csv_escape(r.status) << ',' << hash_of(c) << '\n';
  }
}

}  // namespace seedgrpo
