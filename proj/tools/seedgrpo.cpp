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

// seedgrpo: command-line driver.
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "seedgrpo.hpp"

namespace fs = std::filesystem;
using namespace seedgrpo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, CommonOptions& opt, bool required) {
  auto* c = cmd->add_option("--config,-c", opt.config_path, "Run configuration file (TOML-style sections)");
  if (required) c->required();
  cmd->add_option("--set", opt.overrides, "Override a config key: section.key=value (repeatable)");
}

RunConfig resolve_config(const CommonOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) {
    if (!fs::exists(opt.config_path)) throw ConfigError("config file not found: " + opt.config_path);
    cfg = load_run_config(opt.config_path);
  }
  for (const auto& o : opt.overrides) apply_override(cfg, o);
  return cfg;
}

LoadedCheckpoint load_for_eval(const std::string& path, const CommonOptions& opt, RunConfig& cfg) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (opt.config_path.empty()) {
    bool modulus_overridden = false;
    for (const auto& o : opt.overrides) modulus_overridden |= o.rfind("task.modulus", 0) == 0;
    if (!modulus_overridden) cfg.modulus = ck.params.modulus();
  }
  if (cfg.modulus != ck.params.modulus())
    throw ConfigError("task.modulus = " + std::to_string(cfg.modulus) + " but checkpoint '" + path +
                      "' was built for modulus " + std::to_string(ck.params.modulus()));
  cfg.validate();
  return ck;
}

int cmd_train(const CommonOptions& opt, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opt);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  cfg.validate();
  const Provenance prov{config_hash(cfg)};
  const auto train_set = generate_dataset(cfg.train_spec());
  const auto eval_set = generate_dataset(cfg.eval_spec());

  RunWriter writer(cfg.output_dir, prov, cfg.checkpoint_every);
  {
    auto os = open_output(fs::path(cfg.output_dir) / "config.toml");
    os << "# config_hash = " << prov.config_hash << "\n# version = " << prov.version << "\n"
       << canonical_config(cfg, false);
  }
  const auto result = train(cfg.trainer, cfg.context_order, train_set, writer.callback());
  const double p1 = pass_at_1(result.params, eval_set, cfg.trainer.max_len);
  writer.finish(result.params, p1);
  const auto s = summarize(result, eval_set, cfg.trainer.max_len);
  std::printf("config_hash %s\nsteps %zu\npass@1 %.4f\nmean_se %.6f\noutput %s\n", prov.config_hash.c_str(),
              result.metrics.size(), p1, s.mean_se, cfg.output_dir.c_str());
  return kExitOk;
}

int cmd_eval(const CommonOptions& opt, const std::string& checkpoint, const std::string& out) {
  RunConfig cfg = resolve_config(opt);
  const auto ck = load_for_eval(checkpoint, opt, cfg);
  const Provenance prov{config_hash(cfg)};
  const auto eval_set = generate_dataset(cfg.eval_spec());
  const EvalReport rep = evaluate(ck.params, eval_set, cfg.eval_options());

  const std::string path = out.empty() ? checkpoint + ".eval.jsonl" : out;
  auto os = open_output(path);
  nlohmann::json head = {{"type", "eval"},       {"checkpoint", checkpoint}, {"pass_at_1", rep.pass_at_1},
                         {"n", rep.records.size()}, {"G", cfg.eval_group_size}};
  if (rep.avg_at_k) {
    head["avg_at_k"] = *rep.avg_at_k;
    head["k"] = rep.k;
  }
  os << stamped(prov, head).dump() << '\n';
  for (const auto& r : rep.records) os << to_json(r).dump() << '\n';
  std::printf("pass@1 %.4f\n", rep.pass_at_1);
  if (rep.avg_at_k) std::printf("avg@%zu %.4f\n", rep.k, *rep.avg_at_k);
  std::printf("report %s\n", path.c_str());
  return kExitOk;
}

int cmd_entropy_report(const CommonOptions& opt, const std::string& checkpoint, std::optional<std::size_t> group_size,
                       const std::string& mode, const std::string& out) {
  RunConfig cfg = resolve_config(opt);
  if (group_size) cfg.eval_group_size = *group_size;
  if (!mode.empty()) cfg.eval_mode = parse_mass_mode(mode);
  const auto ck = load_for_eval(checkpoint, opt, cfg);
  const Provenance prov{config_hash(cfg)};
  const auto eval_set = generate_dataset(cfg.eval_spec());
  const auto reports = entropy_profile(ck.params, eval_set, cfg.eval_group_size, cfg.eval_mode, cfg.eval_sample_seed,
                                       cfg.trainer.max_len);

  const std::string path = out.empty() ? checkpoint + ".entropy.jsonl" : out;
  auto os = open_output(path);
  os << stamped(prov, {{"type", "header"},
                       {"G", cfg.eval_group_size},
                       {"se_max", max_entropy(cfg.eval_group_size)},
                       {"mode", to_string(cfg.eval_mode)},
                       {"n", reports.size()}})
            .dump()
     << '\n';
  double mean = 0.0;
  for (const auto& r : reports) {
    os << to_json(r).dump() << '\n';
    mean += r.se;
  }
  mean /= static_cast<double>(reports.size());
  std::printf("G %zu\nse_max %.4f\nmean_se %.6f\nreport %s\n", cfg.eval_group_size, max_entropy(cfg.eval_group_size),
              mean, path.c_str());
  return kExitOk;
}

struct SweepFlags {
  std::vector<double> alphas;
  std::vector<std::string> kinds;
  std::vector<std::size_t> group_sizes;
  std::vector<std::uint64_t> seeds;
  unsigned threads = 0;
  std::string out;
};

int cmd_sweep(const CommonOptions& opt, const SweepFlags& flags) {
  RunConfig cfg = resolve_config(opt);
  if (!flags.alphas.empty()) cfg.sweep.alphas = flags.alphas;
  if (!flags.kinds.empty()) {
    cfg.sweep.kinds.clear();
    for (const auto& k : flags.kinds) cfg.sweep.kinds.push_back(parse_weight_kind(k));
  }
  if (!flags.group_sizes.empty()) cfg.sweep.group_sizes = flags.group_sizes;
  if (!flags.seeds.empty()) cfg.sweep.seeds = flags.seeds;
  if (flags.threads > 0) cfg.sweep_threads = flags.threads;
  cfg.validate();
  for (const auto& cell : cfg.sweep.cells(cfg.trainer)) cell.validate();

  const auto train_set = generate_dataset(cfg.train_spec());
  const auto eval_set = generate_dataset(cfg.eval_spec());
  const auto rows = ablation_sweep(cfg.trainer, cfg.context_order, cfg.sweep, train_set, eval_set, cfg.sweep_threads);

  const std::string path = flags.out.empty() ? (fs::path(cfg.output_dir) / "sweep.csv").string() : flags.out;
  auto os = open_output(path);
  write_sweep_csv(os, rows, [&](const TrainConfig& c) { return config_hash(cfg, c); });
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  std::printf("cells %zu\nfailed %zu\nsweep %s\n", rows.size(), failed, path.c_str());
  return failed ? kExitRuntime : kExitOk;
}

int cmd_grad_check(std::uint64_t seed, std::size_t trials, double h, std::optional<std::uint64_t> replay,
                   const std::string& granularity, const std::string& out) {
  constexpr double kTolerance = 1e-4;
  if (replay) {
    const auto t = make_grad_check_trial(*replay, parse_granularity(granularity));
    const auto r = check_grad_trial(t, h);
    std::cout << describe_trial(t, r).dump(2) << '\n';
    return r.rel_error < kTolerance ? kExitOk : kExitRuntime;
  }
  if (trials < 1) throw ConfigError("--trials must be >= 1");
  const GradCheckReport rep = run_grad_check(seed, trials, h);
  std::printf("trials %zu (token %zu, sequence %zu, clipping active in %zu)\nmax_rel_error %.3e\ntolerance %.0e\n",
              rep.trials, rep.token_trials, rep.sequence_trials, rep.clipped_trials, rep.max_rel_error, kTolerance);
  if (rep.max_rel_error < kTolerance) {
    std::printf("PASS\n");
    return kExitOk;
  }
  const std::string path = out.empty() ? "grad_check_worst.json" : out;
  auto os = open_output(path);
  os << rep.worst.dump(2) << '\n';
  std::printf("FAIL: worst configuration written to %s (replay with --replay %s --granularity %s)\n", path.c_str(),
              rep.worst["replay_key"].dump().c_str(), rep.worst["granularity"].get<std::string>().c_str());
  return kExitRuntime;
}

int cmd_init_checkpoint(const CommonOptions& opt, const std::string& kind, const std::string& out) {
  RunConfig cfg = resolve_config(opt);
  cfg.validate();
  PolicyParams params(cfg.modulus, cfg.context_order);
  if (kind == "oracle") {
    params = oracle_policy(cfg.modulus, cfg.context_order);
  } else if (kind != "uniform") {
    throw ConfigError("--kind must be 'uniform' or 'oracle', got '" + kind + "'");
  }
  save_checkpoint(out, params, Provenance{config_hash(cfg)}.json().dump());
  std::printf("checkpoint %s\n", out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEED-GRPO desk laboratory: semantic-entropy-modulated group-relative policy optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonOptions common;

  auto* train_cmd = app.add_subcommand("train", "Train a policy; writes metrics, checkpoints and a summary");
  add_config_options(train_cmd, common, true);
  std::string train_out;
  train_cmd->add_option("--out", train_out, "Output directory (overrides output.dir)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint: pass@1, optional avg@k, per-prompt SE");
  add_config_options(eval_cmd, common, false);
  std::string eval_ckpt, eval_out;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Policy checkpoint")->required();
  eval_cmd->add_option("--out", eval_out, "Report path (default <checkpoint>.eval.jsonl)");

  auto* ent_cmd = app.add_subcommand("entropy-report", "Per-prompt semantic entropy of a checkpoint");
  add_config_options(ent_cmd, common, false);
  std::string ent_ckpt, ent_mode, ent_out;
  std::optional<std::size_t> ent_g;
  ent_cmd->add_option("--checkpoint", ent_ckpt, "Policy checkpoint")->required();
  ent_cmd->add_option("--G", ent_g, "Rollouts per prompt (default eval.G)");
  ent_cmd->add_option("--mode", ent_mode, "Cluster mass mode: count or prob");
  ent_cmd->add_option("--out", ent_out, "Report path (default <checkpoint>.entropy.jsonl)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation grid over alpha x f x G x seed; writes a CSV");
  add_config_options(sweep_cmd, common, true);
  SweepFlags sweep_flags;
  sweep_cmd->add_option("--alpha", sweep_flags.alphas, "Alpha axis value (repeatable)");
  sweep_cmd->add_option("--f", sweep_flags.kinds, "Weight function axis value (repeatable)");
  sweep_cmd->add_option("--G", sweep_flags.group_sizes, "Group size axis value (repeatable)");
  sweep_cmd->add_option("--seed", sweep_flags.seeds, "Seed axis value (repeatable)");
  sweep_cmd->add_option("--threads", sweep_flags.threads, "Concurrent cells");
  sweep_cmd->add_option("--out", sweep_flags.out, "CSV path (default <output.dir>/sweep.csv)");

  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of the surrogate gradient");
  std::uint64_t gc_seed = 0;
  long long gc_trials = 100;
  double gc_h = 1e-5;
  std::optional<std::uint64_t> gc_replay;
  std::string gc_gran = "token", gc_out;
  gc_cmd->add_option("--seed", gc_seed, "Seed for the random configurations");
  gc_cmd->add_option("--trials", gc_trials, "Number of random configurations");
  gc_cmd->add_option("--fd-step", gc_h, "Central-difference step");
  gc_cmd->add_option("--replay", gc_replay, "Re-run a single trial by its replay key");
  gc_cmd->add_option("--granularity", gc_gran, "Granularity for --replay: token or sequence");
  gc_cmd->add_option("--out", gc_out, "Where to write the worst configuration on failure");

  auto* init_cmd = app.add_subcommand("init-checkpoint", "Write a uniform or oracle policy checkpoint");
  add_config_options(init_cmd, common, false);
  std::string init_kind = "uniform", init_out;
  init_cmd->add_option("--kind", init_kind, "uniform or oracle");
  init_cmd->add_option("--out", init_out, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(common, train_out);
    if (*eval_cmd) return cmd_eval(common, eval_ckpt, eval_out);
    if (*ent_cmd) return cmd_entropy_report(common, ent_ckpt, ent_g, ent_mode, ent_out);
    if (*sweep_cmd) return cmd_sweep(common, sweep_flags);
    if (*gc_cmd) {
      if (gc_trials < 1) throw ConfigError("--trials must be >= 1");
      return cmd_grad_check(gc_seed, static_cast<std::size_t>(gc_trials), gc_h, gc_replay, gc_gran, gc_out);
    }
    if (*init_cmd) return cmd_init_checkpoint(common, init_kind, init_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
