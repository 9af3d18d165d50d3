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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seedgrpo/checkpoint.hpp"
#include "seedgrpo/error.hpp"
#include "seedgrpo/eval.hpp"
#include "seedgrpo/task.hpp"
#include "seedgrpo/trainer.hpp"

namespace seedgrpo {

/// A scalar or single-line array read from a config document.
/// Scalars keep their source text; quoted strings are unescaped.
struct ConfigValue {
  enum class Kind { string, bare, array };
  Kind kind = Kind::bare;
  std::string text;
  std::vector<ConfigValue> items;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) throw ConfigError("unexpected trailing text '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) throw ConfigError("missing value");
    if (s_[pos_] == '"') return parse_string();
    if (s_[pos_] == '[') return parse_array();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    ConfigValue v;
    v.text = std::string(s_.substr(start, pos_ - start));
    if (v.text.empty()) throw ConfigError("missing value");
    return v;
  }

  ConfigValue parse_string() {
    ++pos_;
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        c = e == 'n' ? '\n' : e == 't' ? '\t' : e;
      }
      v.text.push_back(c);
    }
    if (pos_ >= s_.size()) throw ConfigError("unterminated string");
    ++pos_;
    return v;
  }

  ConfigValue parse_array() {
    ++pos_;
    ConfigValue v;
    v.kind = ConfigValue::Kind::array;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.items.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) throw ConfigError("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      if (s_[pos_] != ',') throw ConfigError("expected ',' or ']' in array");
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

}  // namespace detail

inline ConfigValue parse_config_value(std::string_view text) { return detail::ValueParser(text).parse_all(); }

/// Parses `[section]` headers and `key = value` lines into dotted
/// (section.key, value) pairs in document order.
inline std::vector<std::pair<std::string, ConfigValue>> parse_config_document(std::string_view doc,
                                                                              const std::string& origin) {
  std::vector<std::pair<std::string, ConfigValue>> out;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream is{std::string(doc)};
  std::string raw;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string stripped = detail::strip_comment(raw);
    const std::string_view line = detail::trim(stripped);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside of any section");
    try {
      out.emplace_back(section + "." + key, parse_config_value(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + section + "." + key + ": " + e.what());
    }
  }
  return out;
}

/// Everything a run needs. Sections: task, policy, trainer, eval, output, sweep.
struct RunConfig {
  // task
  int modulus = 10;
  std::int64_t operand_min = 0;
  std::int64_t operand_max = 9;
  std::size_t train_size = 1000;
  std::size_t eval_size = 200;
  std::uint64_t train_seed = 1;
  std::uint64_t eval_seed = 2;
  // policy
  int context_order = 2;
  // trainer
  TrainConfig trainer;
  std::size_t checkpoint_every = 0;
  // eval
  std::size_t eval_group_size = 8;
  MassMode eval_mode = MassMode::count;
  std::size_t eval_avg_k = 0;
  std::uint64_t eval_sample_seed = 0;
  // output
  std::string output_dir = "runs/default";
  // sweep
  SweepGrid sweep;
  unsigned sweep_threads = 1;

  TaskSpec train_spec() const { return {modulus, operand_min, operand_max, train_size, train_seed}; }
  TaskSpec eval_spec() const { return {modulus, operand_min, operand_max, eval_size, eval_seed}; }
  EvalOptions eval_options() const {
    return {trainer.max_len, eval_group_size, eval_mode, eval_avg_k, eval_sample_seed};
  }

  void validate() const {
    train_spec().validate();
    eval_spec().validate();
    if (train_seed == eval_seed) throw ConfigError("task.train_seed and task.eval_seed must differ");
    if (context_order < 0 || context_order > PolicyParams::kMaxContextOrder)
      throw ConfigError("policy.context_order must be in [0, 4]");
    trainer.validate();
    if (eval_group_size < 2) throw ConfigError("eval.G must be >= 2");
    if (sweep_threads < 1) throw ConfigError("sweep.threads must be >= 1");
    sweep.validate();
  }
};

namespace detail {

inline std::string value_where(const std::string& key) { return key + ": "; }

inline std::string scalar_text(const std::string& key, const ConfigValue& v) {
  if (v.kind == ConfigValue::Kind::array) throw ConfigError(value_where(key) + "expected a scalar, got an array");
  return v.text;
}

template <typename Int>
Int to_integer(const std::string& key, const ConfigValue& v) {
  const std::string t = scalar_text(key, v);
  Int out{};
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size())
    throw ConfigError(value_where(key) + "expected an integer, got '" + t + "'");
  return out;
}

inline double to_double(const std::string& key, const ConfigValue& v) {
  const std::string t = scalar_text(key, v);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(out))
    throw ConfigError(value_where(key) + "expected a finite number, got '" + t + "'");
  return out;
}

inline std::string to_str(const std::string& key, const ConfigValue& v) { return scalar_text(key, v); }

inline std::vector<ConfigValue> to_list(const std::string& key, const ConfigValue& v) {
  if (v.kind != ConfigValue::Kind::array) return {v};
  if (v.items.empty()) throw ConfigError(value_where(key) + "list must not be empty");
  return v.items;
}

inline std::string fmt(double x) { return nlohmann::json(x).dump(); }

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out + "]";
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const ConfigValue&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool hashed = true;
};

// Wrappers to keep the field table short.
template <typename Int, typename Member>
Field int_field(std::string key, Member member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const ConfigValue& v) {
            const auto x = to_integer<long long>(k, v);
            if constexpr (std::is_unsigned_v<Int>) {
              if (x < 0) throw ConfigError(k + ": must be non-negative");
            }
            if (x < static_cast<long long>(std::numeric_limits<Int>::min()) ||
                static_cast<unsigned long long>(x) > static_cast<unsigned long long>(std::numeric_limits<Int>::max()))
              throw ConfigError(k + ": out of range");
            member(c) = static_cast<Int>(x);
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field u64_field(std::string key, Member member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const ConfigValue& v) {
            member(c) = to_integer<std::uint64_t>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {key, [member](RunConfig& c, const std::string& k, const ConfigValue& v) { member(c) = to_double(k, v); },
          [member](const RunConfig& c) { return fmt(member(c)); }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field<int>("task.modulus", [](auto& c) -> auto& { return c.modulus; }));
    f.push_back(int_field<std::int64_t>("task.operand_min", [](auto& c) -> auto& { return c.operand_min; }));
    f.push_back(int_field<std::int64_t>("task.operand_max", [](auto& c) -> auto& { return c.operand_max; }));
    f.push_back(int_field<std::size_t>("task.train_size", [](auto& c) -> auto& { return c.train_size; }));
    f.push_back(int_field<std::size_t>("task.eval_size", [](auto& c) -> auto& { return c.eval_size; }));
    f.push_back(u64_field("task.train_seed", [](auto& c) -> auto& { return c.train_seed; }));
    f.push_back(u64_field("task.eval_seed", [](auto& c) -> auto& { return c.eval_seed; }));
    f.push_back(int_field<int>("policy.context_order", [](auto& c) -> auto& { return c.context_order; }));
    f.push_back(int_field<std::size_t>("trainer.B", [](auto& c) -> auto& { return c.trainer.batch_size; }));
    f.push_back(int_field<std::size_t>("trainer.G", [](auto& c) -> auto& { return c.trainer.group_size; }));
    f.push_back(double_field("trainer.lr", [](auto& c) -> auto& { return c.trainer.lr; }));
    f.push_back(double_field("trainer.clip_eps", [](auto& c) -> auto& { return c.trainer.clip_eps; }));
    f.push_back(int_field<std::size_t>("trainer.steps", [](auto& c) -> auto& { return c.trainer.steps; }));
    f.push_back(
        int_field<std::size_t>("trainer.inner_epochs", [](auto& c) -> auto& { return c.trainer.inner_epochs; }));
    f.push_back({"trainer.ratio_granularity",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.trainer.granularity = parse_granularity(to_str(k, v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.trainer.granularity)); }});
    f.push_back(double_field("trainer.alpha", [](auto& c) -> auto& { return c.trainer.modulation.alpha; }));
    f.push_back({"trainer.f_kind",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.trainer.modulation.kind = parse_weight_kind(to_str(k, v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.trainer.modulation.kind)); }});
    f.push_back(double_field("trainer.gamma", [](auto& c) -> auto& { return c.trainer.modulation.gamma; }));
    f.push_back({"trainer.entropy_mode",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.trainer.entropy_mode = parse_mass_mode(to_str(k, v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.trainer.entropy_mode)); }});
    f.push_back(int_field<std::size_t>("trainer.max_len", [](auto& c) -> auto& { return c.trainer.max_len; }));
    f.push_back(u64_field("trainer.seed", [](auto& c) -> auto& { return c.trainer.seed; }));
    f.push_back({"trainer.algorithm",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.trainer.algorithm = parse_algorithm(to_str(k, v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.trainer.algorithm)); }});
    f.push_back(int_field<unsigned>("trainer.threads", [](auto& c) -> auto& { return c.trainer.threads; }));
    f.back().hashed = false;
    f.push_back(
        int_field<std::size_t>("trainer.checkpoint_every", [](auto& c) -> auto& { return c.checkpoint_every; }));
    f.back().hashed = false;
    f.push_back(int_field<std::size_t>("eval.G", [](auto& c) -> auto& { return c.eval_group_size; }));
    f.push_back({"eval.entropy_mode",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.eval_mode = parse_mass_mode(to_str(k, v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.eval_mode)); }});
    f.push_back(int_field<std::size_t>("eval.avg_k", [](auto& c) -> auto& { return c.eval_avg_k; }));
    f.push_back(u64_field("eval.seed", [](auto& c) -> auto& { return c.eval_sample_seed; }));
    f.push_back({"output.dir",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.output_dir = to_str(k, v); },
                 [](const RunConfig& c) { return c.output_dir; }, false});
    f.push_back({"sweep.alphas",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.sweep.alphas.clear();
                   for (const auto& x : to_list(k, v)) c.sweep.alphas.push_back(to_double(k, x));
                 },
                 [](const RunConfig& c) { return join(c.sweep.alphas, fmt); }});
    f.push_back({"sweep.f_kinds",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.sweep.kinds.clear();
                   for (const auto& x : to_list(k, v)) c.sweep.kinds.push_back(parse_weight_kind(to_str(k, x)));
                 },
                 [](const RunConfig& c) {
                   return join(c.sweep.kinds, [](WeightKind w) { return std::string(to_string(w)); });
                 }});
    f.push_back({"sweep.G_values",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.sweep.group_sizes.clear();
                   for (const auto& x : to_list(k, v)) c.sweep.group_sizes.push_back(to_integer<std::size_t>(k, x));
                 },
                 [](const RunConfig& c) {
                   return join(c.sweep.group_sizes, [](std::size_t g) { return std::to_string(g); });
                 }});
    f.push_back({"sweep.seeds",
                 [](RunConfig& c, const std::string& k, const ConfigValue& v) {
                   c.sweep.seeds.clear();
                   for (const auto& x : to_list(k, v)) c.sweep.seeds.push_back(to_integer<std::uint64_t>(k, x));
                 },
                 [](const RunConfig& c) {
                   return join(c.sweep.seeds, [](std::uint64_t s) { return std::to_string(s); });
                 }});
    f.push_back(int_field<unsigned>("sweep.threads", [](auto& c) -> auto& { return c.sweep_threads; }));
    f.back().hashed = false;
    return f;
  }();
  return table;
}

}  // namespace detail

/// Sets one dotted key. Unknown keys are rejected.
inline void apply_setting(RunConfig& config, const std::string& key, const ConfigValue& value) {
  for (const auto& f : detail::fields()) {
    if (f.key == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies a `section.key=value` override. The value uses config syntax;
/// anything that does not parse as such is taken as a bare string.
inline void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  const std::string key(detail::trim(assignment.substr(0, eq)));
  const std::string_view raw = detail::trim(assignment.substr(eq + 1));
  ConfigValue v;
  try {
    v = parse_config_value(raw);
  } catch (const ConfigError&) {
    v.text = std::string(raw);
  }
  apply_setting(config, key, v);
}

inline RunConfig parse_run_config(std::string_view doc, const std::string& origin = "<config>") {
  RunConfig c;
  for (const auto& [key, value] : parse_config_document(doc, origin)) {
    try {
      apply_setting(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

/// Every key with its resolved value, one `key = value` line each, in a
/// fixed order. Keys that cannot change results (thread counts, output
/// paths, checkpoint cadence) are omitted when `hashed_only`.
inline std::string canonical_config(const RunConfig& config, bool hashed_only = true) {
  std::string out;
  for (const auto& f : detail::fields()) {
    if (hashed_only && !f.hashed) continue;
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

/// Stable content digest of the resolved config, 16 hex digits.
inline std::string config_hash(const RunConfig& config) {
  const std::uint64_t h = fnv1a(canonical_config(config));
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) s[static_cast<std::size_t>(15 - i)] = kHex[(h >> (4 * i)) & 0xf];
  return s;
}

/// Hash of `base` with its trainer section replaced by `cell`.
inline std::string config_hash(RunConfig base, const TrainConfig& cell) {
  base.trainer = cell;
  return config_hash(base);
}

}  // namespace seedgrpo
