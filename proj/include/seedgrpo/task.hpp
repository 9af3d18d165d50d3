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

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seedgrpo/error.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/tokens.hpp"

namespace seedgrpo {

/// Parameters of a synthetic modular-addition dataset.
struct TaskSpec {
  int modulus = 10;
  std::int64_t operand_min = 0;
  std::int64_t operand_max = 9;
  std::size_t dataset_size = 256;
  std::uint64_t split_seed = 1;

  void validate() const {
    if (modulus < 2) throw ConfigError("task.modulus must be >= 2");
    if (operand_min > operand_max)
      throw ConfigError("task.operand_range is empty (operand_min > operand_max)");
    if (dataset_size < 1) throw ConfigError("task.dataset_size must be >= 1");
  }
};

/// One question q with its ground-truth answer.
struct Prompt {
  std::int64_t prompt_id = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  int modulus = 10;
  std::vector<Token> question_tokens;
  std::string truth_answer;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

inline std::int64_t floor_mod(std::int64_t x, std::int64_t m) {
  const std::int64_t r = x % m;
  return r < 0 ? r + m : r;
}

inline std::vector<Token> digits_of(std::uint64_t value) {
  std::vector<Token> out;
  const std::string s = std::to_string(value);
  for (char c : s) out.push_back(static_cast<Token>(c - '0'));
  return out;
}

/// Strips leading zeros from a digit string; an all-zero string becomes "0".
inline std::string canonicalize_digits(std::string_view digits) {
  std::size_t first = digits.find_first_not_of('0');
  if (first == std::string_view::npos) return digits.empty() ? std::string() : std::string("0");
  return std::string(digits.substr(first));
}

/// Extracts the answer a token sequence commits to.
///
/// The answer is the maximal run of digit tokens that ends immediately before
/// the first EOS (or before the end of the sequence if no EOS was emitted).
/// Leading zeros are stripped, so [0, 0, 7, EOS] and [7, EOS] mean the same
/// thing. Returns nullopt when no digit precedes termination.
inline std::optional<std::string> canonicalize_answer(std::span<const Token> tokens) {
  std::size_t end = 0;
  while (end < tokens.size() && tokens[end] != kEos) ++end;
  std::size_t begin = end;
  while (begin > 0 && is_digit_token(tokens[begin - 1])) --begin;
  if (begin == end) return std::nullopt;
  std::string digits;
  digits.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) digits.push_back(static_cast<char>('0' + tokens[i]));
  return canonicalize_digits(digits);
}

/// Rule-based 0/1 reward. Total: an unparseable answer scores 0.
inline int verify(const Prompt& prompt, const std::optional<std::string>& answer) {
  if (!answer || answer->empty()) return 0;
  for (char c : *answer)
    if (c < '0' || c > '9') return 0;
  return canonicalize_digits(*answer) == prompt.truth_answer ? 1 : 0;
}

inline Prompt make_prompt(std::int64_t prompt_id, std::int64_t a, std::int64_t b, int modulus) {
  Prompt p;
  p.prompt_id = prompt_id;
  p.a = a;
  p.b = b;
  p.modulus = modulus;
  // <bos> |a| digits <bos> |b| digits; signs are not rendered.
  auto render = [&](std::int64_t v) {
    for (Token t : digits_of(static_cast<std::uint64_t>(v < 0 ? -v : v))) p.question_tokens.push_back(t);
  };
  p.question_tokens.push_back(kBos);
  render(a);
  p.question_tokens.push_back(kBos);
  render(b);
  p.truth_answer = std::to_string(floor_mod(a + b, modulus));
  return p;
}

/// Draws `dataset_size` prompts. Prompt i depends only on (split_seed, i).
inline std::vector<Prompt> generate_dataset(const TaskSpec& spec) {
  spec.validate();
  const auto width = static_cast<std::uint64_t>(spec.operand_max - spec.operand_min) + 1;
  std::vector<Prompt> out;
  out.reserve(spec.dataset_size);
  for (std::size_t i = 0; i < spec.dataset_size; ++i) {
    CounterRng rng(derive_key({spec.split_seed, 0x7461736bULL, i}));
    const auto a = spec.operand_min + static_cast<std::int64_t>(rng.below(width));
    const auto b = spec.operand_min + static_cast<std::int64_t>(rng.below(width));
    out.push_back(make_prompt(static_cast<std::int64_t>(i), a, b, spec.modulus));
  }
  return out;
}

inline nlohmann::json prompt_to_json(const Prompt& p) {
  return {{"prompt_id", p.prompt_id}, {"a", p.a}, {"b", p.b}, {"modulus", p.modulus}, {"truth", p.truth_answer}};
}

/// JSONL export: one {prompt_id, a, b, modulus, truth} object per line.
inline void write_dataset_jsonl(std::ostream& os, std::span<const Prompt> prompts) {
  for (const auto& p : prompts) os << prompt_to_json(p).dump() << '\n';
}

}  // namespace seedgrpo
