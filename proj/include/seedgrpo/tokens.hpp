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

#include <cstddef>
#include <string>

namespace seedgrpo {

// Token ids are dense in [0, kVocabSize): ten digits, then EOS, then BOS.
using Token = int;

inline constexpr int kVocabSize = 12;
inline constexpr Token kEos = 10;
inline constexpr Token kBos = 11;

constexpr bool is_digit_token(Token t) { return t >= 0 && t <= 9; }
constexpr bool is_valid_token(Token t) { return t >= 0 && t < kVocabSize; }

inline std::string token_name(Token t) {
  if (is_digit_token(t)) return std::string(1, static_cast<char>('0' + t));
  if (t == kEos) return "<eos>";
  if (t == kBos) return "<bos>";
  return "<?>";
}

}  // namespace seedgrpo
