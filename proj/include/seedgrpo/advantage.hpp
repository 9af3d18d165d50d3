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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seedgrpo/error.hpp"

namespace seedgrpo {

/// Shape of the uncertainty weight f(u). All satisfy f(0) = 1 and are
/// non-increasing on u >= 0.
///   linear:      max(0, 1 - u)
///   exponential: exp(-u)
///   focal:       max(0, 1 - u)^gamma
enum class WeightKind { linear, exponential, focal };

inline std::string_view to_string(WeightKind k) {
  switch (k) {
    case WeightKind::linear: return "linear";
    case WeightKind::exponential: return "exponential";
    case WeightKind::focal: return "focal";
  }
  return "?";
}

inline WeightKind parse_weight_kind(std::string_view s) {
  if (s == "linear") return WeightKind::linear;
  if (s == "exponential" || s == "exp") return WeightKind::exponential;
  if (s == "focal") return WeightKind::focal;
  throw ConfigError("unknown weight function '" + std::string(s) + "' (expected linear, exponential or focal)");
}

struct ModulationConfig {
  double alpha = 0.02;
  WeightKind kind = WeightKind::linear;
  double gamma = 2.0;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("trainer.alpha must be finite and >= 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("trainer.gamma must be finite and > 0");
  }
};

/// A_i = r_i - mean(r). No division by the reward standard deviation.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw InputError("group_advantages: empty reward group");
  double sum = 0.0;
  for (double r : rewards) sum += r;
  const double mean = sum / static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r - mean);
  return out;
}

inline double weight_function(WeightKind kind, double gamma, double u) {
  if (!(u >= 0.0)) throw InputError("weight_function: u must be >= 0");
  switch (kind) {
    case WeightKind::linear: return std::max(0.0, 1.0 - u);
    case WeightKind::exponential: return std::exp(-u);
    case WeightKind::focal: return std::pow(std::max(0.0, 1.0 - u), gamma);
  }
  throw ConfigError("weight_function: unknown kind");
}

struct GroupAdvantages {
  std::vector<double> raw;
  std::vector<double> modulated;
  double scaled_u = 0.0;  // alpha * se / se_max
  double factor = 1.0;
};

/// A_hat_i = A_i * f(alpha * se / se_max). One factor for the whole group.
inline GroupAdvantages modulate(std::span<const double> raw, double se, double se_max, const ModulationConfig& config) {
  if (!(se_max > 0.0)) throw ConfigError("modulate: se_max must be > 0 (requires G >= 2)");
  if (!(se >= 0.0)) throw InputError("modulate: semantic entropy must be >= 0");
  GroupAdvantages out;
  out.raw.assign(raw.begin(), raw.end());
  out.scaled_u = config.alpha * se / se_max;
  out.factor = weight_function(config.kind, config.gamma, out.scaled_u);
  out.modulated.reserve(raw.size());
  for (double a : raw) out.modulated.push_back(a * out.factor);
  return out;
}

/// Dr.GRPO baseline: advantages pass through untouched.
inline GroupAdvantages unmodulated(std::span<const double> raw) {
  GroupAdvantages out;
  out.raw.assign(raw.begin(), raw.end());
  out.modulated = out.raw;
  return out;
}

}  // namespace seedgrpo
