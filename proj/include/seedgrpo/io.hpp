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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "seedgrpo/checkpoint.hpp"
#include "seedgrpo/error.hpp"
#include "seedgrpo/trainer.hpp"
#include "seedgrpo/version.hpp"

namespace seedgrpo {

/// Provenance stamped into every output: config hash and tool version.
struct Provenance {
  std::string config_hash;
  std::string version = kVersion;

  nlohmann::json json() const { return {{"config_hash", config_hash}, {"version", version}}; }
};

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string() + ": cannot create directory: " + ec.message());
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  return os;
}

/// Merges provenance into a record. Keys serialize in sorted order.
inline nlohmann::json stamped(const Provenance& prov, const nlohmann::json& record) {
  nlohmann::json out = prov.json();
  for (auto it = record.begin(); it != record.end(); ++it) out[it.key()] = it.value();
  return out;
}

/// Training outputs under one directory:
///   metrics.jsonl            one StepMetrics record per step
///   checkpoints/step_N.ckpt  every `checkpoint_every` steps (0 = never)
///   final.ckpt               written by finish()
///   summary.csv              config_hash,steps,final_pass_at_1,mean_se
class RunWriter {
 public:
  RunWriter(std::filesystem::path dir, Provenance prov, std::size_t checkpoint_every)
      : dir_(std::move(dir)), prov_(std::move(prov)), every_(checkpoint_every) {
    metrics_ = open_output(dir_ / "metrics.jsonl");
  }

  void on_step(const StepMetrics& m, const PolicyParams& params) {
    metrics_ << stamped(prov_, to_json(m)).dump() << '\n';
    if (!metrics_) throw IoError((dir_ / "metrics.jsonl").string() + ": write failed");
    se_sum_ += m.mean_se;
    ++steps_;
    if (every_ > 0 && (m.step + 1) % every_ == 0) {
      const auto path = dir_ / "checkpoints" / ("step_" + std::to_string(m.step + 1) + ".ckpt");
      std::filesystem::create_directories(path.parent_path());
      save_checkpoint(path, params, prov_.json().dump());
    }
  }

  StepCallback callback() {
    return [this](const StepMetrics& m, const PolicyParams& p) { on_step(m, p); };
  }

  void finish(const PolicyParams& params, double final_pass_at_1) {
    metrics_.flush();
    save_checkpoint(dir_ / "final.ckpt", params, prov_.json().dump());
    auto os = open_output(dir_ / "summary.csv");
    os << "config_hash,steps,final_pass_at_1,mean_se\n"
       << prov_.config_hash << ',' << steps_ << ',' << nlohmann::json(final_pass_at_1).dump() << ','
       << nlohmann::json(steps_ ? se_sum_ / static_cast<double>(steps_) : 0.0).dump() << '\n';
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  Provenance prov_;
  std::size_t every_;
  std::ofstream metrics_;
  double se_sum_ = 0.0;
  std::size_t steps_ = 0;
};

}  // namespace seedgrpo
