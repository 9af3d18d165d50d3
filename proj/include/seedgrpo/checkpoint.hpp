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

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seedgrpo/error.hpp"
#include "seedgrpo/policy.hpp"

namespace seedgrpo {

// Policy checkpoint, version 1. All integers little-endian.
//
//   offset  size  field
//   0       8     magic "SGRPOCKP"
//   8       4     u32 format version (1)
//   12      4     u32 vocabulary size (12)
//   16      4     u32 context order k
//   20      4     u32 modulus M
//   24      8     u64 number of states (M * M * 12^k)
//   32      4     u32 metadata length n
//   36      n     metadata (UTF-8 JSON: config hash, tool version)
//   36+n    8*S*V logits, row-major by state, IEEE-754 binary64 bit patterns
//   end-8   8     u64 FNV-1a digest of every preceding byte
//
// Logits are stored as raw bit patterns, so save/load round-trips exactly.

inline constexpr std::string_view kCheckpointMagic = "SGRPOCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  auto u = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(origin_ + ": corrupt checkpoint: " + msg);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }

  std::string_view data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const PolicyParams& params, std::string_view metadata = "{}") {
  std::string out;
  out.reserve(48 + metadata.size() + params.logits().size() * 8);
  out.append(kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, kVocabSize);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.context_order()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.modulus()));
  detail::put_le<std::uint64_t>(out, params.num_states());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
  out.append(metadata);
  for (double x : params.logits()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  detail::put_le<std::uint64_t>(out, fnv1a(out));
  return out;
}

struct LoadedCheckpoint {
  PolicyParams params;
  std::string metadata;
};

inline LoadedCheckpoint decode_checkpoint(std::string_view data, std::string origin = "<memory>") {
  detail::Reader in(data, std::move(origin));
  if (in.bytes(kCheckpointMagic.size(), "magic") != kCheckpointMagic) in.fail("bad magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) in.fail("unsupported format version " + std::to_string(version));
  const auto vocab = in.get<std::uint32_t>("vocabulary size");
  if (vocab != static_cast<std::uint32_t>(kVocabSize)) in.fail("vocabulary size " + std::to_string(vocab));
  const auto k = in.get<std::uint32_t>("context order");
  const auto modulus = in.get<std::uint32_t>("modulus");
  const auto states = in.get<std::uint64_t>("state count");
  if (k > static_cast<std::uint32_t>(PolicyParams::kMaxContextOrder) || modulus < 2 || modulus > (1u << 16))
    in.fail("implausible header (k=" + std::to_string(k) + ", modulus=" + std::to_string(modulus) + ")");
  const auto meta_len = in.get<std::uint32_t>("metadata length");
  std::string metadata(in.bytes(meta_len, "metadata"));

  PolicyParams params(static_cast<int>(modulus), static_cast<int>(k));
  if (params.num_states() != states) in.fail("state count does not match header");
  for (double& x : params.logits()) x = std::bit_cast<double>(in.get<std::uint64_t>("logits"));
  const std::size_t body = in.pos();
  const auto digest = in.get<std::uint64_t>("digest");
  if (digest != fnv1a(data.substr(0, body))) in.fail("digest mismatch");
  if (in.pos() != data.size()) in.fail("trailing bytes");
  if (!params.all_finite()) in.fail("non-finite logits");
  return {std::move(params), std::move(metadata)};
}

inline void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                            std::string_view metadata = "{}") {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  const std::string bytes = encode_checkpoint(params, metadata);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(path.string() + ": write failed");
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open checkpoint");
  std::stringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str(), path.string());
}

}  // namespace seedgrpo
