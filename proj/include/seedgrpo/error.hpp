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

#include <stdexcept>
#include <string>

namespace seedgrpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input to an operation (bad token id, empty group, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A quantity left its numeric domain (non-finite logits, log of zero mass).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace seedgrpo
