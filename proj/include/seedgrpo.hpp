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

#include "seedgrpo/advantage.hpp"
#include "seedgrpo/checkpoint.hpp"
#include "seedgrpo/config.hpp"
#include "seedgrpo/entropy.hpp"
#include "seedgrpo/error.hpp"
#include "seedgrpo/eval.hpp"
#include "seedgrpo/gradcheck.hpp"
#include "seedgrpo/io.hpp"
#include "seedgrpo/policy.hpp"
#include "seedgrpo/rng.hpp"
#include "seedgrpo/task.hpp"
#include "seedgrpo/tokens.hpp"
#include "seedgrpo/trainer.hpp"
#include "seedgrpo/version.hpp"
