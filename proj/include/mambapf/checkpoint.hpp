// Copyright 2026 The mambapf Authors
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

#include <filesystem>
#include <iosfwd>

#include "mambapf/config.hpp"
#include "mambapf/denoise_net.hpp"

namespace mambapf {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  DenoiseModel model;
};

/// Text layout:
///   mambapf-checkpoint <version>
///   config
///   <key = value lines>
///   end config
///   param <name> <rows> <cols>
///   <one line per row, shortest round-trip decimals>
///   ...
///   end
void write_checkpoint(std::ostream& out, const RunConfig& config, const DenoiseModel& model);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const DenoiseModel& model);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws E_CHECKPOINT_MISMATCH naming the differing architecture keys.
void require_compatible(const RunConfig& checkpoint_config, const RunConfig& requested);

}  // namespace mambapf
