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

#include "mambapf/error.hpp"

namespace mambapf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "E_INVALID_INPUT";
    case ErrorCode::degenerate_geometry: return "E_DEGENERATE_GEOMETRY";
    case ErrorCode::numeric: return "E_NUMERIC";
    case ErrorCode::mode: return "E_MODE";
    case ErrorCode::coverage: return "E_COVERAGE";
    case ErrorCode::parse: return "E_PARSE";
    case ErrorCode::checkpoint_mismatch: return "E_CHECKPOINT_MISMATCH";
    case ErrorCode::io: return "E_IO";
  }
  return "E_UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mambapf
