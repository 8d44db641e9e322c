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

#include <cstdint>
#include <optional>

namespace mambapf {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream key from a seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// Counter-based generator: draw i is mix64(key + (i + 1) * golden). The
/// Gaussian transform is Box-Muller on pairs of draws, so a given
/// (seed, counter) produces the same numbers on every platform with an
/// IEEE libm.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on (0, 1].
  double uniform_open0() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  double gaussian() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

}  // namespace mambapf
