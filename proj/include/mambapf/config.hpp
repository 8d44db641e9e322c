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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mambapf/denoise_net.hpp"
#include "mambapf/optim.hpp"
#include "mambapf/render.hpp"

namespace mambapf {

/// Everything a run depends on. Defaults follow the published setup where it
/// gives one; widths and render resolution are desk-scale choices.
struct RunConfig {
  int modules = 4;
  int iterations = 4;
  int mamba_layers = 6;
  int patch_size = 2000;
  int k_graph = 16;
  int width = 32;
  int state_dim = 16;
  int expand = 2;
  int conv_width = 4;
  double max_step = 0.01;
  std::string scan = "associative";

  double alpha = 0.01;
  int views = 32;
  int image_size = 64;
  int depth_bins = 32;
  double splat_sigma = 1.0;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  int epochs = 100;

  double noise_sigma = 0.02;
  std::string noise_reference = "bounding_sphere_radius";
  double sigma_start = 0.02;
  double sigma_end = 0.0;

  std::uint64_t seed = 0;
  bool normalize = true;

  void validate() const;
  bool operator==(const RunConfig&) const = default;

  NetConfig net() const;
  RenderConfig render() const;
  AdamConfig adam() const;
  IterationSchedule schedule() const;
  NoiseReference reference() const;
};

/// Keys that fix the network shape; a checkpoint only loads under a config
/// that agrees on all of them.
const std::vector<std::string>& architecture_keys();
std::vector<std::string> config_keys();

/// Sets one key from its text value; throws E_PARSE on an unknown key or a
/// malformed value.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Flat `key = value` lines; '#' starts a comment.
RunConfig parse_config(std::istream& in, const std::string& source = "<stream>", RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void write_config(std::ostream& out, const RunConfig& config);

/// Architecture keys whose values differ.
std::vector<std::string> architecture_mismatches(const RunConfig& a, const RunConfig& b);

}  // namespace mambapf
