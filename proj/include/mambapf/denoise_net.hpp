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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mambapf/autodiff.hpp"
#include "mambapf/geometry.hpp"
#include "mambapf/mamba_block.hpp"
#include "mambapf/patch_graph.hpp"

namespace mambapf {

inline constexpr int kEncoderStages = 4;

/// One Dynamic EdgeConv layer:
///   h_i' = silu(h_i W_f + b_f) + sum_{j in N(i)} silu([h_i, h_j - h_i] W_g + b_g)
struct EdgeConvParams {
  ad::Tensor f_weight, f_bias;  // d x c, 1 x c
  ad::Tensor g_weight, g_bias;  // 2d x c, 1 x c

  Eigen::Index in_dim() const { return f_weight.rows(); }
  Eigen::Index out_dim() const { return f_weight.cols(); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + "f.weight", f_weight);
    f(p + "f.bias", f_bias);
    f(p + "g.weight", g_weight);
    f(p + "g.bias", g_bias);
  }
  template <typename F>
  void visit(const std::string& p, F&& f) const {
    f(p + "f.weight", f_weight);
    f(p + "f.bias", f_bias);
    f(p + "g.weight", g_weight);
    f(p + "g.bias", g_bias);
  }
};

struct NetConfig {
  Eigen::Index width = 32;         // feature width of every encoder stage
  Eigen::Index mamba_layers = 6;   // Mamba blocks stacked in each stage
  Eigen::Index state_dim = 16;
  Eigen::Index expand = 2;
  Eigen::Index conv_width = 4;
  Eigen::Index k_graph = 16;
  double max_step = 0.01;          // per-pass displacement bound, normalised units
  ssm::ScanAlgorithm scan = ssm::ScanAlgorithm::associative;

  MambaConfig mamba(Eigen::Index model_dim) const {
    return MambaConfig{model_dim, state_dim, expand, conv_width, scan};
  }
  bool operator==(const NetConfig&) const = default;
};

/// One Mamba-Denoising Module: four EdgeConv + Mamba encoder stages, a Mamba
/// decoder stage, and a tanh-bounded linear head emitting displacements.
struct DenoiseModuleParams {
  std::array<EdgeConvParams, kEncoderStages> edge;
  std::array<std::vector<MambaBlockParams>, kEncoderStages> encoder;
  std::vector<MambaBlockParams> decoder;
  ad::Tensor reduce_weight, reduce_bias;  // c x c/2
  ad::Tensor head_weight, head_bias;      // c/2 x 3

  template <typename F>
  void visit(const std::string& p, F&& f) {
    visit_fields(*this, p, f);
  }
  template <typename F>
  void visit(const std::string& p, F&& f) const {
    visit_fields(*this, p, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_fields(Self& s, const std::string& p, F& f) {
    for (int l = 0; l < kEncoderStages; ++l) {
      const std::string stage = p + "enc" + std::to_string(l) + ".";
      s.edge[l].visit(stage + "edge.", f);
      for (std::size_t b = 0; b < s.encoder[l].size(); ++b) s.encoder[l][b].visit(stage + "mamba" + std::to_string(b) + ".", f);
    }
    for (std::size_t b = 0; b < s.decoder.size(); ++b) s.decoder[b].visit(p + "dec.mamba" + std::to_string(b) + ".", f);
    f(p + "dec.reduce.weight", s.reduce_weight);
    f(p + "dec.reduce.bias", s.reduce_bias);
    f(p + "dec.head.weight", s.head_weight);
    f(p + "dec.head.bias", s.head_bias);
  }
};

struct DenoiseModel {
  NetConfig config;
  std::vector<DenoiseModuleParams> modules;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t m = 0; m < modules.size(); ++m) modules[m].visit("module" + std::to_string(m) + ".", f);
  }
  template <typename F>
  void visit(F&& f) const {
    for (std::size_t m = 0; m < modules.size(); ++m) modules[m].visit("module" + std::to_string(m) + ".", f);
  }
  std::size_t parameter_count() const;
};

DenoiseModuleParams init_denoise_module(const NetConfig& config, CounterRng& rng);
DenoiseModel init_model(const NetConfig& config, Eigen::Index module_count, std::uint64_t seed);
/// Zeroes every head so each module returns its input unchanged.
void zero_decoders(DenoiseModel& model);

/// Mamba sequence order of a patch: nearest-first to the reference point,
/// ties to the lower index.
std::vector<Index> sequence_order(const PointCloud& points, const Vec3& reference);

ad::Var edgeconv_layer(const DirectedGraph& graph, ad::Var features, const EdgeConvParams& params);
Eigen::MatrixXd edgeconv_layer(const DirectedGraph& graph, const Eigen::MatrixXd& features,
                               const EdgeConvParams& params);

/// Features for each patch point (patch order). Every EdgeConv rebuilds its
/// kNN graph from the current features; the first uses coordinates.
ad::Var encode(ad::Var points, const Vec3& reference, const DenoiseModuleParams& params, const NetConfig& config);
Eigen::MatrixXd encode(const Patch& patch, const DenoiseModuleParams& params, const NetConfig& config);

/// Per-point displacement, bounded by config.max_step in every coordinate.
ad::Var decode(ad::Var features, std::span<const Index> order, const DenoiseModuleParams& params,
               const NetConfig& config);
Eigen::MatrixXd decode(const Eigen::MatrixXd& features, std::span<const Index> order,
                       const DenoiseModuleParams& params, const NetConfig& config);

/// points + decode(encode(points)).
ad::Var denoise_module(ad::Var points, const Vec3& reference, const DenoiseModuleParams& params,
                       const NetConfig& config);
Patch denoise_module(const Patch& patch, const DenoiseModuleParams& params, const NetConfig& config);

struct IterationSchedule {
  int iterations = 4;
  double sigma_start = 0.02;  // fraction of the bounding-sphere radius at t = 1
  double sigma_end = 0.0;     // at t = T

  /// Linear decay between the endpoints; t is 1-based.
  double sigma(int t) const;
  void validate() const;
};

/// Clean cloud perturbed with the iteration-t standard deviation; returns the
/// clean cloud itself when that deviation is zero.
PointCloud adaptive_gt(const PointCloud& clean, int t, const IterationSchedule& schedule, std::uint64_t seed);

/// Patches are extracted once, every iteration runs all modules over every
/// patch, and the patches are stitched after the last iteration.
PointCloud iterative_filter(const PointCloud& noisy, const DenoiseModel& model, int iterations,
                            Index patch_size, int threads = 1);

/// iterative_filter in the unit-normalised frame; the resulting displacement
/// is mapped back and added to the input, so a zero displacement returns the
/// input bit for bit.
PointCloud denoise_cloud(const PointCloud& noisy, const DenoiseModel& model, int iterations, Index patch_size,
                         bool normalize, int threads = 1);

}  // namespace mambapf
