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
#include <optional>
#include <vector>

#include "mambapf/config.hpp"
#include "mambapf/denoise_net.hpp"
#include "mambapf/losses.hpp"
#include "mambapf/optim.hpp"
#include "mambapf/patch_graph.hpp"

namespace mambapf {

/// One training cloud, prepared once: noise is synthesised in model units,
/// then clean and noisy clouds are mapped with the noisy cloud's transform.
struct TrainingExample {
  PointCloud clean;  // normalised frame
  PointCloud noisy;  // normalised frame
  NormalizeTransform transform;
  std::vector<Patch> patches;
  std::vector<StitchWeights> weights;
};

TrainingExample make_example(const PointCloud& clean, const RunConfig& config, std::uint64_t seed);

/// Seed passed to adaptive_gt for every iteration of a (1-based) step.
std::uint64_t adaptive_gt_seed(const RunConfig& config, std::int64_t step);

/// Seed of the noise drawn once for training cloud `cloud_index`.
std::uint64_t noise_seed(const RunConfig& config, std::size_t cloud_index);

/// Outputs of every iteration t for one patch: stage[t - 1].
std::vector<ad::Var> unroll_patch(ad::Var points, const Vec3& reference, const DenoiseModel& model, int iterations);

/// The loss of one patch on a single tape:
///   sum_t recon(P_t, gt_t; w) + alpha * render(P_t, gt_t).
/// Used for gradient checks of the composed pipeline.
ad::Var patch_loss(ad::Tape& tape, const Patch& patch, const StitchWeights& weights, const DenoiseModel& model,
                   std::span<const PointCloud> adaptive_gts, const RunConfig& config);

struct StepResult {
  LossBreakdown loss;
  double grad_norm = 0.0;
  std::vector<Eigen::MatrixXd> grads;  // model.visit order, before clipping
};

/// Loss and parameter gradients of one example. Per-patch reconstruction
/// terms are averaged over patches; the render term compares the stitched
/// cloud with the adaptive ground truth.
StepResult loss_and_gradients(const DenoiseModel& model, const TrainingExample& example,
                              std::span<const PointCloud> adaptive_gts, const RunConfig& config, int threads = 1,
                              bool recompute_forward = false);

std::vector<Eigen::MatrixXd*> parameter_pointers(DenoiseModel& model);

struct TrainOptions {
  int threads = 1;
  std::ostream* loss_log = nullptr;  // CSV step,iter_t,recon,render,total
  std::optional<std::filesystem::path> diagnostics;  // written when a loss goes non-finite
  std::ostream* progress = nullptr;
  int progress_every = 10;
  bool recompute_forward = false;  // rebuild patch tapes for backward instead of holding them
};

struct TrainResult {
  DenoiseModel model;
  std::vector<LossBreakdown> history;
};

/// epochs passes over the clouds, one Adam step per cloud.
TrainResult train(const RunConfig& config, const std::vector<PointCloud>& clean_clouds, const TrainOptions& options);

void write_loss_header(std::ostream& out);
void write_loss_rows(std::ostream& out, std::int64_t step, const LossBreakdown& loss);

}  // namespace mambapf
