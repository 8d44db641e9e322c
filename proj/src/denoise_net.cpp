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

#include "mambapf/denoise_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mambapf/ops.hpp"
#include "mambapf/parallel.hpp"

namespace mambapf {

using ad::Tensor;
using ad::Var;

namespace {

Tensor uniform(Index rows, Index cols, double bound, CounterRng& rng) {
  Tensor m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

EdgeConvParams init_edgeconv(Index in, Index out, CounterRng& rng) {
  EdgeConvParams p;
  p.f_weight = uniform(in, out, 1.0 / std::sqrt(double(in)), rng);
  p.f_bias = Tensor::Zero(1, out);
  p.g_weight = uniform(2 * in, out, 1.0 / std::sqrt(double(2 * in)), rng);
  p.g_bias = Tensor::Zero(1, out);
  return p;
}

std::vector<Index> inverse_permutation(std::span<const Index> order) {
  std::vector<Index> inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv[static_cast<std::size_t>(order[i])] = static_cast<Index>(i);
  return inv;
}

Var mamba_stage(Var h, std::span<const Index> order, std::span<const Index> inverse,
                const std::vector<MambaBlockParams>& blocks, const NetConfig& config) {
  if (blocks.empty()) return h;
  Var seq = ad::gather_rows(h, order);
  for (const auto& block : blocks) seq = mamba_block(seq, block, config.scan);
  return ad::gather_rows(seq, inverse);
}

}  // namespace

std::size_t DenoiseModel::parameter_count() const {
  std::size_t n = 0;
  visit([&n](const std::string&, const Tensor& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

DenoiseModuleParams init_denoise_module(const NetConfig& config, CounterRng& rng) {
  const Index c = config.width;
  if (c < 2 || config.mamba_layers < 0 || config.k_graph < 1) {
    fail(ErrorCode::invalid_input, "init_denoise_module: invalid network configuration");
  }
  DenoiseModuleParams p;
  for (int l = 0; l < kEncoderStages; ++l) {
    p.edge[l] = init_edgeconv(l == 0 ? 3 : c, c, rng);
    for (Index b = 0; b < config.mamba_layers; ++b) p.encoder[l].push_back(init_mamba_block(config.mamba(c), rng));
  }
  for (Index b = 0; b < config.mamba_layers; ++b) p.decoder.push_back(init_mamba_block(config.mamba(c), rng));
  const Index half = c / 2;
  p.reduce_weight = uniform(c, half, 1.0 / std::sqrt(double(c)), rng);
  p.reduce_bias = Tensor::Zero(1, half);
  p.head_weight = uniform(half, 3, 0.1 / std::sqrt(double(half)), rng);
  p.head_bias = Tensor::Zero(1, 3);
  return p;
}

DenoiseModel init_model(const NetConfig& config, Index module_count, std::uint64_t seed) {
  if (module_count < 1) fail(ErrorCode::invalid_input, "init_model: need at least one module");
  DenoiseModel model;
  model.config = config;
  for (Index m = 0; m < module_count; ++m) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    model.modules.push_back(init_denoise_module(config, rng));
  }
  return model;
}

void zero_decoders(DenoiseModel& model) {
  for (auto& m : model.modules) {
    m.head_weight.setZero();
    m.head_bias.setZero();
  }
}

std::vector<Index> sequence_order(const PointCloud& points, const Vec3& reference) {
  const Eigen::VectorXd d2 = (points.rowwise() - reference.transpose()).rowwise().squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return d2(a) < d2(b) || (d2(a) == d2(b) && a < b); });
  return order;
}

Var edgeconv_layer(const DirectedGraph& graph, Var h, const EdgeConvParams& p) {
  if (h.cols() != p.in_dim() || p.g_weight.rows() != 2 * p.in_dim() || p.g_weight.cols() != p.out_dim()) {
    fail(ErrorCode::invalid_input, "edgeconv_layer: feature width " + std::to_string(h.cols()) +
                                       " does not match layer input width " + std::to_string(p.in_dim()));
  }
  if (graph.vertex_count() != h.rows()) fail(ErrorCode::invalid_input, "edgeconv_layer: graph/feature size mismatch");
  ad::Tape& t = h.tape();
  const Var self = ad::silu(ad::add_row(ad::matmul(h, t.parameter(p.f_weight)), t.parameter(p.f_bias)));
  const Index k = graph.k();
  if (k == 0) return self;

  const Index n = h.rows();
  std::vector<Index> src(static_cast<std::size_t>(n * k)), dst(static_cast<std::size_t>(n * k));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      src[static_cast<std::size_t>(i * k + j)] = i;
      dst[static_cast<std::size_t>(i * k + j)] = graph.neighbors(i, j);
    }
  }
  const Var hi = ad::gather_rows(h, src);
  const Var hj = ad::gather_rows(h, dst);
  const Var edge_in = ad::concat_cols(hi, ad::sub(hj, hi));
  const Var edge = ad::silu(ad::add_row(ad::matmul(edge_in, t.parameter(p.g_weight)), t.parameter(p.g_bias)));
  return ad::add(self, ad::segment_sum_rows(edge, k));
}

Eigen::MatrixXd edgeconv_layer(const DirectedGraph& graph, const Eigen::MatrixXd& features,
                               const EdgeConvParams& params) {
  ad::Tape tape(false);
  return edgeconv_layer(graph, tape.constant(features), params).value();
}

Var encode(Var points, const Vec3& reference, const DenoiseModuleParams& params, const NetConfig& config) {
  if (points.cols() != 3) fail(ErrorCode::invalid_input, "encode: points must be N x 3");
  if (points.rows() < config.k_graph + 1) {
    fail(ErrorCode::invalid_input, "encode: patch of " + std::to_string(points.rows()) + " points needs more than k=" +
                                       std::to_string(config.k_graph));
  }
  const std::vector<Index> order = sequence_order(points.value(), reference);
  const std::vector<Index> inverse = inverse_permutation(order);
  Var h = points;
  for (int l = 0; l < kEncoderStages; ++l) {
    const DirectedGraph graph = build_knn_graph(h.value(), config.k_graph);
    h = edgeconv_layer(graph, h, params.edge[l]);
    h = mamba_stage(h, order, inverse, params.encoder[l], config);
  }
  return h;
}

Eigen::MatrixXd encode(const Patch& patch, const DenoiseModuleParams& params, const NetConfig& config) {
  ad::Tape tape(false);
  return encode(tape.constant(patch.points), patch.reference_point, params, config).value();
}

Var decode(Var features, std::span<const Index> order, const DenoiseModuleParams& params, const NetConfig& config) {
  if (features.rows() == 0) fail(ErrorCode::invalid_input, "decode: empty features");
  if (features.cols() != params.reduce_weight.rows()) fail(ErrorCode::invalid_input, "decode: feature width mismatch");
  if (static_cast<Index>(order.size()) != features.rows()) fail(ErrorCode::invalid_input, "decode: order size mismatch");
  ad::Tape& t = features.tape();
  const std::vector<Index> inverse = inverse_permutation(order);
  const Var h = mamba_stage(features, order, inverse, params.decoder, config);
  const Var reduced = ad::silu(ad::add_row(ad::matmul(h, t.parameter(params.reduce_weight)), t.parameter(params.reduce_bias)));
  const Var head = ad::add_row(ad::matmul(reduced, t.parameter(params.head_weight)), t.parameter(params.head_bias));
  return ad::scale(ad::tanh(head), config.max_step);
}

Eigen::MatrixXd decode(const Eigen::MatrixXd& features, std::span<const Index> order,
                       const DenoiseModuleParams& params, const NetConfig& config) {
  ad::Tape tape(false);
  return decode(tape.constant(features), order, params, config).value();
}

Var denoise_module(Var points, const Vec3& reference, const DenoiseModuleParams& params, const NetConfig& config) {
  const std::vector<Index> order = sequence_order(points.value(), reference);
  const Var features = encode(points, reference, params, config);
  return ad::add(points, decode(features, order, params, config));
}

Patch denoise_module(const Patch& patch, const DenoiseModuleParams& params, const NetConfig& config) {
  ad::Tape tape(false);
  Patch out = patch;
  out.points = denoise_module(tape.constant(patch.points), patch.reference_point, params, config).value();
  return out;
}

double IterationSchedule::sigma(int t) const {
  validate();
  if (t < 1 || t > iterations) {
    fail(ErrorCode::invalid_input, "adaptive schedule: iteration " + std::to_string(t) + " outside [1, " +
                                       std::to_string(iterations) + "]");
  }
  if (t == iterations) return sigma_end;
  const double frac = static_cast<double>(t - 1) / static_cast<double>(iterations - 1);
  return sigma_start + (sigma_end - sigma_start) * frac;
}

void IterationSchedule::validate() const {
  if (iterations < 1) fail(ErrorCode::invalid_input, "adaptive schedule: need at least one iteration");
  if (!(sigma_start >= 0.0) || !(sigma_end >= 0.0) || sigma_end > sigma_start) {
    fail(ErrorCode::invalid_input, "adaptive schedule: need 0 <= sigma_end <= sigma_start");
  }
}

PointCloud adaptive_gt(const PointCloud& clean, int t, const IterationSchedule& schedule, std::uint64_t seed) {
  const double sigma = schedule.sigma(t);
  NoiseSpec spec{sigma, NoiseReference::bounding_sphere_radius, derive_seed(seed, static_cast<std::uint64_t>(t))};
  return add_gaussian_noise(clean, spec);
}

PointCloud iterative_filter(const PointCloud& noisy, const DenoiseModel& model, int iterations, Index patch_size,
                            int threads) {
  if (iterations < 1) fail(ErrorCode::invalid_input, "iterative_filter: need at least one iteration");
  if (model.modules.empty()) fail(ErrorCode::invalid_input, "iterative_filter: model has no modules");
  require_finite(noisy, "iterative_filter");
  const std::vector<Patch> patches = extract_patches(noisy, patch_size);
  std::vector<PointCloud> filtered(patches.size());
  parallel_for(patches.size(), threads, [&](std::size_t p) {
    Patch current = patches[p];
    for (int t = 1; t <= iterations; ++t)
      for (const auto& module : model.modules) current = denoise_module(current, module, model.config);
    filtered[p] = std::move(current.points);
  });
  return stitch_patches(patches, filtered, noisy.rows());
}

PointCloud denoise_cloud(const PointCloud& noisy, const DenoiseModel& model, int iterations, Index patch_size,
                         bool normalize, int threads) {
  if (!normalize) return iterative_filter(noisy, model, iterations, patch_size, threads);
  const auto [unit, transform] = normalize_to_unit(noisy);
  const PointCloud filtered = iterative_filter(unit, model, iterations, patch_size, threads);
  return noisy + (filtered - unit) * transform.scale;
}

}  // namespace mambapf
