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

#include "mambapf/train.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>

#include "mambapf/io.hpp"
#include "mambapf/kdtree.hpp"
#include "mambapf/ops.hpp"
#include "mambapf/parallel.hpp"
#include "mambapf/render.hpp"

namespace mambapf {

namespace {

constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kNoiseTag = 2;
constexpr std::uint64_t kGtTag = 3;

void dump_diagnostics(const std::filesystem::path& path, std::int64_t step, const LossBreakdown& loss,
                      const DenoiseModel& model) {
  std::ofstream out(path);
  if (!out) return;
  out << "non-finite loss at step " << step << "\n";
  for (std::size_t t = 0; t < loss.recon.size(); ++t) {
    out << "t=" << t + 1 << " recon=" << format_double(loss.recon[t]) << " render=" << format_double(loss.render[t])
        << "\n";
  }
  model.visit([&out](const std::string& name, const ad::Tensor& p) {
    out << name << " norm=" << format_double(p.norm()) << (p.allFinite() ? "" : " NON-FINITE") << "\n";
  });
}

}  // namespace

TrainingExample make_example(const PointCloud& clean, const RunConfig& config, std::uint64_t seed) {
  require_finite(clean, "training cloud");
  const NoiseSpec spec{config.noise_sigma, config.reference(), seed};
  const PointCloud noisy = add_gaussian_noise(clean, spec);
  TrainingExample ex;
  if (config.normalize) {
    auto [unit, transform] = normalize_to_unit(noisy);
    ex.noisy = std::move(unit);
    ex.transform = transform;
    ex.clean = transform.apply(clean);
  } else {
    ex.noisy = noisy;
    ex.clean = clean;
  }
  ex.patches = extract_patches(ex.noisy, config.patch_size);
  for (const auto& p : ex.patches) ex.weights.push_back(stitch_weights(p));
  return ex;
}

std::uint64_t adaptive_gt_seed(const RunConfig& config, std::int64_t step) {
  return derive_seed(derive_seed(config.seed, kGtTag), static_cast<std::uint64_t>(step));
}

std::uint64_t noise_seed(const RunConfig& config, std::size_t cloud_index) {
  return derive_seed(derive_seed(config.seed, kNoiseTag), static_cast<std::uint64_t>(cloud_index));
}

std::vector<ad::Var> unroll_patch(ad::Var points, const Vec3& reference, const DenoiseModel& model, int iterations) {
  std::vector<ad::Var> stages;
  ad::Var x = points;
  for (int t = 1; t <= iterations; ++t) {
    for (const auto& module : model.modules) x = denoise_module(x, reference, module, model.config);
    stages.push_back(x);
  }
  return stages;
}

ad::Var patch_loss(ad::Tape& tape, const Patch& patch, const StitchWeights& weights, const DenoiseModel& model,
                   std::span<const PointCloud> adaptive_gts, const RunConfig& config) {
  if (static_cast<int>(adaptive_gts.size()) != config.iterations) {
    fail(ErrorCode::invalid_input, "patch_loss: need one adaptive ground truth per iteration");
  }
  const auto stages = unroll_patch(tape.constant(patch.points), patch.reference_point, model, config.iterations);
  const RenderConfig rc = config.render();
  std::vector<ad::Var> recon, render;
  for (int t = 0; t < config.iterations; ++t) {
    const PointCloud& gt = adaptive_gts[static_cast<std::size_t>(t)];
    recon.push_back(recon_loss(stages[static_cast<std::size_t>(t)], gt, weights.weights));
    render.push_back(config.alpha > 0.0 ? render_loss(stages[static_cast<std::size_t>(t)], gt, rc)
                                        : tape.constant(ad::Tensor::Zero(1, 1)));
  }
  return total_loss(recon, render, config.alpha);
}

std::vector<Eigen::MatrixXd*> parameter_pointers(DenoiseModel& model) {
  std::vector<Eigen::MatrixXd*> out;
  model.visit([&out](const std::string&, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

StepResult loss_and_gradients(const DenoiseModel& model, const TrainingExample& example,
                              std::span<const PointCloud> adaptive_gts, const RunConfig& config, int threads,
                              bool recompute_forward) {
  const int T = config.iterations;
  if (static_cast<int>(adaptive_gts.size()) != T) {
    fail(ErrorCode::invalid_input, "loss_and_gradients: need one adaptive ground truth per iteration");
  }
  const std::size_t np = example.patches.size();

  // Pass 1: unroll every patch, keeping each iteration's outputs. With
  // recompute_forward the tapes are dropped and rebuilt in pass 3.
  std::vector<std::vector<PointCloud>> outputs(np);
  std::vector<std::unique_ptr<ad::Tape>> tapes(np);
  std::vector<std::vector<ad::Var>> stages(np);
  parallel_for(np, threads, [&](std::size_t p) {
    tapes[p] = std::make_unique<ad::Tape>(!recompute_forward);
    const Patch& patch = example.patches[p];
    stages[p] = unroll_patch(tapes[p]->constant(patch.points), patch.reference_point, model, T);
    for (const ad::Var& v : stages[p]) outputs[p].push_back(v.value());
    if (recompute_forward) {
      stages[p].clear();
      tapes[p].reset();
    }
  });

  // Pass 2: the loss over patch outputs; gradients w.r.t. every output.
  ad::Tape loss_tape;
  std::vector<std::vector<ad::Var>> leaves(np);
  for (std::size_t p = 0; p < np; ++p)
    for (int t = 0; t < T; ++t) leaves[p].push_back(loss_tape.leaf(outputs[p][static_cast<std::size_t>(t)]));

  const RenderConfig rc = config.render();
  StepResult result;
  result.loss.alpha = config.alpha;
  std::vector<ad::Var> recon_terms, render_terms;
  for (int t = 0; t < T; ++t) {
    const PointCloud& gt = adaptive_gts[static_cast<std::size_t>(t)];
    const KdTree gt_tree(gt);
    std::vector<ad::Var> per_patch;
    for (std::size_t p = 0; p < np; ++p) {
      per_patch.push_back(recon_loss(leaves[p][static_cast<std::size_t>(t)], gt_tree, example.weights[p].weights));
    }
    const ad::Var recon = ad::scale(ad::sum_scalars(per_patch), 1.0 / double(np));
    ad::Var render = loss_tape.constant(ad::Tensor::Zero(1, 1));
    if (config.alpha > 0.0) {
      std::vector<ad::Var> stage;
      for (std::size_t p = 0; p < np; ++p) stage.push_back(leaves[p][static_cast<std::size_t>(t)]);
      const ad::Var stitched = stitch_patches(example.patches, stage, example.noisy.rows(), example.weights);
      render = render_loss(stitched, gt, rc, threads);
    }
    recon_terms.push_back(recon);
    render_terms.push_back(render);
    result.loss.recon.push_back(recon.value()(0, 0));
    result.loss.render.push_back(render.value()(0, 0));
  }
  const ad::Var total = total_loss(recon_terms, render_terms, config.alpha);
  result.loss.total = total.value()(0, 0);
  if (!std::isfinite(result.loss.total)) return result;
  loss_tape.backward(total);

  // Pass 3: replay each patch on its own tape and pull the output gradients
  // back to the parameters; per-patch results are summed in patch order.
  std::vector<std::vector<Eigen::MatrixXd>> patch_grads(np);
  parallel_for(np, threads, [&](std::size_t p) {
    if (!tapes[p]) {
      tapes[p] = std::make_unique<ad::Tape>();
      const Patch& patch = example.patches[p];
      stages[p] = unroll_patch(tapes[p]->constant(patch.points), patch.reference_point, model, T);
    }
    ad::Tape& tape = *tapes[p];
    std::vector<ad::Seed> seeds;
    for (int t = 0; t < T; ++t) {
      seeds.push_back({stages[p][static_cast<std::size_t>(t)], loss_tape.grad(leaves[p][static_cast<std::size_t>(t)])});
    }
    tape.backward(seeds);
    model.visit([&](const std::string&, const ad::Tensor& param) { patch_grads[p].push_back(tape.parameter_grad(param)); });
    tapes[p].reset();
  });
  model.visit([&](const std::string&, const ad::Tensor& param) {
    result.grads.push_back(Eigen::MatrixXd::Zero(param.rows(), param.cols()));
  });
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t i = 0; i < result.grads.size(); ++i) result.grads[i] += patch_grads[p][i];
  double sq = 0.0;
  for (const auto& g : result.grads) sq += g.squaredNorm();
  result.grad_norm = std::sqrt(sq);
  return result;
}

TrainResult train(const RunConfig& config, const std::vector<PointCloud>& clean_clouds, const TrainOptions& options) {
  config.validate();
  if (clean_clouds.empty()) fail(ErrorCode::invalid_input, "train: no training clouds");

  std::vector<TrainingExample> examples;
  for (std::size_t c = 0; c < clean_clouds.size(); ++c) {
    examples.push_back(make_example(clean_clouds[c], config, noise_seed(config, c)));
  }

  TrainResult result;
  result.model = init_model(config.net(), config.modules, derive_seed(config.seed, kInitTag));
  Adam adam(config.adam());
  const IterationSchedule schedule = config.schedule();
  if (options.loss_log) write_loss_header(*options.loss_log);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const TrainingExample& ex : examples) {
      ++step;
      std::vector<PointCloud> gts;
      for (int t = 1; t <= config.iterations; ++t) gts.push_back(adaptive_gt(ex.clean, t, schedule, adaptive_gt_seed(config, step)));
      StepResult r = loss_and_gradients(result.model, ex, gts, config, options.threads, options.recompute_forward);
      if (options.loss_log) write_loss_rows(*options.loss_log, step, r.loss);
      bool finite = std::isfinite(r.loss.total);
      for (const auto& g : r.grads) finite = finite && g.allFinite();
      if (!finite) {
        if (options.diagnostics) dump_diagnostics(*options.diagnostics, step, r.loss, result.model);
        fail(ErrorCode::numeric, "train: non-finite loss or gradient at step " + std::to_string(step) +
                                     (options.diagnostics ? " (diagnostics in " + options.diagnostics->string() + ")"
                                                          : std::string()));
      }
      clip_grad_norm(r.grads, config.grad_clip);
      adam.step(parameter_pointers(result.model), r.grads);
      if (options.progress && options.progress_every > 0 && step % options.progress_every == 0) {
        *options.progress << "step " << step << " loss " << format_double(r.loss.total) << " grad_norm "
                          << format_double(r.grad_norm) << '\n';
      }
      result.history.push_back(std::move(r.loss));
    }
  }
  return result;
}

void write_loss_header(std::ostream& out) { out << "step,iter_t,recon,render,total\n"; }

void write_loss_rows(std::ostream& out, std::int64_t step, const LossBreakdown& loss) {
  for (std::size_t t = 0; t < loss.recon.size(); ++t) {
    out << step << ',' << t + 1 << ',' << format_double(loss.recon[t]) << ',' << format_double(loss.render[t]) << ','
        << format_double(loss.total) << '\n';
  }
}

}  // namespace mambapf
