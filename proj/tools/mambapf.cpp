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

// mambapf command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mambapf/checkpoint.hpp"
#include "mambapf/config.hpp"
#include "mambapf/error.hpp"
#include "mambapf/io.hpp"
#include "mambapf/metrics.hpp"
#include "mambapf/render.hpp"
#include "mambapf/train.hpp"

namespace fs = std::filesystem;
using namespace mambapf;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--config", o.config_path, "key = value config file");
  cmd.add_option("--set", o.overrides, "override a config key, e.g. --set lr=0.001")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd.add_option("--seed", o.seed, "RNG seed (falls back to MAMBAPF_SEED, then the config)");
  cmd.add_option("--threads", o.threads, "worker threads; 1 is bitwise reproducible")->check(CLI::PositiveNumber);
}

std::uint64_t parse_seed(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 10);
    if (used == text.size() && text.find('-') == std::string::npos) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::invalid_input, std::string(what) + ": '" + text + "' is not an unsigned integer");
}

/// base < config file < --set < --seed.
RunConfig apply_overrides(const CommonOptions& o, const RunConfig& base) {
  RunConfig config = o.config_path.empty() ? base : load_config(o.config_path, base);
  for (const std::string& kv : o.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::parse, "--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) config.seed = *o.seed;
  config.validate();
  return config;
}

/// Defaults, then MAMBAPF_SEED, then the overrides above.
RunConfig resolve_config(const CommonOptions& o) {
  RunConfig base;
  if (const char* env = std::getenv("MAMBAPF_SEED"); env != nullptr && *env != '\0') {
    base.seed = parse_seed(env, "MAMBAPF_SEED");
  }
  return apply_overrides(o, base);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

// ---- train ----

struct TrainArgs {
  CommonOptions common;
  std::vector<std::string> inputs;
  std::string checkpoint = "model.ckpt";
  std::string loss_log = "loss.csv";
  bool quiet = false;
  bool low_memory = false;
};

int run_train(const TrainArgs& a) {
  const RunConfig config = resolve_config(a.common);
  std::vector<PointCloud> clouds;
  for (const auto& p : a.inputs) clouds.push_back(load_cloud(p));
  std::ofstream log = open_output(a.loss_log);
  TrainOptions opts;
  opts.threads = a.common.threads;
  opts.recompute_forward = a.low_memory;
  opts.loss_log = &log;
  opts.diagnostics = fs::path(a.checkpoint).concat(".diag.txt");
  if (!a.quiet) opts.progress = &std::cerr;
  const TrainResult r = train(config, clouds, opts);
  log.flush();
  if (!log) fail(ErrorCode::io, "write to '" + a.loss_log + "' failed");
  save_checkpoint(a.checkpoint, config, r.model);
  if (!a.quiet) std::cerr << "wrote " << a.checkpoint << " and " << a.loss_log << '\n';
  return 0;
}

// ---- denoise ----

struct DenoiseArgs {
  CommonOptions common;
  std::string checkpoint, input, output;
};

int run_denoise(const DenoiseArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  // Unspecified keys keep their trained values; shape keys must agree.
  const RunConfig config = apply_overrides(a.common, ck.config);
  require_compatible(ck.config, config);
  const CloudFormat format = cloud_format_from_path(a.input);
  const PointCloud noisy = load_cloud(a.input, format);
  const PointCloud out = denoise_cloud(noisy, ck.model, config.iterations, config.patch_size, config.normalize,
                                       a.common.threads);
  save_cloud(a.output, out, format);
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string pred, gt, mesh, json;
};

int run_eval(const EvalArgs& a) {
  const PointCloud pred = load_cloud(a.pred);
  const PointCloud gt = load_cloud(a.gt);
  nlohmann::ordered_json report;
  auto emit = [&](const std::string& name, double v) {
    std::cout << name << '\t' << format_double(v) << '\n';
    std::cout << name << "_x1e5\t" << format_double(v * kMetricReportScale) << '\n';
    report[name] = v;
    report[name + "_x1e5"] = v * kMetricReportScale;
  };
  emit("cd", chamfer_distance(pred, gt));
  if (!a.mesh.empty()) {
    const PointToMesh m = point_to_mesh(pred, load_mesh(a.mesh));
    emit("p2f", m.p2f);
    emit("f2p", m.f2p);
    emit("p2m", m.total());
  }
  if (!a.json.empty()) {
    std::ofstream out = open_output(a.json);
    out << report.dump(2) << '\n';
    if (!out) fail(ErrorCode::io, "write to '" + a.json + "' failed");
  }
  return 0;
}

// ---- synth-noise ----

struct NoiseArgs {
  std::string input, output;
  double sigma = RunConfig{}.noise_sigma;
  std::string reference = RunConfig{}.noise_reference;
  std::optional<std::uint64_t> seed;
};

int run_synth_noise(const NoiseArgs& a) {
  RunConfig c;
  c.noise_reference = a.reference;
  c.noise_sigma = a.sigma;
  CommonOptions o;
  o.seed = a.seed;
  c.seed = resolve_config(o).seed;
  c.validate();
  const CloudFormat format = cloud_format_from_path(a.input);
  const PointCloud clean = load_cloud(a.input, format);
  save_cloud(a.output, add_gaussian_noise(clean, {c.noise_sigma, c.reference(), c.seed}),
             cloud_format_from_path(a.output));
  return 0;
}

// ---- render-debug ----

struct RenderArgs {
  CommonOptions common;
  std::string input, out_dir = "views";
};

int run_render_debug(const RenderArgs& a) {
  const RunConfig config = resolve_config(a.common);
  PointCloud cloud = load_cloud(a.input);
  if (config.normalize) cloud = normalize_to_unit(cloud).first;
  const auto views = render_views(cloud, config.render(), a.common.threads);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < views.size(); ++i) {
    write_pgm(fs::path(a.out_dir) / ("view_" + std::to_string(i) + ".pgm"), views[i].image);
  }
  std::cout << "views\t" << views.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative point-cloud filtering with selective state-space denoisers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mambapf checkpoint format " + std::to_string(kCheckpointVersion));

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model on clean clouds");
  add_common(*train_cmd, train_args.common);
  train_cmd->add_option("inputs", train_args.inputs, "clean training clouds (.xyz/.ply)")->required();
  train_cmd->add_option("-o,--checkpoint", train_args.checkpoint, "checkpoint to write");
  train_cmd->add_option("--loss-log", train_args.loss_log, "CSV loss log to write");
  train_cmd->add_flag("-q,--quiet", train_args.quiet, "no progress output");
  train_cmd->add_flag("--low-memory", train_args.low_memory, "recompute each patch forward pass for backward");

  DenoiseArgs denoise_args;
  auto* denoise_cmd = app.add_subcommand("denoise", "filter a noisy cloud with a trained checkpoint");
  add_common(*denoise_cmd, denoise_args.common);
  denoise_cmd->add_option("-c,--checkpoint", denoise_args.checkpoint)->required();
  denoise_cmd->add_option("input", denoise_args.input)->required();
  denoise_cmd->add_option("-o,--output", denoise_args.output)->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Chamfer and point-to-mesh metrics");
  eval_cmd->add_option("pred", eval_args.pred)->required();
  eval_cmd->add_option("gt", eval_args.gt)->required();
  eval_cmd->add_option("--mesh", eval_args.mesh, "ground-truth mesh (.obj/.off)");
  eval_cmd->add_option("--json", eval_args.json, "also write the report as JSON");

  NoiseArgs noise_args;
  auto* noise_cmd = app.add_subcommand("synth-noise", "add isotropic Gaussian noise");
  noise_cmd->add_option("input", noise_args.input)->required();
  noise_cmd->add_option("-o,--output", noise_args.output)->required();
  noise_cmd->add_option("--sigma", noise_args.sigma, "standard deviation as a fraction of the reference length");
  noise_cmd->add_option("--reference", noise_args.reference)
      ->check(CLI::IsMember({"bbox_diagonal", "bounding_sphere_radius"}));
  noise_cmd->add_option("--seed", noise_args.seed);

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render-debug", "write the rendered views as PGM images");
  add_common(*render_cmd, render_args.common);
  render_cmd->add_option("input", render_args.input)->required();
  render_cmd->add_option("-o,--out-dir", render_args.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[E_USAGE]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*denoise_cmd) return run_denoise(denoise_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*noise_cmd) return run_synth_noise(noise_args);
    if (*render_cmd) return run_render_debug(render_args);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[E_INTERNAL]: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
