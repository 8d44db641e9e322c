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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "../grad_helpers.hpp"
#include "../metric_oracles.hpp"
#include "mambapf/checkpoint.hpp"
#include "mambapf/config.hpp"
#include "mambapf/denoise_net.hpp"
#include "mambapf/io.hpp"
#include "mambapf/kdtree.hpp"
#include "mambapf/losses.hpp"
#include "mambapf/mamba_block.hpp"
#include "mambapf/metrics.hpp"
#include "mambapf/patch_graph.hpp"
#include "mambapf/render.hpp"
#include "mambapf/shapes.hpp"
#include "mambapf/ssm.hpp"
#include "mambapf/train.hpp"

namespace mambapf {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

MatrixXd uniform(Index r, Index c, CounterRng& rng, double lo, double hi) {
  return testing::random_matrix(r, c, rng, lo, hi);
}

/// Random stable state matrix: diagonal, or a rotated diagonal when dense.
MatrixXd random_state_matrix(Index n, bool dense, CounterRng& rng) {
  MatrixXd A = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) A(i, i) = -rng.uniform(0.05, 2.0);
  if (!dense) return A;
  const MatrixXd Q = uniform(n, n, rng, -1, 1).householderQr().householderQ();
  return Q * A * Q.transpose();
}

// ---- 1 ----

Outcome scan_equivalence() {
  Outcome o;
  CounterRng rng(101);
  const auto t0 = Clock::now();
  double conv_dev = 0.0, assoc_dev = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 8);
    const Index len = 1 + static_cast<Index>(rng.next_u64() % 64);

    ssm::SsmParams<double> p;
    p.A = random_state_matrix(n, draw % 2 == 1, rng);
    p.B = uniform(n, 1, rng, -1, 1);
    p.C = uniform(1, n, rng, -1, 1);
    p.delta = VectorXd::Constant(1, rng.uniform(0.01, 0.5));
    const VectorXd x = uniform(len, 1, rng, -1, 1);
    conv_dev = std::max(conv_dev, (ssm::scan_convolutional(p, x) - ssm::scan_recurrent(p, x)).cwiseAbs().maxCoeff());

    const Index ch = 1 + static_cast<Index>(rng.next_u64() % 8);
    const MatrixXd u = uniform(len, ch, rng, -1, 1);
    const MatrixXd delta = uniform(len, ch, rng, 0.001, 1.0);
    const MatrixXd A = -uniform(ch, n, rng, 0.05, 4.0);
    const MatrixXd B = uniform(len, n, rng, -1, 1);
    const MatrixXd C = uniform(len, n, rng, -1, 1);
    const MatrixXd seq = ssm::selective_scan_sequential<double>(u, delta, A, B, C);
    const MatrixXd par = ssm::selective_scan_associative<double>(u, delta, A, B, C);
    assoc_dev = std::max(assoc_dev, (seq - par).cwiseAbs().maxCoeff());
  }
  o.detail << "200 draws, max |conv - recurrent| = " << sci(conv_dev) << ", max |associative - sequential| = "
           << sci(assoc_dev);
  const double secs = seconds_since(t0);
  o.detail << ", " << sci(secs) << " s";
  o.require(conv_dev <= 1e-10, "convolutional vs recurrent > 1e-10");
  o.require(assoc_dev <= 1e-10, "associative vs sequential > 1e-10");
  o.require(secs < 10.0, "runtime >= 10 s");
  return o;
}

// ---- 2 ----

Outcome discretization_limits() {
  Outcome o;
  CounterRng rng(202);
  double a_dev = 0.0, b_dev = 0.0, semigroup = 0.0;
  const double small = 1e-9;
  for (int draw = 0; draw < 100; ++draw) {
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 8);
    const MatrixXd A = random_state_matrix(n, draw % 2 == 1, rng);
    const MatrixXd B = uniform(n, 1, rng, -1, 1);
    const auto tiny = ssm::discretize<double>(A, B, small);
    a_dev = std::max(a_dev, (tiny.A_bar - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
    b_dev = std::max(b_dev, (tiny.B_bar - small * B).cwiseAbs().maxCoeff());
    const double delta = rng.uniform(0.01, 1.0);
    const auto one = ssm::discretize<double>(A, B, delta);
    const auto two = ssm::discretize<double>(A, B, 2.0 * delta);
    semigroup = std::max(semigroup, (one.A_bar * one.A_bar - two.A_bar).cwiseAbs().maxCoeff());
  }
  o.detail << "delta=1e-9: max |A_bar - I| = " << sci(a_dev) << ", max |B_bar - delta B| = " << sci(b_dev)
           << "; max |A_bar(d)^2 - A_bar(2d)| = " << sci(semigroup);
  o.require(a_dev <= 1e-8, "|A_bar - I| > 1e-8");
  o.require(b_dev <= 1e-8, "|B_bar - delta B| > 1e-8");
  o.require(semigroup <= 1e-12, "semigroup > 1e-12");
  return o;
}

// ---- 3 ----

struct GradCase {
  std::string name;
  double worst = 0.0;
  Index checked = 0;

  void add(const GradCheckResult& r) {
    worst = std::max(worst, r.max_relative_error);
    checked += r.analytic.size();
  }
};

GradCase render_case() {
  RenderConfig cfg;
  cfg.views = 6;
  cfg.image_size = 32;
  cfg.depth_bins = 16;
  CounterRng rng(301);
  PointCloud pred(64, 3);
  for (Index i = 0; i < 64; ++i) {
    Vec3 v;
    do v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)); while (v.norm() > 1.0);
    pred.row(i) = 0.6 * v.transpose();
  }
  // The target holds every prediction point twice, so each target pixel
  // exceeds the prediction and no absolute difference changes sign within the
  // stencil.
  PointCloud target(128, 3);
  target << pred, pred;
  const auto views = render_views(target, cfg);
  auto f = [&](const VectorXd& x, VectorXd* g) {
    const PointCloud p = Eigen::Map<const PointCloud>(x.data(), 64, 3);
    PointCloud grad;
    const double l = render_loss(p, views, cfg, g ? &grad : nullptr);
    if (g) *g = Eigen::Map<const VectorXd>(grad.data(), grad.size());
    return l;
  };
  GradCase c{"render_loss"};
  c.add(finite_diff_check(f, Eigen::Map<const VectorXd>(pred.data(), pred.size()), 1e-4));
  return c;
}

GradCase recon_case() {
  CounterRng rng(302);
  MatrixXd p = testing::random_cloud(24, rng);
  const PointCloud gt = testing::random_cloud(40, rng);
  VectorXd w(24);
  for (Index i = 0; i < 24; ++i) w(i) = rng.uniform(0.1, 1.0);
  w /= w.sum();
  const KdTree tree(gt);
  GradCase c{"recon_loss"};
  c.add(testing::check_tensor_grad(p, [&](ad::Tape& t) { return recon_loss(t.parameter(p), tree, w); }));
  return c;
}

GradCase mamba_case() {
  CounterRng rng(303);
  MambaConfig mc;
  mc.model_dim = 4;
  mc.state_dim = 3;
  mc.expand = 2;
  mc.conv_width = 3;
  MambaBlockParams p = init_mamba_block(mc, rng);
  p.out_weight = uniform(p.out_weight.rows(), p.out_weight.cols(), rng, -1, 1);
  MatrixXd x = uniform(10, 4, rng, -1, 1);
  const MatrixXd w = uniform(10, 4, rng, -1, 1);
  auto build = [&](ad::Tape& t) { return testing::probe(mamba_block(t.parameter(x), p), w); };
  GradCase c{"mamba_block"};
  c.add(testing::check_tensor_grad(x, build));
  p.visit("", [&](const std::string&, ad::Tensor& tensor) { c.add(testing::check_tensor_grad(tensor, build)); });
  return c;
}

GradCase edgeconv_case() {
  CounterRng rng(304);
  EdgeConvParams p{uniform(3, 5, rng, -1, 1), uniform(1, 5, rng, -1, 1), uniform(6, 5, rng, -1, 1),
                   uniform(1, 5, rng, -1, 1)};
  MatrixXd h = uniform(12, 3, rng, -1, 1);
  const DirectedGraph g = build_knn_graph(h, 4);
  const MatrixXd w = uniform(12, 5, rng, -1, 1);
  auto build = [&](ad::Tape& t) { return testing::probe(edgeconv_layer(g, t.parameter(h), p), w); };
  GradCase c{"edgeconv_layer"};
  for (MatrixXd* m : {&h, &p.f_weight, &p.f_bias, &p.g_weight, &p.g_bias}) c.add(testing::check_tensor_grad(*m, build));
  return c;
}

GradCase patch_loss_case() {
  RunConfig c;
  c.modules = 1;
  c.iterations = 2;
  c.mamba_layers = 1;
  c.width = 4;
  c.state_dim = 2;
  c.expand = 1;
  c.conv_width = 2;
  c.k_graph = 3;
  c.max_step = 0.05;
  c.patch_size = 30;
  c.views = 3;
  c.image_size = 16;
  c.depth_bins = 8;
  c.sigma_start = 0.01;
  c.seed = 5;
  const TrainingExample ex = make_example(sample_sphere_box_union(30, 13), c, 14);
  DenoiseModel model = init_model(c.net(), c.modules, 15);
  model.modules[0].head_weight *= 10.0;  // lift the displacement out of the near-zero regime
  std::vector<PointCloud> gts;
  for (int t = 1; t <= c.iterations; ++t) gts.push_back(adaptive_gt(ex.clean, t, c.schedule(), adaptive_gt_seed(c, 1)));
  auto build = [&](ad::Tape& t) { return patch_loss(t, ex.patches[0], ex.weights[0], model, gts, c); };
  GradCase gc{"patch_loss(T=2,M=1)"};
  model.visit([&](const std::string&, ad::Tensor& tensor) { gc.add(testing::check_tensor_grad(tensor, build)); });
  return gc;
}

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<std::function<GradCase()>> cases{render_case, recon_case, mamba_case, edgeconv_case,
                                                     patch_loss_case};
  for (const auto& make : cases) {
    const GradCase c = make();
    o.detail << c.name << " " << sci(c.worst) << " (" << c.checked << " entries); ";
    o.require(c.worst <= 1e-3, c.name + " relative error > 1e-3");
  }
  const double secs = seconds_since(t0);
  o.detail << "eps=1e-4, " << sci(secs) << " s";
  o.require(secs < 120.0, "runtime >= 2 min");
  return o;
}

// ---- 4 ----

Outcome metric_oracles() {
  Outcome o;
  CounterRng rng(401);
  double cd_rel = 0.0, p2m_rel = 0.0;
  bool self_zero = true;
  auto rel = [](double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); };
  for (int f = 0; f < 50; ++f) {
    const Index np = 1 + static_cast<Index>(rng.next_u64() % 30);
    const Index nq = 1 + static_cast<Index>(rng.next_u64() % 30);
    const PointCloud P = testing::random_cloud(np, rng);
    const PointCloud Q = testing::random_cloud(nq, rng);
    cd_rel = std::max(cd_rel, rel(chamfer_distance(P, Q), testing::chamfer_oracle(P, Q)));
    self_zero = self_zero && chamfer_distance(P, P) == 0.0;
    const Index faces = 1 + static_cast<Index>(rng.next_u64() % 12);
    const TriangleMesh mesh = testing::random_mesh(3 + static_cast<Index>(rng.next_u64() % 6), faces, rng);
    const auto [p2f, f2p] = testing::point_to_mesh_oracle(P, mesh);
    const PointToMesh m = point_to_mesh(P, mesh);
    p2m_rel = std::max({p2m_rel, rel(m.p2f, p2f), rel(m.f2p, f2p), rel(m.total(), p2f + f2p)});
  }
  o.detail << "50 fixtures, CD max rel " << sci(cd_rel) << ", P2M max rel " << sci(p2m_rel)
           << ", CD(P,P) == 0: " << (self_zero ? "yes" : "no");
  o.require(cd_rel <= 1e-9, "CD relative error > 1e-9");
  o.require(p2m_rel <= 1e-9, "P2M relative error > 1e-9");
  o.require(self_zero, "CD(P,P) != 0");
  return o;
}

// ---- 5 ----

Outcome stitching() {
  Outcome o;
  std::vector<Patch> patches;
  double sum_dev = 0.0, formula_dev = 0.0, identity_dev = 0.0;
  for (std::uint64_t seed = 1; patches.size() < 100; ++seed) {
    const PointCloud cloud = sample_sphere_box_union(600, seed);
    const std::vector<Patch> cover = extract_patches(cloud, 64);
    std::vector<PointCloud> copies;
    std::vector<StitchWeights> weights;
    for (const Patch& p : cover) {
      copies.push_back(p.points);
      weights.push_back(stitch_weights(p));
    }
    const PointCloud back = stitch_patches(cover, copies, cloud.rows(), weights);
    identity_dev = std::max(identity_dev, (back - cloud).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < cover.size() && patches.size() < 100; ++i) patches.push_back(cover[i]);
  }
  for (const Patch& p : patches) {
    const VectorXd w = stitch_weights(p).weights;
    sum_dev = std::max(sum_dev, std::abs(w.sum() - 1.0));
    // Independent evaluation in extended precision; the support radius is a
    // third of the farthest point's distance from the reference.
    long double radius = 0.0L;
    std::vector<long double> d2(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) {
      long double s = 0.0L;
      for (int k = 0; k < 3; ++k) {
        const long double d = static_cast<long double>(p.points(i, k)) - p.reference_point(k);
        s += d * d;
      }
      d2[static_cast<std::size_t>(i)] = s;
      radius = std::max(radius, std::sqrt(s));
    }
    const long double sr = radius / 3.0L;
    long double z = 0.0L;
    for (long double& v : d2) z += (v = std::exp(-v / (2.0L * sr * sr)));
    for (Index i = 0; i < p.size(); ++i) {
      formula_dev = std::max(formula_dev, static_cast<double>(std::abs(w(i) - d2[static_cast<std::size_t>(i)] / z)));
    }
  }
  o.detail << patches.size() << " patches, max |sum w - 1| = " << sci(sum_dev) << ", identity stitch max dev "
           << sci(identity_dev) << ", formula max dev " << sci(formula_dev);
  o.require(sum_dev <= 1e-9, "weights do not sum to 1");
  o.require(identity_dev <= 1e-12, "identity stitch deviates");
  o.require(formula_dev <= 1e-12, "weights differ from the direct formula");
  return o;
}

// ---- 6 ----

Outcome schedule_endpoints() {
  Outcome o;
  RunConfig c;
  c.iterations = 4;
  const IterationSchedule s = c.schedule();
  o.detail << "sigma(1..4) =";
  for (int t = 1; t <= 4; ++t) o.detail << " " << format_double(s.sigma(t));
  o.require(s.sigma(1) == c.sigma_start, "sigma(1) != sigma_start");
  o.require(s.sigma(4) == 0.0, "sigma(T) != 0");
  for (int t = 1; t < 4; ++t) o.require(s.sigma(t) > s.sigma(t + 1), "not strictly decreasing at t=" + std::to_string(t));
  return o;
}

// ---- 7 ----

Outcome residual_identity() {
  Outcome o;
  RunConfig c;
  c.modules = 4;
  c.iterations = 4;
  c.width = 16;
  c.mamba_layers = 2;
  c.patch_size = 512;
  c.k_graph = 8;
  DenoiseModel model = init_model(c.net(), c.modules, 701);
  zero_decoders(model);
  const PointCloud clean = sample_sphere_box_union(4096, 702);
  const PointCloud noisy = add_gaussian_noise(clean, {c.noise_sigma, c.reference(), 703});
  const auto t0 = Clock::now();
  const PointCloud out = iterative_filter(noisy, model, c.iterations, c.patch_size);
  const PointCloud out_normalized = denoise_cloud(noisy, model, c.iterations, c.patch_size, true);
  const Index differing = ((out.array() != noisy.array()).rowwise().any()).count();
  const Index differing_n = ((out_normalized.array() != noisy.array()).rowwise().any()).count();
  o.detail << "M=4, T=4, 4096 points: " << differing << " rows differ (raw frame), " << differing_n
           << " (normalized frame), " << sci(seconds_since(t0)) << " s";
  o.require(differing == 0 && differing_n == 0, "output is not bitwise equal to the input");
  return o;
}

// ---- 8 and 9 ----

/// The small configuration trained end to end. Width, layers, views, image
/// size, step count and learning rate are fixed by the criterion; the rest
/// keeps a single-threaded run well inside the runtime target.
RunConfig toy_config(double alpha) {
  RunConfig c;
  c.modules = 2;
  c.iterations = 2;
  c.mamba_layers = 2;
  c.width = 16;
  c.views = 8;
  c.image_size = 32;
  c.epochs = 300;
  c.lr = 1e-3;
  c.alpha = alpha;
  c.patch_size = 512;
  c.k_graph = 8;
  c.state_dim = 4;
  c.expand = 1;
  c.depth_bins = 16;
  c.seed = 2024;
  return c;
}

/// CD ratio reached by removing, for every point, the noise component along
/// the clean sample's PCA normal. Tangential noise is left in place, so this
/// is a practical floor for any filter on the same cloud.
double normal_projection_ratio(const PointCloud& noisy, const PointCloud& clean) {
  const KdTree tree(clean);
  PointCloud out = noisy;
  for (Index i = 0; i < clean.rows(); ++i) {
    const auto nbrs = tree.knn(clean.row(i).transpose(), 12);
    MatrixXd P(static_cast<Index>(nbrs.size()), 3);
    for (std::size_t j = 0; j < nbrs.size(); ++j) P.row(static_cast<Index>(j)) = clean.row(nbrs[j].index);
    const MatrixXd centered = P.rowwise() - P.colwise().mean();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(centered.transpose() * centered);
    const Vec3 normal = eig.eigenvectors().col(0);
    const Vec3 d = (noisy.row(i) - clean.row(i)).transpose();
    out.row(i) -= d.dot(normal) * normal.transpose();
  }
  return chamfer_distance(out, clean) / chamfer_distance(noisy, clean);
}

struct ToyRun {
  std::string checkpoint;
  PointCloud denoised;
  double cd = 0.0;
  double cd_noisy = 0.0;
  double heldout_ratio = 0.0;
  double floor_ratio = 0.0;
  double seconds = 0.0;
};

ToyRun toy_run(double alpha) {
  const RunConfig c = toy_config(alpha);
  const PointCloud clean = sample_sphere_box_union(2048, 801);
  ToyRun r;
  const auto t0 = Clock::now();
  const TrainResult trained = train(c, {clean}, TrainOptions{});
  r.seconds = seconds_since(t0);
  std::ostringstream ck;
  write_checkpoint(ck, c, trained.model);
  r.checkpoint = ck.str();

  // The noisy cloud the model was trained on, in the input frame.
  const PointCloud noisy = add_gaussian_noise(clean, {c.noise_sigma, c.reference(), noise_seed(c, 0)});
  r.denoised = denoise_cloud(noisy, trained.model, c.iterations, c.patch_size, c.normalize);
  r.cd = chamfer_distance(r.denoised, clean);
  r.cd_noisy = chamfer_distance(noisy, clean);
  r.floor_ratio = normal_projection_ratio(noisy, clean);

  const PointCloud fresh = add_gaussian_noise(clean, {c.noise_sigma, c.reference(), 802});
  r.heldout_ratio = chamfer_distance(denoise_cloud(fresh, trained.model, c.iterations, c.patch_size, c.normalize),
                                     clean) /
                    chamfer_distance(fresh, clean);
  return r;
}

void print(int id, const Outcome& o) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail.str() << std::endl;
}

}  // namespace
}  // namespace mambapf

// Optional arguments select criteria by number; the default runs all.
int main(int argc, char** argv) {
  using namespace mambapf;
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  bool all = true;
  auto run = [&](int id, const std::function<Outcome()>& check) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
    try {
      const Outcome o = check();
      all = all && o.pass;
      print(id, o);
    } catch (const std::exception& e) {
      all = false;
      std::cout << "criterion " << id << ": FAIL  exception: " << e.what() << std::endl;
    }
  };
  run(1, scan_equivalence);
  run(2, discretization_limits);
  run(3, gradient_suite);
  run(4, metric_oracles);
  run(5, stitching);
  run(6, schedule_endpoints);
  run(7, residual_identity);

  ToyRun with_render, without_render, repeat;
  bool trained = false;
  run(8, [&] {
    with_render = toy_run(0.01);
    without_render = toy_run(0.0);
    trained = true;
    Outcome o;
    o.detail << "CD noisy " << sci(with_render.cd_noisy) << ", normal-projection floor ratio "
             << sci(with_render.floor_ratio) << "; alpha=0.01: CD " << sci(with_render.cd) << " (ratio "
             << sci(with_render.cd / with_render.cd_noisy) << ", held-out noise ratio "
             << sci(with_render.heldout_ratio) << ", " << sci(with_render.seconds) << " s); alpha=0: CD "
             << sci(without_render.cd) << " (ratio " << sci(without_render.cd / without_render.cd_noisy) << ", "
             << sci(without_render.seconds) << " s)";
    o.require(with_render.cd <= 0.6 * with_render.cd_noisy, "alpha=0.01 CD > 0.6 CD(noisy)");
    o.require(with_render.cd <= 1.05 * without_render.cd, "alpha=0.01 CD > 1.05 alpha=0 CD");
    o.require(with_render.seconds < 900.0, "training run >= 15 min");
    return o;
  });
  run(9, [&] {
    if (!trained) with_render = toy_run(0.01);
    repeat = toy_run(0.01);
    Outcome o;
    const bool same_ckpt = with_render.checkpoint == repeat.checkpoint;
    const bool same_out = with_render.denoised.rows() == repeat.denoised.rows() &&
                          (with_render.denoised.array() == repeat.denoised.array()).all();
    o.detail << "checkpoints " << (same_ckpt ? "identical" : "differ") << " (" << with_render.checkpoint.size()
             << " bytes), outputs " << (same_out ? "identical" : "differ");
    o.require(same_ckpt, "checkpoint bytes differ");
    o.require(same_out, "output clouds differ");
    return o;
  });
  return all ? 0 : 1;
}
