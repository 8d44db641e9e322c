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

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace mambapf::ad {

using Tensor = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Seed {
  Var var;
  Tensor grad;
};

/// Define-by-run reverse-mode tape over dense matrices.
///
/// Nodes are appended in evaluation order and may only reference earlier
/// nodes, so the recorded graph is acyclic by construction and a reverse
/// sweep over ids is a valid topological order. Backward rules receive the
/// output gradient and push contributions into their parents through
/// accumulate(); accumulation order is the reverse id order, which makes the
/// gradients bitwise reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  /// With gradients disabled every node is a constant and no backward rules
  /// are stored; used for inference.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  /// Leaf bound to an external parameter tensor; repeated calls with the same
  /// tensor return the same Var.
  Var parameter(const Tensor& param);
  /// Other matrix types would bind to a temporary copy.
  template <typename T>
  Var parameter(const T&) = delete;

  /// Records an op. `backward` is skipped (and not stored) when no parent
  /// requires a gradient.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 loss node (seeded with 1).
  void backward(Var loss);
  /// Reverse sweep from arbitrary seeds (vector-Jacobian product).
  void backward(std::span<const Seed> seeds);

  /// Gradient of a node after backward; zeros if the node was not reached.
  Tensor grad(Var v) const;
  /// Gradient for a tensor bound with parameter(); zeros if it never was.
  Tensor parameter_grad(const Tensor& param) const;
  template <typename T>
  Tensor parameter_grad(const T&) const = delete;

  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Tensor value, bool requires_grad);
  void sweep(std::size_t top);

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  bool grad_enabled_ = true;
};

}  // namespace mambapf::ad
