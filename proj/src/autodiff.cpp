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

#include "mambapf/autodiff.hpp"

#include <string>

#include "mambapf/error.hpp"

namespace mambapf::ad {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, {}, requires_grad});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false); }

Var Tape::leaf(Tensor value) { return push(std::move(value), grad_enabled_); }

Var Tape::parameter(const Tensor& param) {
  if (auto it = params_.find(&param); it != params_.end()) return Var(this, it->second);
  Var v = leaf(param);
  params_.emplace(&param, v.id_);
  return v;
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) fail(ErrorCode::invalid_input, "Tape::record: parent belongs to another tape");
    if (p.id_ >= nodes_.size()) fail(ErrorCode::invalid_input, "Tape::record: parent id out of range");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  Var out = push(std::move(value), needs);
  if (needs) nodes_.back().backward = std::move(backward);
  return out;
}

void Tape::sweep(std::size_t top) {
  for (std::size_t i = top + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // Rules only accumulate into earlier nodes, so n.grad is stable here.
    n.backward(*this, n.grad);
  }
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) fail(ErrorCode::invalid_input, "Tape::backward: foreign loss node");
  const Tensor& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorCode::invalid_input, "Tape::backward: loss must be 1x1, got " + std::to_string(v.rows()) +
                                       "x" + std::to_string(v.cols()));
  }
  accumulate(loss, Tensor::Ones(1, 1));
  sweep(loss.id_);
}

void Tape::backward(std::span<const Seed> seeds) {
  std::size_t top = 0;
  bool any = false;
  for (const Seed& s : seeds) {
    if (s.var.tape_ != this) fail(ErrorCode::invalid_input, "Tape::backward: foreign seed node");
    const Tensor& v = value(s.var);
    if (v.rows() != s.grad.rows() || v.cols() != s.grad.cols()) {
      fail(ErrorCode::invalid_input, "Tape::backward: seed shape mismatch");
    }
    accumulate(s.var, s.grad);
    top = std::max(top, s.var.id_);
    any = true;
  }
  if (any) sweep(top);
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor Tape::parameter_grad(const Tensor& param) const {
  auto it = params_.find(&param);
  if (it == params_.end()) return Tensor::Zero(param.rows(), param.cols());
  return grad(Var(const_cast<Tape*>(this), it->second));
}

}  // namespace mambapf::ad
