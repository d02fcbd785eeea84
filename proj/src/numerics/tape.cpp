// Copyright 2026 The zvq Authors. All Rights Reserved.
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

#include "zvq/numerics/tape.hpp"

#include <algorithm>
#include <utility>

#include "zvq/error.hpp"

namespace zvq {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::make_unique<Tensor>(std::move(value));
  node.value = node.owned.get();
  node.leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::parameter(Tensor& param) {
  Node node;
  node.value = &param;
  node.leaf = true;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor output, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.owned = std::make_unique<Tensor>(std::move(output));
  node.value = node.owned.get();
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) {
    if (!backward) throw UsageError("operation on differentiable inputs recorded without a backward");
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw UsageError("backward: loss was not recorded on this tape");
  check_owned(loss);
  if (nodes_[loss.id()].value->numel() != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " + to_string(nodes_[loss.id()].value->shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return;

  std::vector<std::vector<float>> grads(loss.id() + 1);
  grads[loss.id()].assign(1, 1.0f);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (grads[i].empty() || !node.requires_grad) continue;
    if (node.leaf) {
      auto dst = node.value->grad();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += grads[i][j];
      continue;
    }
    GradSlots slots;
    for (std::size_t in : node.inputs) {
      if (!nodes_[in].requires_grad) {
        slots.slots_.emplace_back();
        continue;
      }
      if (grads[in].empty()) grads[in].assign(nodes_[in].value->numel(), 0.0f);
      slots.slots_.emplace_back(grads[in]);
    }
    node.backward(grads[i], slots);
    // Free as we go; each node is visited exactly once.
    std::vector<float>().swap(grads[i]);
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return *nodes_[v.id()].value;
}

std::span<const float> Tape::grad(Var v) const {
  check_owned(v);
  return std::as_const(*nodes_[v.id()].value).grad();
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw UsageError("Var does not belong to this tape");
}

}  // namespace zvq
