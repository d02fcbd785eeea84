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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "zvq/numerics/tensor.hpp"

namespace zvq {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient buffers handed to a node's backward function, one per input.
/// Inputs that do not require gradients get an empty span.
class GradSlots {
 public:
  std::span<float> operator[](std::size_t slot) const { return slots_[slot]; }
  std::size_t size() const { return slots_.size(); }

 private:
  friend class Tape;
  std::vector<std::span<float>> slots_;
};

using BackwardFn = std::function<void(std::span<const float> out_grad, const GradSlots& in_grads)>;

/// Ordered record of executed operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so inputs always precede the nodes
/// that consume them. A tape is single-writer; build one per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradients.
  Var constant(Tensor value);
  /// Owned leaf; backward accumulates into its gradient (read via grad()).
  Var variable(Tensor value);
  /// Leaf bound to external storage; backward accumulates into param.grad().
  /// The tensor must outlive the tape and must not be resized while recorded.
  Var parameter(Tensor& param);

  /// Records an operation result. `backward` may be empty when no input
  /// requires gradients.
  Var record(Tensor output, std::vector<Var> inputs, BackwardFn backward);

  /// Propagates d(loss)/d(leaf) into every reachable leaf's gradient.
  /// Intermediate gradients are fresh on each call; leaf gradients accumulate.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient of an owned variable leaf (empty span if none yet).
  std::span<const float> grad(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::unique_ptr<Tensor> owned;
    Tensor* value = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool leaf = false;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace zvq
