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

#include <cstdint>
#include <span>
#include <vector>

#include "zvq/numerics/tensor.hpp"

namespace zvq {

struct AdamState {
  std::uint64_t step_count = 0;
  float learning_rate = 4e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

/// Sizes the moment buffers for `params` (zeroed) and resets the step count.
void adam_init(AdamState& state, std::span<Tensor* const> params);

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws if a parameter has no gradient or the state does not match.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace zvq
