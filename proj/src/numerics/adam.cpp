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

#include "zvq/numerics/adam.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "zvq/error.hpp"

namespace zvq {

void adam_init(AdamState& state, std::span<Tensor* const> params) {
  state.step_count = 0;
  state.first_moment.clear();
  state.second_moment.clear();
  for (const Tensor* p : params) {
    state.first_moment.emplace_back(p->numel(), 0.0f);
    state.second_moment.emplace_back(p->numel(), 0.0f);
  }
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw UsageError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->has_grad()) throw UsageError("adam_step: parameter " + std::to_string(p) + " has no gradient");
    if (state.first_moment[p].size() != params[p]->numel() || state.second_moment[p].size() != params[p]->numel()) {
      throw UsageError("adam_step: moment size mismatch for parameter " + std::to_string(p));
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  const float b1 = state.beta1, b2 = state.beta2;

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto data = params[p]->data();
    const auto grad = std::as_const(*params[p]).grad();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float g = grad[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const float m_hat = m[i] / correction1;
      const float v_hat = v[i] / correction2;
      data[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace zvq
