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
#include <cstdint>
#include <random>

#include "zvq/numerics/tensor.hpp"

namespace zvq {

/// Uniform in [-a, a] with a = sqrt(1/fan_in).
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);
void init_uniform(Tensor& t, float bound, std::mt19937_64& rng);

/// SplitMix64 mixing, for deriving independent seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace zvq
