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
#include <random>
#include <vector>

#include "zvq/numerics/tape.hpp"

namespace zvq {

struct InConfig {
  float epsilon = 1e-5f;
  /// false: statistics pooled over batch and time. true: per (b, c) over time.
  bool per_instance_stats = false;
};

struct ChannelStats {
  std::vector<float> mean;      // [C], or [B*C] per instance
  std::vector<float> variance;  // population variance, same layout
};

/// Channel mean and variance of m [B,C,T], accumulated in double.
ChannelStats channel_stats(const Tensor& m, bool per_instance = false);

/// (m - mean) / sqrt(var + eps) with the statistics differentiated through.
Var instance_norm(Var m, const InConfig& cfg = {});

/// Two linear maps from the speaker code to per-channel scale and shift.
/// The scale map's output goes through exp.
struct AdainParams {
  Tensor scale_weight;  // [C, D_spk]
  Tensor scale_bias;    // [C]
  Tensor shift_weight;  // [C, D_spk]
  Tensor shift_bias;    // [C]

  std::size_t channels() const { return scale_bias.numel(); }
  std::size_t speaker_dim() const { return scale_weight.dim(1); }
};

AdainParams make_adain_params(std::size_t channels, std::size_t speaker_dim, std::mt19937_64& rng);

/// exp(z_s W_s^T + b_s) * o_in + (z_s W_h^T + b_h), per batch row and channel.
Var adain(Var o_in, Var z_s, Var scale_weight, Var scale_bias, Var shift_weight, Var shift_bias);
/// Binds params as tape parameters (gradients land in params' tensors).
Var adain(Var o_in, Var z_s, AdainParams& params);

}  // namespace zvq
