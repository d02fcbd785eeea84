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

#include "zvq/bottlenecks/normalization.hpp"

#include <cmath>

#include "numerics/op_checks.hpp"
#include "zvq/numerics/init.hpp"
#include "zvq/numerics/ops.hpp"

namespace zvq {
namespace {

// Group g of the normalisation covers elements (b, c, t) with
// g = c (pooled) or g = b*C + c (per instance).
struct Grouping {
  std::size_t B, C, T;
  bool per_instance;

  std::size_t groups() const { return per_instance ? B * C : C; }
  std::size_t group_size() const { return per_instance ? T : B * T; }
  std::size_t group_of(std::size_t b, std::size_t c) const { return per_instance ? b * C + c : c; }
};

Grouping grouping_of(const Tensor& m, bool per_instance) {
  if (m.rank() != 3) throw UsageError("instance_norm: input must be [B,C,T], got " + to_string(m.shape()));
  return {m.dim(0), m.dim(1), m.dim(2), per_instance};
}

void stats_double(const Tensor& m, const Grouping& g, std::vector<double>& mean, std::vector<double>& var) {
  mean.assign(g.groups(), 0.0);
  var.assign(g.groups(), 0.0);
  const auto x = m.data();
  for (std::size_t b = 0; b < g.B; ++b)
    for (std::size_t c = 0; c < g.C; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < g.T; ++t) s += x[(b * g.C + c) * g.T + t];
      mean[g.group_of(b, c)] += s;
    }
  const double n = static_cast<double>(g.group_size());
  for (auto& v : mean) v /= n;
  for (std::size_t b = 0; b < g.B; ++b)
    for (std::size_t c = 0; c < g.C; ++c) {
      const double mu = mean[g.group_of(b, c)];
      double s = 0.0;
      for (std::size_t t = 0; t < g.T; ++t) {
        const double d = x[(b * g.C + c) * g.T + t] - mu;
        s += d * d;
      }
      var[g.group_of(b, c)] += s;
    }
  for (auto& v : var) v /= n;
}

}  // namespace

ChannelStats channel_stats(const Tensor& m, bool per_instance) {
  const auto g = grouping_of(m, per_instance);
  std::vector<double> mean, var;
  stats_double(m, g, mean, var);
  ChannelStats out;
  out.mean.assign(mean.begin(), mean.end());
  out.variance.assign(var.begin(), var.end());
  return out;
}

Var instance_norm(Var m, const InConfig& cfg) {
  Tape& tape = detail::tape_of({m}, "instance_norm");
  if (!(cfg.epsilon >= 0.0f)) throw UsageError("instance_norm: epsilon must be >= 0");
  const auto g = grouping_of(m.value(), cfg.per_instance_stats);
  std::vector<double> mean, var;
  stats_double(m.value(), g, mean, var);
  // 1/sqrt(var + eps); a zero-variance group with eps = 0 maps to zeros.
  std::vector<double> rstd(g.groups());
  for (std::size_t i = 0; i < rstd.size(); ++i) {
    const double d = var[i] + cfg.epsilon;
    rstd[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Tensor out(m.shape());
  const auto x = m.value().data();
  for (std::size_t b = 0; b < g.B; ++b)
    for (std::size_t c = 0; c < g.C; ++c) {
      const std::size_t k = g.group_of(b, c);
      const double mu = mean[k];
      for (std::size_t t = 0; t < g.T; ++t) {
        const std::size_t i = (b * g.C + c) * g.T + t;
        out[i] = static_cast<float>((x[i] - mu) * rstd[k]);
      }
    }
  return tape.record(std::move(out), {m},
                     [g, m, mean = std::move(mean), rstd = std::move(rstd), &tape](std::span<const float> grad,
                                                                                   const GradSlots& slots) {
                       auto gx = slots[0];
                       const auto x = tape.value(m).data();
                       std::vector<float> y(x.size());
                       for (std::size_t b = 0; b < g.B; ++b)
                         for (std::size_t c = 0; c < g.C; ++c) {
                           const std::size_t k = g.group_of(b, c);
                           for (std::size_t t = 0; t < g.T; ++t) {
                             const std::size_t i = (b * g.C + c) * g.T + t;
                             y[i] = static_cast<float>((x[i] - mean[k]) * rstd[k]);
                           }
                         }
                       std::vector<double> sum_g(g.groups(), 0.0), sum_gy(g.groups(), 0.0);
                       for (std::size_t b = 0; b < g.B; ++b)
                         for (std::size_t c = 0; c < g.C; ++c) {
                           const std::size_t k = g.group_of(b, c);
                           for (std::size_t t = 0; t < g.T; ++t) {
                             const std::size_t i = (b * g.C + c) * g.T + t;
                             sum_g[k] += grad[i];
                             sum_gy[k] += static_cast<double>(grad[i]) * y[i];
                           }
                         }
                       const double n = static_cast<double>(g.group_size());
                       for (std::size_t b = 0; b < g.B; ++b)
                         for (std::size_t c = 0; c < g.C; ++c) {
                           const std::size_t k = g.group_of(b, c);
                           const double mg = sum_g[k] / n, mgy = sum_gy[k] / n;
                           for (std::size_t t = 0; t < g.T; ++t) {
                             const std::size_t i = (b * g.C + c) * g.T + t;
                             gx[i] += static_cast<float>(rstd[k] * (grad[i] - mg - y[i] * mgy));
                           }
                         }
                     });
}

AdainParams make_adain_params(std::size_t channels, std::size_t speaker_dim, std::mt19937_64& rng) {
  AdainParams p{Tensor({channels, speaker_dim}), Tensor({channels}), Tensor({channels, speaker_dim}),
                Tensor({channels})};
  init_uniform_fan_in(p.scale_weight, speaker_dim, rng);
  init_uniform_fan_in(p.shift_weight, speaker_dim, rng);
  return p;
}

Var adain(Var o_in, Var z_s, Var scale_weight, Var scale_bias, Var shift_weight, Var shift_bias) {
  detail::tape_of({o_in, z_s, scale_weight, scale_bias, shift_weight, shift_bias}, "adain");
  detail::expect_rank(o_in, 3, "adain", "input");
  detail::expect_rank(z_s, 2, "adain", "speaker code");
  const std::size_t C = o_in.value().dim(1);
  if (scale_weight.shape() != Shape{C, z_s.value().dim(1)} || shift_weight.shape() != scale_weight.shape())
    throw UsageError("adain: maps " + to_string(scale_weight.shape()) + "/" + to_string(shift_weight.shape()) +
                     " do not produce " + std::to_string(C) + " channels from speaker code " + to_string(z_s.shape()));
  if (z_s.value().dim(0) != o_in.value().dim(0))
    throw UsageError("adain: batch mismatch " + to_string(o_in.shape()) + " vs " + to_string(z_s.shape()));
  const Var scale = ops::exp(ops::linear(z_s, scale_weight, scale_bias));
  const Var shift = ops::linear(z_s, shift_weight, shift_bias);
  return ops::channel_affine(o_in, scale, shift);
}

Var adain(Var o_in, Var z_s, AdainParams& params) {
  Tape& tape = detail::tape_of({o_in, z_s}, "adain");
  return adain(o_in, z_s, tape.parameter(params.scale_weight), tape.parameter(params.scale_bias),
               tape.parameter(params.shift_weight), tape.parameter(params.shift_bias));
}

}  // namespace zvq
