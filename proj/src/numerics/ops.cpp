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

#include "zvq/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "numerics/op_checks.hpp"
#include "zvq/error.hpp"
#include "zvq/numerics/gradcheck.hpp"

namespace zvq::ops {
using detail::expect_rank;
using detail::expect_same_shape;
using detail::tape_of;

namespace {

// Output positions t for which t*stride + k - padding lands inside [0, length).
struct TimeRange {
  std::size_t begin;
  std::size_t end;
};

TimeRange valid_range(std::size_t length, std::size_t out_length, std::size_t k, std::size_t stride,
                      std::size_t padding) {
  // t*stride + k >= padding
  std::size_t begin = 0;
  if (padding > k) begin = (padding - k + stride - 1) / stride;
  // t*stride + k - padding <= length - 1
  std::size_t end = 0;
  if (length - 1 + padding >= k) end = std::min(out_length, (length - 1 + padding - k) / stride + 1);
  if (begin > end) begin = end;
  return {begin, end};
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
  if (kernel < 1 || stride < 1) throw UsageError("conv1d: kernel and stride must be >= 1");
  if (length + 2 * padding < kernel) {
    throw UsageError("conv1d: input length " + std::to_string(length) + " with padding " +
                     std::to_string(padding) + " is shorter than kernel " + std::to_string(kernel));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

// Convolutions run as one GEMM over the whole batch. Matrices are row-major;
// a column index j = b * L + t walks batch then time.
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// [B, C, L] tensor data -> [C, B*L] matrix.
void batch_to_columns(const float* src, std::size_t B, std::size_t C, std::size_t L, float* dst) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) std::copy_n(src + (b * C + c) * L, L, dst + c * B * L + b * L);
}

// [C, B*L] matrix accumulated into [B, C, L] tensor data.
void columns_to_batch_add(const float* src, std::size_t B, std::size_t C, std::size_t L, float* dst) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const float* s = src + c * B * L + b * L;
      float* d = dst + (b * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) d[t] += s[t];
    }
}

}  // namespace

Var conv1d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  Tape& tape = tape_of({input, weight, bias}, "conv1d");
  expect_rank(input, 3, "conv1d", "input");
  expect_rank(weight, 3, "conv1d", "weight");
  const auto& x = input.value();
  const auto& w = weight.value();
  const std::size_t B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
  const std::size_t Cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != Cin) {
    throw UsageError("conv1d: input " + to_string(x.shape()) + " has " + std::to_string(Cin) +
                     " channels but weight " + to_string(w.shape()) + " expects " + std::to_string(w.dim(1)));
  }
  if (bias.shape() != Shape{Cout}) {
    throw UsageError("conv1d: bias " + to_string(bias.shape()) + " does not match weight " + to_string(w.shape()));
  }
  const std::size_t To = conv1d_output_length(T, K, stride, padding);
  const std::size_t N = B * To, R = Cin * K;

  // im2col: row ci*K + k, column b*To + t holds x[b, ci, t*stride + k - padding].
  auto cols = std::make_shared<std::vector<float>>(R * N, 0.0f);
  const float* xd = x.data().data();
  for (std::size_t ci = 0; ci < Cin; ++ci)
    for (std::size_t k = 0; k < K; ++k) {
      const auto [t0, t1] = valid_range(T, To, k, stride, padding);
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
      float* row = cols->data() + (ci * K + k) * N;
      for (std::size_t b = 0; b < B; ++b) {
        const float* src = xd + (static_cast<std::ptrdiff_t>((b * Cin + ci) * T) + shift);
        float* dst = row + b * To;
        for (std::size_t t = t0; t < t1; ++t) dst[t] = src[t * stride];
      }
    }

  std::vector<float> y(Cout * N);
  MatMap(y.data(), Cout, N).noalias() = ConstMatMap(w.data().data(), Cout, R) * ConstMatMap(cols->data(), R, N);
  Tensor out({B, Cout, To});
  const float* bd = bias.value().data().data();
  float* od = out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Cout; ++co) {
      const float* src = y.data() + co * N + b * To;
      float* dst = od + (b * Cout + co) * To;
      for (std::size_t t = 0; t < To; ++t) dst[t] = src[t] + bd[co];
    }

  return tape.record(std::move(out), {input, weight, bias},
                     [=, &tape](std::span<const float> g, const GradSlots& grads) {
                       auto gx = grads[0];
                       auto gw = grads[1];
                       auto gb = grads[2];
                       std::vector<float> dy(Cout * N);
                       batch_to_columns(g.data(), B, Cout, To, dy.data());
                       const ConstMatMap dY(dy.data(), Cout, N);
                       if (!gb.empty()) {
                         for (std::size_t co = 0; co < Cout; ++co) {
                           float s = 0.0f;
                           for (std::size_t j = 0; j < N; ++j) s += dy[co * N + j];
                           gb[co] += s;
                         }
                       }
                       if (!gw.empty()) {
                         MatMap(gw.data(), Cout, R).noalias() += dY * ConstMatMap(cols->data(), R, N).transpose();
                       }
                       if (!gx.empty()) {
                         std::vector<float> dcols(R * N);
                         MatMap(dcols.data(), R, N).noalias() =
                             ConstMatMap(tape.value(weight).data().data(), Cout, R).transpose() * dY;
                         for (std::size_t ci = 0; ci < Cin; ++ci)
                           for (std::size_t k = 0; k < K; ++k) {
                             const auto [t0, t1] = valid_range(T, To, k, stride, padding);
                             const std::ptrdiff_t shift =
                                 static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                             const float* row = dcols.data() + (ci * K + k) * N;
                             for (std::size_t b = 0; b < B; ++b) {
                               float* dst = gx.data() + (static_cast<std::ptrdiff_t>((b * Cin + ci) * T) + shift);
                               const float* src = row + b * To;
                               for (std::size_t t = t0; t < t1; ++t) dst[t * stride] += src[t];
                             }
                           }
                       }
                     });
}

Var transposed_conv1d(Var input, Var weight, Var bias, std::size_t stride) {
  Tape& tape = tape_of({input, weight, bias}, "transposed_conv1d");
  expect_rank(input, 3, "transposed_conv1d", "input");
  expect_rank(weight, 3, "transposed_conv1d", "weight");
  if (stride < 1) throw UsageError("transposed_conv1d: stride must be >= 1");
  const auto& x = input.value();
  const auto& w = weight.value();
  const std::size_t B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
  const std::size_t Cout = w.dim(1), K = w.dim(2);
  if (w.dim(0) != Cin) {
    throw UsageError("transposed_conv1d: input " + to_string(x.shape()) + " has " + std::to_string(Cin) +
                     " channels but weight " + to_string(w.shape()) + " expects " + std::to_string(w.dim(0)));
  }
  if (K < stride) throw UsageError("transposed_conv1d: kernel must be at least the stride");
  if (bias.shape() != Shape{Cout}) {
    throw UsageError("transposed_conv1d: bias " + to_string(bias.shape()) + " does not match weight " +
                     to_string(w.shape()));
  }
  const std::size_t To = T * stride;
  const std::size_t crop = (K - stride) / 2;
  const std::size_t N = B * T, R = Cout * K;

  // Output position of tap k from input frame t, or To when cropped away.
  auto target = [=](std::size_t t, std::size_t k) {
    const std::size_t pos = t * stride + k;
    return (pos < crop || pos - crop >= To) ? To : pos - crop;
  };

  auto xcols = std::make_shared<std::vector<float>>(Cin * N);
  batch_to_columns(x.data().data(), B, Cin, T, xcols->data());
  // cols[co*K + k, b*T + t] = sum_ci w[ci, co, k] x[b, ci, t]
  std::vector<float> cols(R * N);
  MatMap(cols.data(), R, N).noalias() =
      ConstMatMap(w.data().data(), Cin, R).transpose() * ConstMatMap(xcols->data(), Cin, N);

  Tensor out({B, Cout, To});
  const float* bd = bias.value().data().data();
  float* od = out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Cout; ++co) {
      float* orow = od + (b * Cout + co) * To;
      std::fill_n(orow, To, bd[co]);
      for (std::size_t k = 0; k < K; ++k) {
        const float* src = cols.data() + (co * K + k) * N + b * T;
        for (std::size_t t = 0; t < T; ++t) {
          const std::size_t j = target(t, k);
          if (j < To) orow[j] += src[t];
        }
      }
    }

  return tape.record(std::move(out), {input, weight, bias},
                     [=, &tape](std::span<const float> g, const GradSlots& grads) {
                       auto gx = grads[0];
                       auto gw = grads[1];
                       auto gb = grads[2];
                       if (!gb.empty()) {
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t co = 0; co < Cout; ++co) {
                             const float* grow = g.data() + (b * Cout + co) * To;
                             float s = 0.0f;
                             for (std::size_t j = 0; j < To; ++j) s += grow[j];
                             gb[co] += s;
                           }
                       }
                       if (gx.empty() && gw.empty()) return;
                       std::vector<float> dcols(R * N, 0.0f);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t co = 0; co < Cout; ++co) {
                           const float* grow = g.data() + (b * Cout + co) * To;
                           for (std::size_t k = 0; k < K; ++k) {
                             float* dst = dcols.data() + (co * K + k) * N + b * T;
                             for (std::size_t t = 0; t < T; ++t) {
                               const std::size_t j = target(t, k);
                               if (j < To) dst[t] = grow[j];
                             }
                           }
                         }
                       const ConstMatMap dC(dcols.data(), R, N);
                       if (!gw.empty()) {
                         MatMap(gw.data(), Cin, R).noalias() += ConstMatMap(xcols->data(), Cin, N) * dC.transpose();
                       }
                       if (!gx.empty()) {
                         std::vector<float> dx(Cin * N);
                         MatMap(dx.data(), Cin, N).noalias() =
                             ConstMatMap(tape.value(weight).data().data(), Cin, R) * dC;
                         columns_to_batch_add(dx.data(), B, Cin, T, gx.data());
                       }
                     });
}

Var circular_pad(Var input, std::size_t pad) {
  Tape& tape = tape_of({input}, "circular_pad");
  expect_rank(input, 3, "circular_pad", "input");
  const auto& x = input.value();
  const std::size_t rows = x.dim(0) * x.dim(1), T = x.dim(2), To = T + 2 * pad;
  auto source = [=](std::size_t j) { return (j + T - pad % T) % T; };
  Tensor out({x.dim(0), x.dim(1), To});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < To; ++j) out[r * To + j] = x[r * T + source(j)];
  }
  return tape.record(std::move(out), {input}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < To; ++j) gx[r * T + source(j)] += g[r * To + j];
    }
  });
}

Var relu(Var input) {
  Tape& tape = tape_of({input}, "relu");
  Tensor out = input.value();
  if (auto* frozen = frozen_relu_masks()) {
    std::vector<char> mask = frozen->next(out.data());
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (!mask[i]) out[i] = 0.0f;
    return tape.record(std::move(out), {input},
                       [mask = std::move(mask)](std::span<const float> g, const GradSlots& grads) {
                         auto gx = grads[0];
                         for (std::size_t i = 0; i < g.size(); ++i)
                           if (mask[i]) gx[i] += g[i];
                       });
  }
  for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return tape.record(std::move(out), {input}, [input, &tape](std::span<const float> g, const GradSlots& grads) {
    const auto x = tape.value(input).data();
    auto gx = grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0f) gx[i] += g[i];
    }
  });
}

Var exp(Var input) {
  Tape& tape = tape_of({input}, "exp");
  Tensor out = input.value();
  for (auto& v : out.data()) v = std::exp(v);
  std::vector<float> y(out.data().begin(), out.data().end());
  return tape.record(std::move(out), {input}, [y = std::move(y)](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
  });
}

Var linear(Var input, Var weight, Var bias) {
  Tape& tape = tape_of({input, weight, bias}, "linear");
  expect_rank(input, 2, "linear", "input");
  expect_rank(weight, 2, "linear", "weight");
  const auto& x = input.value();
  const auto& w = weight.value();
  const std::size_t B = x.dim(0), Din = x.dim(1), Dout = w.dim(0);
  if (w.dim(1) != Din) {
    throw UsageError("linear: input " + to_string(x.shape()) + " does not match weight " + to_string(w.shape()));
  }
  if (bias.shape() != Shape{Dout}) {
    throw UsageError("linear: bias " + to_string(bias.shape()) + " does not match weight " + to_string(w.shape()));
  }
  Tensor out({B, Dout});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < Dout; ++o) {
      float s = bias.value()[o];
      for (std::size_t i = 0; i < Din; ++i) s += w[o * Din + i] * x[b * Din + i];
      out[b * Dout + o] = s;
    }
  }
  return tape.record(std::move(out), {input, weight, bias},
                     [=, &tape](std::span<const float> g, const GradSlots& grads) {
                       const auto x = tape.value(input).data();
                       const auto w = tape.value(weight).data();
                       auto gx = grads[0];
                       auto gw = grads[1];
                       auto gb = grads[2];
                       for (std::size_t b = 0; b < B; ++b) {
                         for (std::size_t o = 0; o < Dout; ++o) {
                           const float go = g[b * Dout + o];
                           if (!gb.empty()) gb[o] += go;
                           for (std::size_t i = 0; i < Din; ++i) {
                             if (!gx.empty()) gx[b * Din + i] += go * w[o * Din + i];
                             if (!gw.empty()) gw[o * Din + i] += go * x[b * Din + i];
                           }
                         }
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of({a, b}, "add");
  expect_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [](std::span<const float> g, const GradSlots& grads) {
    for (std::size_t s = 0; s < 2; ++s) {
      auto gs = grads[s];
      if (gs.empty()) continue;
      for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of({a, b}, "sub");
  expect_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a, b}, [](std::span<const float> g, const GradSlots& grads) {
    auto ga = grads[0];
    auto gb = grads[1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ga.empty()) ga[i] += g[i];
      if (!gb.empty()) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of({a, b}, "mul");
  expect_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b, &tape](std::span<const float> g, const GradSlots& grads) {
    const auto av = tape.value(a).data();
    const auto bv = tape.value(b).data();
    auto ga = grads[0];
    auto gb = grads[1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ga.empty()) ga[i] += g[i] * bv[i];
      if (!gb.empty()) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, float factor) {
  Tape& tape = tape_of({a}, "scale");
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return tape.record(std::move(out), {a}, [factor](std::span<const float> g, const GradSlots& grads) {
    auto ga = grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var sum(Var a) {
  Tape& tape = tape_of({a}, "sum");
  double s = 0.0;
  for (float v : a.value().data()) s += v;
  return tape.record(Tensor::scalar(static_cast<float>(s)), {a},
                     [](std::span<const float> g, const GradSlots& grads) {
                       for (auto& v : grads[0]) v += g[0];
                     });
}

Var mean(Var a) {
  Tape& tape = tape_of({a}, "mean");
  const double n = static_cast<double>(a.numel());
  double s = 0.0;
  for (float v : a.value().data()) s += v;
  return tape.record(Tensor::scalar(static_cast<float>(s / n)), {a},
                     [n](std::span<const float> g, const GradSlots& grads) {
                       const float d = static_cast<float>(g[0] / n);
                       for (auto& v : grads[0]) v += d;
                     });
}

Var sum_squares(Var a) {
  Tape& tape = tape_of({a}, "sum_squares");
  double s = 0.0;
  for (float v : a.value().data()) s += static_cast<double>(v) * v;
  return tape.record(Tensor::scalar(static_cast<float>(s)), {a},
                     [a, &tape](std::span<const float> g, const GradSlots& grads) {
                       const auto av = tape.value(a).data();
                       auto ga = grads[0];
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0f * g[0] * av[i];
                     });
}

Var mse(Var a, Var b) {
  Tape& tape = tape_of({a, b}, "mse");
  expect_same_shape(a, b, "mse");
  const auto av = a.value().data();
  const auto bv = b.value().data();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    s += d * d;
  }
  return tape.record(Tensor::scalar(static_cast<float>(s / n)), {a, b},
                     [a, b, n, &tape](std::span<const float> g, const GradSlots& grads) {
                       const auto av = tape.value(a).data();
                       const auto bv = tape.value(b).data();
                       const float c = static_cast<float>(2.0 * g[0] / n);
                       auto ga = grads[0];
                       auto gb = grads[1];
                       for (std::size_t i = 0; i < av.size(); ++i) {
                         const float d = c * (av[i] - bv[i]);
                         if (!ga.empty()) ga[i] += d;
                         if (!gb.empty()) gb[i] -= d;
                       }
                     });
}

Var stop_gradient(Var a) {
  Tape& tape = tape_of({a}, "stop_gradient");
  return tape.record(a.value(), {}, {});
}

Var channel_affine(Var input, Var scale, Var shift) {
  Tape& tape = tape_of({input, scale, shift}, "channel_affine");
  expect_rank(input, 3, "channel_affine", "input");
  const std::size_t B = input.value().dim(0), C = input.value().dim(1), T = input.value().dim(2);
  if (scale.shape() != Shape{B, C} || shift.shape() != Shape{B, C}) {
    throw UsageError("channel_affine: scale " + to_string(scale.shape()) + " and shift " +
                     to_string(shift.shape()) + " must be [B,C] for input " + to_string(input.shape()));
  }
  Tensor out = input.value();
  const auto sv = scale.value().data();
  const auto hv = shift.value().data();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    for (std::size_t t = 0; t < T; ++t) out[bc * T + t] = std::fma(sv[bc], out[bc * T + t], hv[bc]);
  }
  return tape.record(std::move(out), {input, scale, shift},
                     [=, &tape](std::span<const float> g, const GradSlots& grads) {
                       const auto xv = tape.value(input).data();
                       const auto sv = tape.value(scale).data();
                       auto gx = grads[0];
                       auto gs = grads[1];
                       auto gh = grads[2];
                       for (std::size_t bc = 0; bc < B * C; ++bc) {
                         float ss = 0.0f, sh = 0.0f;
                         for (std::size_t t = 0; t < T; ++t) {
                           const float gi = g[bc * T + t];
                           if (!gx.empty()) gx[bc * T + t] += gi * sv[bc];
                           ss += gi * xv[bc * T + t];
                           sh += gi;
                         }
                         if (!gs.empty()) gs[bc] += ss;
                         if (!gh.empty()) gh[bc] += sh;
                       }
                     });
}

Var time_mean(Var input) {
  Tape& tape = tape_of({input}, "time_mean");
  expect_rank(input, 3, "time_mean", "input");
  const std::size_t B = input.value().dim(0), C = input.value().dim(1), T = input.value().dim(2);
  Tensor out({B, C});
  const auto xv = input.value().data();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += xv[bc * T + t];
    out[bc] = static_cast<float>(s / static_cast<double>(T));
  }
  return tape.record(std::move(out), {input}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    const float inv = 1.0f / static_cast<float>(T);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      for (std::size_t t = 0; t < T; ++t) gx[bc * T + t] += g[bc] * inv;
    }
  });
}

Var broadcast_concat(Var input, Var cond) {
  Tape& tape = tape_of({input, cond}, "broadcast_concat");
  expect_rank(input, 3, "broadcast_concat", "input");
  expect_rank(cond, 2, "broadcast_concat", "condition");
  const std::size_t B = input.value().dim(0), C = input.value().dim(1), T = input.value().dim(2);
  const std::size_t E = cond.value().dim(1);
  if (cond.value().dim(0) != B) {
    throw UsageError("broadcast_concat: condition " + to_string(cond.shape()) + " does not match input " +
                     to_string(input.shape()));
  }
  Tensor out({B, C + E, T});
  const auto xv = input.value().data();
  const auto cv = cond.value().data();
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(xv.data() + b * C * T, C * T, out.data().data() + b * (C + E) * T);
    for (std::size_t e = 0; e < E; ++e) {
      std::fill_n(out.data().data() + (b * (C + E) + C + e) * T, T, cv[b * E + e]);
    }
  }
  return tape.record(std::move(out), {input, cond}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    auto gc = grads[1];
    for (std::size_t b = 0; b < B; ++b) {
      if (!gx.empty()) {
        for (std::size_t i = 0; i < C * T; ++i) gx[b * C * T + i] += g[b * (C + E) * T + i];
      }
      if (!gc.empty()) {
        for (std::size_t e = 0; e < E; ++e) {
          const float* row = g.data() + (b * (C + E) + C + e) * T;
          float s = 0.0f;
          for (std::size_t t = 0; t < T; ++t) s += row[t];
          gc[b * E + e] += s;
        }
      }
    }
  });
}

Var gather_rows(Var table, std::vector<std::size_t> ids) {
  Tape& tape = tape_of({table}, "gather_rows");
  expect_rank(table, 2, "gather_rows", "table");
  const std::size_t K = table.value().dim(0), D = table.value().dim(1);
  if (ids.empty()) throw UsageError("gather_rows: no ids");
  Tensor out({ids.size(), D});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= K) {
      throw UsageError("gather_rows: id " + std::to_string(ids[r]) + " out of range for " + std::to_string(K) +
                       " rows");
    }
    std::copy_n(table.value().data().data() + ids[r] * D, D, out.data().data() + r * D);
  }
  return tape.record(std::move(out), {table},
                     [D, ids = std::move(ids)](std::span<const float> g, const GradSlots& grads) {
                       auto gt = grads[0];
                       for (std::size_t r = 0; r < ids.size(); ++r) {
                         for (std::size_t d = 0; d < D; ++d) gt[ids[r] * D + d] += g[r * D + d];
                       }
                     });
}

Var to_frames(Var input) {
  Tape& tape = tape_of({input}, "to_frames");
  expect_rank(input, 3, "to_frames", "input");
  const std::size_t B = input.value().dim(0), D = input.value().dim(1), T = input.value().dim(2);
  Tensor out({B * T, D});
  const auto xv = input.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) out[(b * T + t) * D + d] = xv[(b * D + d) * T + t];
  return tape.record(std::move(out), {input}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t t = 0; t < T; ++t) gx[(b * D + d) * T + t] += g[(b * T + t) * D + d];
  });
}

Var from_frames(Var rows, std::size_t batch, std::size_t length) {
  Tape& tape = tape_of({rows}, "from_frames");
  expect_rank(rows, 2, "from_frames", "rows");
  const std::size_t D = rows.value().dim(1);
  if (rows.value().dim(0) != batch * length) {
    throw UsageError("from_frames: " + to_string(rows.shape()) + " is not " + std::to_string(batch) + "x" +
                     std::to_string(length) + " frames");
  }
  const std::size_t B = batch, T = length;
  Tensor out({B, D, T});
  const auto rv = rows.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) out[(b * D + d) * T + t] = rv[(b * T + t) * D + d];
  return tape.record(std::move(out), {rows}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gr = grads[0];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t t = 0; t < T; ++t) gr[(b * T + t) * D + d] += g[(b * D + d) * T + t];
  });
}

Var slice_columns(Var input, std::size_t begin, std::size_t width) {
  Tape& tape = tape_of({input}, "slice_columns");
  expect_rank(input, 2, "slice_columns", "input");
  const std::size_t F = input.value().dim(0), D = input.value().dim(1);
  if (width == 0 || begin + width > D) {
    throw UsageError("slice_columns: [" + std::to_string(begin) + "," + std::to_string(begin + width) +
                     ") outside " + std::to_string(D) + " columns");
  }
  Tensor out({F, width});
  for (std::size_t f = 0; f < F; ++f)
    std::copy_n(input.value().data().data() + f * D + begin, width, out.data().data() + f * width);
  return tape.record(std::move(out), {input}, [=](std::span<const float> g, const GradSlots& grads) {
    auto gx = grads[0];
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < width; ++c) gx[f * D + begin + c] += g[f * width + c];
  });
}

Var concat_columns(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_columns: no inputs");
  Tape* tape = parts[0].tape();
  const std::size_t F = parts[0].value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t D = 0;
  for (const Var& p : parts) {
    if (p.tape() != tape) throw UsageError("concat_columns: inputs live on different tapes");
    expect_rank(p, 2, "concat_columns", "input");
    if (p.value().dim(0) != F) throw UsageError("concat_columns: row count mismatch");
    widths.push_back(p.value().dim(1));
    D += widths.back();
  }
  Tensor out({F, D});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pv = parts[i].value().data();
    for (std::size_t f = 0; f < F; ++f) std::copy_n(pv.data() + f * widths[i], widths[i], out.data().data() + f * D + offset);
    offset += widths[i];
  }
  return tape->record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                      [F, D, widths](std::span<const float> g, const GradSlots& grads) {
                        std::size_t offset = 0;
                        for (std::size_t i = 0; i < widths.size(); ++i) {
                          auto gi = grads[i];
                          if (!gi.empty()) {
                            for (std::size_t f = 0; f < F; ++f)
                              for (std::size_t c = 0; c < widths[i]; ++c) gi[f * widths[i] + c] += g[f * D + offset + c];
                          }
                          offset += widths[i];
                        }
                      });
}

}  // namespace zvq::ops
