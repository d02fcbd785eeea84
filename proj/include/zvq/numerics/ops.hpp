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
#include <span>
#include <vector>

#include "zvq/numerics/tape.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its inputs; all inputs of a call must live on the same tape.
namespace zvq::ops {

/// Cross-correlation over time. input [B,Cin,T], weight [Cout,Cin,k],
/// bias [Cout]; output length floor((T + 2*padding - k)/stride) + 1.
Var conv1d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding);

/// Output length of conv1d, or throws if the window does not fit.
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);

/// Upsampling by `stride`. weight [Cin,Cout,k] with k >= stride; the full
/// scatter-add result of length (T-1)*stride + k is cropped symmetrically
/// (extra element on the right) to exactly T*stride.
Var transposed_conv1d(Var input, Var weight, Var bias, std::size_t stride);

/// Wraps `pad` frames from each end around the other: [B,C,T] -> [B,C,T+2*pad].
Var circular_pad(Var input, std::size_t pad);

Var relu(Var input);
Var exp(Var input);

/// input [B,Din], weight [Dout,Din], bias [Dout] -> [B,Dout].
Var linear(Var input, Var weight, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float factor);

/// Scalar reductions (accumulated in double).
Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);
/// mean((a - b)^2) over all elements.
Var mse(Var a, Var b);

/// Identity forward, no gradient backward.
Var stop_gradient(Var a);

/// out[b,c,t] = scale[b,c] * input[b,c,t] + shift[b,c].
Var channel_affine(Var input, Var scale, Var shift);

/// Average over the time axis: [B,C,T] -> [B,C].
Var time_mean(Var input);

/// Concatenates cond [B,E] to every frame of input [B,C,T] -> [B,C+E,T].
Var broadcast_concat(Var input, Var cond);

/// Rows of table [K,D] selected by ids -> [ids.size(), D].
Var gather_rows(Var table, std::vector<std::size_t> ids);

/// [B,D,T] -> [B*T,D] with row index b*T + t.
Var to_frames(Var input);
/// Inverse of to_frames.
Var from_frames(Var rows, std::size_t batch, std::size_t length);

/// Columns [begin, begin+width) of a [F,D] matrix.
Var slice_columns(Var input, std::size_t begin, std::size_t width);
/// Concatenates [F,Di] matrices along columns.
Var concat_columns(std::span<const Var> parts);

}  // namespace zvq::ops
