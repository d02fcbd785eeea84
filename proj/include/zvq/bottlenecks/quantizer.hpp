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
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zvq/numerics/tape.hpp"

namespace zvq {

inline constexpr float kDefaultBeta = 0.25f;

struct Codebook {
  Tensor embeddings;  // [K, D]
  float beta = kDefaultBeta;

  std::size_t size() const { return embeddings.dim(0); }
  std::size_t dim() const { return embeddings.dim(1); }
};

struct SlicedCodebook {
  std::vector<Codebook> sub_codebooks;  // N books of [K, D/N]
  std::size_t total_dim = 0;

  std::size_t n_slices() const { return sub_codebooks.size(); }
  std::size_t size() const { return sub_codebooks.front().size(); }
  float beta() const { return sub_codebooks.front().beta; }
};

/// N sub-books of K rows each, uniform in [-1/K, 1/K].
SlicedCodebook make_sliced_codebook(std::size_t K, std::size_t D, std::size_t n_slices, float beta,
                                    std::mt19937_64& rng);

/// Replaces every row of book with a row of samples [F, D]. Rows are drawn
/// without replacement while possible; repeats get a small jitter so no two
/// codes start identical.
void init_codebook_from_samples(Codebook& book, const Tensor& samples, std::mt19937_64& rng);

/// Index of the nearest row of embeddings [K, D] for every row of z [F, D],
/// by squared Euclidean distance; ties go to the lowest index.
std::vector<std::uint32_t> nearest_codes(std::span<const float> z, std::size_t dim, const Tensor& embeddings);

struct QuantizeResult {
  Var z_q;                              // selected codebook rows, [F, D]
  Var output;                           // straight_through(z_e, z_q)
  Var vq_loss;                          // scalar
  std::vector<std::uint32_t> indices;   // [F x N], row-major
  std::size_t n_slices = 1;
};

/// mean_f ||sg(z_e) - z_q||^2; only z_q receives gradient.
Var vq_codebook_loss(Var z_e, Var z_q);
/// mean_f ||z_e - sg(z_q)||^2; only z_e receives gradient.
Var vq_commitment_loss(Var z_e, Var z_q);
/// vq_codebook_loss + beta * vq_commitment_loss for [F, D].
Var vq_loss(Var z_e, Var z_q, float beta);

/// Forward value of z_q; the incoming gradient goes to z_e unchanged.
Var straight_through(Var z_e, Var z_q);

/// Contiguous column slices of z_e [F, D]; D must be divisible by n.
std::vector<Var> slice_feature(Var z_e, std::size_t n);

/// Nearest-neighbour quantization of z_e [F, D] against embeddings [K, D].
QuantizeResult vq_quantize(Var z_e, Var embeddings, float beta);
QuantizeResult vq_quantize(Var z_e, Codebook& book);

/// Independent quantization of each slice, outputs and indices concatenated
/// and per-slice losses summed.
QuantizeResult sliced_vq_quantize(Var z_e, std::span<const Var> sub_embeddings, float beta);
QuantizeResult sliced_vq_quantize(Var z_e, SlicedCodebook& book);

/// Fraction of the N*K (slice, code) pairs that appear in indices [F x N].
double codebook_usage(std::span<const std::uint32_t> indices, std::size_t n_slices, std::size_t K);

/// Per-utterance index tuples at the latent frame rate.
struct CodeSequence {
  std::string utterance_id;
  std::size_t n_slices = 1;
  std::vector<std::uint32_t> indices;  // [frames x n_slices]

  std::size_t num_frames() const { return n_slices == 0 ? 0 : indices.size() / n_slices; }
};

/// One line: `utt i,j i,j ...`.
void write_code_line(std::ostream& out, const CodeSequence& codes);
CodeSequence parse_code_line(const std::string& line);
void write_code_file(const std::filesystem::path& path, std::span<const CodeSequence> codes);
std::vector<CodeSequence> read_code_file(const std::filesystem::path& path);

}  // namespace zvq
