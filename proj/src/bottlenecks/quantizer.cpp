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

#include "zvq/bottlenecks/quantizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "numerics/op_checks.hpp"
#include "zvq/error.hpp"
#include "zvq/numerics/init.hpp"
#include "zvq/numerics/ops.hpp"

namespace zvq {

SlicedCodebook make_sliced_codebook(std::size_t K, std::size_t D, std::size_t n_slices, float beta,
                                    std::mt19937_64& rng) {
  if (K == 0 || D == 0 || n_slices == 0) throw UsageError("codebook: K, D and N must be positive");
  if (D % n_slices != 0)
    throw UsageError("codebook: latent dim " + std::to_string(D) + " is not divisible by " +
                     std::to_string(n_slices) + " slices");
  if (!(beta >= 0.0f)) throw UsageError("codebook: beta must be >= 0");
  SlicedCodebook book;
  book.total_dim = D;
  for (std::size_t n = 0; n < n_slices; ++n) {
    Codebook sub{Tensor({K, D / n_slices}), beta};
    init_uniform(sub.embeddings, 1.0f / static_cast<float>(K), rng);
    book.sub_codebooks.push_back(std::move(sub));
  }
  return book;
}

void init_codebook_from_samples(Codebook& book, const Tensor& samples, std::mt19937_64& rng) {
  if (samples.rank() != 2 || samples.dim(1) != book.dim())
    throw UsageError("codebook init: samples " + to_string(samples.shape()) + " do not match codebook " +
                     to_string(book.embeddings.shape()));
  const std::size_t F = samples.dim(0), K = book.size(), D = book.dim();
  std::vector<std::size_t> order(F);
  std::uniform_real_distribution<float> jitter(-1e-2f, 1e-2f);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t round = k / F, pos = k % F;
    if (pos == 0) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    const float* src = samples.data().data() + order[pos] * D;
    float* dst = book.embeddings.data().data() + k * D;
    for (std::size_t d = 0; d < D; ++d) dst[d] = src[d] + (round > 0 ? jitter(rng) : 0.0f);
  }
}

std::vector<std::uint32_t> nearest_codes(std::span<const float> z, std::size_t dim, const Tensor& embeddings) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != dim)
    throw UsageError("quantize: codebook " + to_string(embeddings.shape()) + " does not match latent dim " +
                     std::to_string(dim));
  if (z.size() % dim != 0) throw UsageError("quantize: latent buffer is not a whole number of frames");
  const std::size_t F = z.size() / dim, K = embeddings.dim(0);
  const auto e = embeddings.data();
  std::vector<std::uint32_t> out(F);
  for (std::size_t f = 0; f < F; ++f) {
    const float* row = z.data() + f * dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_k = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const float* m = e.data() + k * dim;
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = static_cast<double>(row[d]) - m[d];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_k = static_cast<std::uint32_t>(k);
      }
    }
    out[f] = best_k;
  }
  return out;
}

namespace {

float frame_mean_scale(Var z_e, Var z_q, const char* op) {
  detail::tape_of({z_e, z_q}, op);
  detail::expect_same_shape(z_e, z_q, op);
  detail::expect_rank(z_e, 2, op, "z_e");
  return 1.0f / static_cast<float>(z_e.value().dim(0));
}

}  // namespace

Var vq_codebook_loss(Var z_e, Var z_q) {
  const float inv_frames = frame_mean_scale(z_e, z_q, "vq_codebook_loss");
  return ops::scale(ops::sum_squares(ops::sub(ops::stop_gradient(z_e), z_q)), inv_frames);
}

Var vq_commitment_loss(Var z_e, Var z_q) {
  const float inv_frames = frame_mean_scale(z_e, z_q, "vq_commitment_loss");
  return ops::scale(ops::sum_squares(ops::sub(z_e, ops::stop_gradient(z_q))), inv_frames);
}

Var vq_loss(Var z_e, Var z_q, float beta) {
  frame_mean_scale(z_e, z_q, "vq_loss");
  return ops::add(vq_codebook_loss(z_e, z_q), ops::scale(vq_commitment_loss(z_e, z_q), beta));
}

Var straight_through(Var z_e, Var z_q) {
  Tape& tape = detail::tape_of({z_e, z_q}, "straight_through");
  detail::expect_same_shape(z_e, z_q, "straight_through");
  return tape.record(z_q.value(), {z_e}, [](std::span<const float> g, const GradSlots& slots) {
    auto gz = slots[0];
    for (std::size_t i = 0; i < g.size(); ++i) gz[i] += g[i];
  });
}

std::vector<Var> slice_feature(Var z_e, std::size_t n) {
  detail::tape_of({z_e}, "slice_feature");
  detail::expect_rank(z_e, 2, "slice_feature", "z_e");
  const std::size_t D = z_e.value().dim(1);
  if (n == 0 || D % n != 0)
    throw UsageError("slice_feature: dim " + std::to_string(D) + " is not divisible by " + std::to_string(n));
  if (n == 1) return {z_e};
  std::vector<Var> out;
  const std::size_t w = D / n;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ops::slice_columns(z_e, i * w, w));
  return out;
}

QuantizeResult vq_quantize(Var z_e, Var embeddings, float beta) {
  detail::tape_of({z_e, embeddings}, "vq_quantize");
  detail::expect_rank(z_e, 2, "vq_quantize", "z_e");
  detail::expect_rank(embeddings, 2, "vq_quantize", "codebook");
  for (float v : z_e.value().data())
    if (!std::isfinite(v)) throw NumericalError("vq_quantize: non-finite encoder output");
  QuantizeResult r;
  r.indices = nearest_codes(z_e.value().data(), z_e.value().dim(1), embeddings.value());
  r.z_q = ops::gather_rows(embeddings, {r.indices.begin(), r.indices.end()});
  r.output = straight_through(z_e, r.z_q);
  r.vq_loss = vq_loss(z_e, r.z_q, beta);
  return r;
}

QuantizeResult vq_quantize(Var z_e, Codebook& book) {
  Tape& tape = detail::tape_of({z_e}, "vq_quantize");
  return vq_quantize(z_e, tape.parameter(book.embeddings), book.beta);
}

QuantizeResult sliced_vq_quantize(Var z_e, std::span<const Var> sub_embeddings, float beta) {
  if (sub_embeddings.empty()) throw UsageError("sliced_vq_quantize: no sub-codebooks");
  const auto slices = slice_feature(z_e, sub_embeddings.size());
  if (slices.size() == 1) return vq_quantize(z_e, sub_embeddings[0], beta);

  const std::size_t N = slices.size(), F = z_e.value().dim(0);
  const std::size_t K = sub_embeddings[0].value().dim(0);
  std::vector<Var> parts;
  Var loss;
  QuantizeResult r;
  r.n_slices = N;
  r.indices.resize(F * N);
  for (std::size_t n = 0; n < N; ++n) {
    if (sub_embeddings[n].value().dim(0) != K) throw UsageError("sliced_vq_quantize: sub-codebooks differ in size");
    auto sub = vq_quantize(slices[n], sub_embeddings[n], beta);
    for (std::size_t f = 0; f < F; ++f) r.indices[f * N + n] = sub.indices[f];
    parts.push_back(sub.z_q);
    loss = n == 0 ? sub.vq_loss : ops::add(loss, sub.vq_loss);
  }
  r.z_q = ops::concat_columns(parts);
  r.output = straight_through(z_e, r.z_q);
  r.vq_loss = loss;
  return r;
}

QuantizeResult sliced_vq_quantize(Var z_e, SlicedCodebook& book) {
  Tape& tape = detail::tape_of({z_e}, "sliced_vq_quantize");
  if (z_e.value().rank() != 2 || z_e.value().dim(1) != book.total_dim)
    throw UsageError("sliced_vq_quantize: z_e " + to_string(z_e.shape()) + " does not match codebook dim " +
                     std::to_string(book.total_dim));
  std::vector<Var> subs;
  for (auto& sub : book.sub_codebooks) subs.push_back(tape.parameter(sub.embeddings));
  return sliced_vq_quantize(z_e, subs, book.beta());
}

double codebook_usage(std::span<const std::uint32_t> indices, std::size_t n_slices, std::size_t K) {
  if (n_slices == 0 || K == 0) return 0.0;
  std::vector<char> seen(n_slices * K, 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < K) seen[(i % n_slices) * K + indices[i]] = 1;
  }
  return static_cast<double>(std::count(seen.begin(), seen.end(), 1)) / static_cast<double>(seen.size());
}

void write_code_line(std::ostream& out, const CodeSequence& codes) {
  out << codes.utterance_id;
  for (std::size_t f = 0; f < codes.num_frames(); ++f) {
    out << ' ';
    for (std::size_t n = 0; n < codes.n_slices; ++n) {
      if (n) out << ',';
      out << codes.indices[f * codes.n_slices + n];
    }
  }
  out << '\n';
}

CodeSequence parse_code_line(const std::string& line) {
  std::istringstream in(line);
  CodeSequence codes;
  if (!(in >> codes.utterance_id)) throw DataError("code line is empty");
  std::string tuple;
  std::size_t width = 0;
  while (in >> tuple) {
    std::size_t n = 0;
    const char* p = tuple.data();
    const char* end = p + tuple.size();
    while (true) {
      std::uint32_t v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw DataError("bad code tuple '" + tuple + "' for " + codes.utterance_id);
      codes.indices.push_back(v);
      ++n;
      if (next == end) break;
      if (*next != ',') throw DataError("bad code tuple '" + tuple + "' for " + codes.utterance_id);
      p = next + 1;
    }
    if (width != 0 && n != width) throw DataError("inconsistent tuple width in codes for " + codes.utterance_id);
    width = n;
  }
  codes.n_slices = width == 0 ? 1 : width;
  return codes;
}

void write_code_file(const std::filesystem::path& path, std::span<const CodeSequence> codes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& c : codes) write_code_line(out, c);
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<CodeSequence> read_code_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CodeSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_code_line(line));
  }
  return out;
}

}  // namespace zvq
