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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "zvq/bottlenecks/quantizer.hpp"
#include "zvq/error.hpp"
#include "zvq/eval/abx.hpp"
#include "zvq/eval/bitrate.hpp"
#include "zvq/eval/probe.hpp"
#include "zvq/eval/report.hpp"

using namespace zvq;
using zvq::testing::ScratchDir;

namespace {

SymbolStream stream(std::vector<std::string> symbols, double duration) { return {std::move(symbols), duration}; }

FrameMatrix matrix(std::size_t rows, std::size_t cols, std::vector<float> data) { return {std::move(data), rows, cols}; }

FrameMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, float mean = 0.0f,
                          float sd = 1.0f) {
  std::normal_distribution<float> n(mean, sd);
  FrameMatrix m{std::vector<float>(rows * cols), rows, cols};
  for (auto& v : m.data) v = n(rng);
  return m;
}

// Lexicographically smallest (cost, length) over every monotone alignment.
double brute_dtw(const FrameMatrix& a, const FrameMatrix& b, FrameMetric metric) {
  double best_cost = INFINITY;
  std::size_t best_len = 0;
  std::function<void(std::size_t, std::size_t, double, std::size_t)> walk = [&](std::size_t i, std::size_t j,
                                                                                double cost, std::size_t len) {
    cost += frame_distance(a.row(i), b.row(j), metric, nullptr);
    ++len;
    if (i + 1 == a.rows && j + 1 == b.rows) {
      if (cost < best_cost || (cost == best_cost && len < best_len)) best_cost = cost, best_len = len;
      return;
    }
    if (i + 1 < a.rows && j + 1 < b.rows) walk(i + 1, j + 1, cost, len);
    if (i + 1 < a.rows) walk(i + 1, j, cost, len);
    if (j + 1 < b.rows) walk(i, j + 1, cost, len);
  };
  walk(0, 0, 0.0, 0);
  return best_cost / best_len;
}

std::vector<AbxItem> cluster_items(std::size_t n_cat, std::size_t n_talk, std::size_t per_cell, double spread,
                                   std::mt19937_64& rng, std::size_t dim = 8) {
  std::vector<std::vector<float>> centers(n_cat);
  for (std::size_t c = 0; c < n_cat; ++c) {
    centers[c].assign(dim, 0.0f);
    centers[c][c % dim] = 5.0f;  // orthogonal directions
  }
  std::normal_distribution<float> n(0.0f, static_cast<float>(spread));
  std::uniform_int_distribution<std::size_t> len(3, 8);
  std::vector<AbxItem> items;
  for (std::size_t c = 0; c < n_cat; ++c)
    for (std::size_t t = 0; t < n_talk; ++t)
      for (std::size_t k = 0; k < per_cell; ++k) {
        AbxItem it;
        it.category = "c" + std::to_string(c);
        it.talker = "t" + std::to_string(t);
        it.rep.rows = len(rng);
        it.rep.cols = dim;
        for (std::size_t r = 0; r < it.rep.rows; ++r)
          for (std::size_t d = 0; d < dim; ++d) it.rep.data.push_back(centers[c][d] + n(rng));
        items.push_back(std::move(it));
      }
  return items;
}

}  // namespace

TEST_CASE("bitrate examples") {
  const std::vector<SymbolStream> constant = {stream(std::vector<std::string>(100, "a"), 4.0)};
  CHECK(std::abs(bitrate(constant) - 0.0) < 1e-9);

  std::vector<std::string> two;
  for (int i = 0; i < 50; ++i) two.push_back(i % 2 ? "x" : "y");
  const std::vector<SymbolStream> half = {stream(two, 2.0)};
  CHECK(std::abs(bitrate(half) - 25.0) < 1e-9);

  std::vector<std::string> uniform;
  for (int i = 0; i < 128 * 4; ++i) uniform.push_back(std::to_string(i % 128));
  const std::vector<SymbolStream> k128 = {stream(uniform, 128 * 4 / 25.0)};
  CHECK(std::abs(bitrate(k128) - 175.0) < 1e-9);
}

TEST_CASE("bitrate pools symbols across streams") {
  // two streams each constant but different: pooled entropy is 1 bit
  const std::vector<SymbolStream> s = {stream({"a", "a", "a", "a"}, 1.0), stream({"b", "b", "b", "b"}, 1.0)};
  CHECK(bitrate(s) == doctest::Approx(4.0));
}

TEST_CASE("bitrate is invariant under relabeling") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = std::uniform_int_distribution<int>(2, 40)(rng);
    std::vector<std::string> names(K), renamed(K);
    for (int k = 0; k < K; ++k) names[k] = "s" + std::to_string(k);
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < K; ++k) renamed[k] = "r" + std::to_string(perm[k] * 7 + 1);
    std::geometric_distribution<int> g(0.2);
    std::vector<SymbolStream> a, b;
    for (int u = 0; u < 3; ++u) {
      SymbolStream sa, sb;
      const int n = std::uniform_int_distribution<int>(5, 200)(rng);
      for (int i = 0; i < n; ++i) {
        const int k = std::min(g(rng), K - 1);
        sa.symbols.push_back(names[k]);
        sb.symbols.push_back(renamed[k]);
      }
      sa.duration_s = sb.duration_s = n / 25.0;
      a.push_back(sa);
      b.push_back(sb);
    }
    CHECK(bitrate(a) == bitrate(b));
  }
}

TEST_CASE("entropy matches a direct computation") {
  const std::map<std::string, std::size_t> counts = {{"a", 1}, {"b", 2}, {"c", 5}};
  const double expected = -(1 / 8.0 * std::log2(1 / 8.0) + 2 / 8.0 * std::log2(2 / 8.0) + 5 / 8.0 * std::log2(5 / 8.0));
  CHECK(entropy_bits(counts) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(entropy_bits({}) == 0.0);
}

TEST_CASE("bitrate rejects degenerate input") {
  CHECK_THROWS_AS(bitrate({}), UsageError);
  const std::vector<SymbolStream> zero = {stream({"a"}, 0.0)};
  CHECK_THROWS_AS(bitrate(zero), DataError);
  const std::vector<SymbolStream> empty = {stream({}, 1.0)};
  CHECK_THROWS_AS(bitrate(empty), DataError);
}

TEST_CASE("symbol streams from codes and features") {
  CodeSequence codes{"u", 2, {1, 2, 1, 2, 3, 4}};
  const auto s = stream_from_codes(codes, 25.0);
  CHECK(s.symbols == std::vector<std::string>{"1,2", "1,2", "3,4"});
  CHECK(s.duration_s == doctest::Approx(0.12));

  FeatureSequence f;
  f.dim = 2;
  f.num_frames = 3;
  f.frame_rate_hz = 25.0f;
  f.frames = {0.5f, 1.0f, 0.5f, 1.0f, 0.5f, -0.0f};
  const auto fs = stream_from_features(f);
  CHECK(fs.symbols[0] == fs.symbols[1]);
  CHECK(fs.symbols[0] != fs.symbols[2]);
  CHECK(vector_symbol(std::vector<float>{0.0f}) != vector_symbol(std::vector<float>{-0.0f}));
  const std::vector<SymbolStream> v = {fs};
  CHECK(bitrate(v) == doctest::Approx(25.0 * (-(2 / 3.0) * std::log2(2 / 3.0) - (1 / 3.0) * std::log2(1 / 3.0))));
}

TEST_CASE("more slices give a higher bitrate on the same encoder output") {
  std::mt19937_64 rng(4);
  int ordered = 0;
  for (int corpus = 0; corpus < 10; ++corpus) {
    // clustered latent frames so the codebooks are not uniformly used
    const std::size_t F = 2000, D = 16, K = 128;
    Tensor z = zvq::testing::random_tensor({F, D}, rng);
    std::vector<double> rates;
    for (std::size_t N : {1u, 2u, 4u}) {
      auto book = make_sliced_codebook(K, D, N, 0.25f, rng);
      const std::size_t w = D / N;
      for (std::size_t n = 0; n < N; ++n) {
        Tensor cols({F, w});
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t d = 0; d < w; ++d) cols.data()[f * w + d] = z.data()[f * D + n * w + d];
        init_codebook_from_samples(book.sub_codebooks[n], cols, rng);
      }
      Tape tape;
      const auto q = sliced_vq_quantize(tape.constant(z), book);
      const std::vector<SymbolStream> s = {stream_from_codes(CodeSequence{"c", N, q.indices}, 25.0)};
      rates.push_back(bitrate(s));
    }
    ordered += rates[2] >= rates[1] && rates[1] >= rates[0];
  }
  CHECK(ordered >= 9);
}

TEST_CASE("dtw examples") {
  std::mt19937_64 rng(5);
  const auto a = random_matrix(6, 4, rng);
  CHECK(dtw_distance(a, a).distance == doctest::Approx(0.0).epsilon(1e-12));

  const auto x = matrix(1, 2, {1.0f, 0.0f}), y = matrix(1, 2, {1.0f, 1.0f});
  CHECK(dtw_distance(x, y).distance == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  CHECK(dtw_distance(x, y, FrameMetric::angular).distance == doctest::Approx(0.25));

  const auto two = matrix(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
  CHECK(dtw_distance(two, x).distance == doctest::Approx(0.5));
  CHECK(dtw_distance(x, two).distance == doctest::Approx(0.5));

  CHECK_THROWS_AS(dtw_distance(two, matrix(1, 3, {1, 2, 3})), UsageError);
  CHECK_THROWS_AS(dtw_distance(two, FrameMatrix{}), UsageError);
}

TEST_CASE("dtw zero-norm frames are at distance one and flagged") {
  const auto z = matrix(1, 2, {0.0f, 0.0f}), x = matrix(1, 2, {1.0f, 0.0f});
  const auto r = dtw_distance(z, x);
  CHECK(r.distance == 1.0);
  CHECK(r.zero_norm);
  CHECK_FALSE(dtw_distance(x, x).zero_norm);
}

TEST_CASE("dtw matches exhaustive alignment enumeration and is symmetric") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_matrix(std::uniform_int_distribution<std::size_t>(1, 6)(rng), 3, rng);
    const auto b = random_matrix(std::uniform_int_distribution<std::size_t>(1, 6)(rng), 3, rng);
    const auto metric = trial % 2 ? FrameMetric::angular : FrameMetric::cosine;
    const double d = dtw_distance(a, b, metric).distance;
    CHECK(d == doctest::Approx(brute_dtw(a, b, metric)).epsilon(1e-12));
    CHECK(d == doctest::Approx(dtw_distance(b, a, metric).distance).epsilon(1e-12));
  }
}

TEST_CASE("abx with X identical to A") {
  std::vector<AbxItem> items;
  const auto a = matrix(2, 2, {1, 0, 1, 0.1f}), b = matrix(2, 2, {0, 1, 0.1f, 1});
  for (const char* t : {"t1", "t2"}) {
    items.push_back({a, "A", t});
    items.push_back({b, "B", t});
  }
  const auto r = abx_score(items, {AbxMode::across_talker});
  CHECK(r.error_rate == 0.0);
  CHECK(r.n_triples == 4);  // 2 category orders x 2 talker orders x 1 triple
  CHECK(r.cells.size() == 4);
}

TEST_CASE("abx on i.i.d. representations is chance") {
  std::mt19937_64 rng(7);
  std::vector<AbxItem> items;
  for (int i = 0; i < 120; ++i)
    items.push_back({random_matrix(std::uniform_int_distribution<std::size_t>(3, 8)(rng), 8, rng),
                     i % 2 ? "A" : "B", (i / 2) % 2 ? "s" : "t"});
  AbxConfig cfg;
  cfg.mode = AbxMode::within_talker;
  cfg.max_triples_per_cell = 2500;  // 4 cells -> 10k triples
  cfg.seed = 1;
  const auto r = abx_score(items, cfg);
  CHECK(r.n_triples == 10000);
  CHECK(std::abs(r.error_rate - 0.5) <= 0.03);
}

TEST_CASE("abx separates well-separated clusters") {
  std::mt19937_64 rng(8);
  const auto items = cluster_items(4, 3, 5, 0.5, rng);
  for (auto mode : {AbxMode::within_talker, AbxMode::across_talker}) {
    const auto r = abx_score(items, {mode});
    CHECK(r.error_rate < 0.02);
    CHECK(r.skipped.empty());
  }
}

TEST_CASE("abx report structure and invariances") {
  std::mt19937_64 rng(9);
  auto items = cluster_items(3, 2, 4, 3.0, rng);
  AbxConfig cfg;
  cfg.max_triples_per_cell = 20;  // forces sampling
  cfg.seed = 5;
  const auto base = abx_score(items, cfg);
  CHECK(base.error_rate > 0.0);

  // weighted mean of per-category errors
  double acc = 0.0, w = 0.0;
  for (const auto& [_, c] : base.per_category) acc += c.error * c.n_pairs, w += c.n_pairs;
  CHECK(base.error_rate == doctest::Approx(acc / w).epsilon(1e-12));
  // across: X's talker differs, A and B share one
  for (const auto& cell : base.cells) CHECK(cell.talker_ab != cell.talker_x);

  auto par = cfg;
  par.jobs = 4;
  const auto r4 = abx_score(items, par);
  CHECK(r4.error_rate == base.error_rate);
  CHECK(r4.n_triples == base.n_triples);

  auto scaled = items;
  for (auto& it : scaled)
    for (auto& v : it.rep.data) v *= 3.5f;
  CHECK(abx_score(scaled, cfg).error_rate == doctest::Approx(base.error_rate).epsilon(1e-9));

  // random orthogonal rotation by Gram-Schmidt
  const std::size_t D = items[0].rep.cols;
  std::vector<std::vector<double>> q;
  std::normal_distribution<double> n;
  while (q.size() < D) {
    std::vector<double> v(D);
    for (auto& x : v) x = n(rng);
    for (const auto& u : q) {
      double dot = 0.0;
      for (std::size_t i = 0; i < D; ++i) dot += v[i] * u[i];
      for (std::size_t i = 0; i < D; ++i) v[i] -= dot * u[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    for (auto& x : v) x /= std::sqrt(norm);
    q.push_back(v);
  }
  auto rotated = items;
  for (auto& it : rotated)
    for (std::size_t r = 0; r < it.rep.rows; ++r) {
      std::vector<float> out(D);
      for (std::size_t i = 0; i < D; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < D; ++j) s += q[i][j] * it.rep.data[r * D + j];
        out[i] = static_cast<float>(s);
      }
      std::copy(out.begin(), out.end(), it.rep.data.begin() + r * D);
    }
  CHECK(abx_score(rotated, cfg).error_rate == doctest::Approx(base.error_rate).epsilon(1e-9));
}

TEST_CASE("abx skips lone items in within mode and rejects degenerate input") {
  std::mt19937_64 rng(10);
  std::vector<AbxItem> items = {{random_matrix(3, 2, rng), "A", "t"},
                                {random_matrix(3, 2, rng), "A", "t"},
                                {random_matrix(3, 2, rng), "B", "t"}};
  const auto r = abx_score(items, {AbxMode::within_talker});
  CHECK(r.skipped.size() == 1);  // B has a single item, so B-vs-A cannot form a triple
  CHECK(r.n_triples == 2);
  CHECK_THROWS_AS(abx_score(items, {AbxMode::across_talker}), UsageError);  // one talker
  items.pop_back();
  CHECK_THROWS_AS(abx_score(items), UsageError);  // one category
}

TEST_CASE("item files and frame mapping") {
  ScratchDir dir;
  const std::vector<ItemSpec> items = {{"u1", 0, 10, "p1", "s1"}, {"u2", 12, 31, "p3", "s2"}};
  write_item_file(dir / "items.txt", items);
  const auto back = read_item_file(dir / "items.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[1].utterance_id == "u2");
  CHECK(back[1].start == 12);
  CHECK(back[1].end == 31);
  CHECK(back[1].talker == "s2");

  std::ofstream(dir / "bad.txt") << "u1 5 5 p s\n";
  CHECK_THROWS_AS(read_item_file(dir / "bad.txt"), DataError);
  std::ofstream(dir / "short.txt") << "u1 5 9 p\n";
  CHECK_THROWS_AS(read_item_file(dir / "short.txt"), DataError);

  FeatureSequence rep;
  rep.dim = 1;
  rep.num_frames = 10;
  rep.frame_rate_hz = 25.0f;
  for (int i = 0; i < 10; ++i) rep.frames.push_back(float(i));
  const auto m = item_frames(rep, {"u", 12, 31, "p", "s"});  // [3, ceil(7.75)=8)
  CHECK(m.rows == 5);
  CHECK(m.data.front() == 3.0f);
  const auto tiny = item_frames(rep, {"u", 4, 5, "p", "s"});  // [1, 2)
  CHECK(tiny.rows == 1);
  CHECK(item_frames(rep, {"u", 36, 60, "p", "s"}).rows == 1);  // clipped
  CHECK_THROWS_AS(item_frames(rep, {"u", 40, 44, "p", "s"}), DataError);
}

TEST_CASE("linear probe") {
  std::mt19937_64 rng(11);
  const std::size_t n = 600, dim = 5;
  std::vector<float> x(n * dim);
  std::vector<std::size_t> y(n), groups(n);
  std::normal_distribution<float> g;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 3;
    groups[i] = i / 10;
    for (std::size_t d = 0; d < dim; ++d) x[i * dim + d] = g(rng) + (d == y[i] ? 4.0f : 0.0f);
  }
  const auto r = linear_probe(x, dim, y, 3, groups);
  CHECK(linear_probe(x, dim, y, 3, groups).test_accuracy == r.test_accuracy);
  CHECK(r.test_accuracy > 0.97);
  CHECK(r.n_train + r.n_test == n);
  CHECK(r.n_test % 10 == 0);  // whole groups held out

  // labels independent of the features
  std::vector<std::size_t> noise(n);
  for (auto& l : noise) l = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  for (std::size_t i = 0; i < n; ++i) groups[i] = i;
  const auto chance = linear_probe(x, dim, noise, 2, groups);
  CHECK(chance.test_accuracy > 0.35);
  CHECK(chance.test_accuracy < 0.65);

  CHECK_THROWS_AS(linear_probe(x, dim, y, 2, groups), UsageError);
  const std::vector<std::size_t> one_group(n, 0);
  CHECK_THROWS_AS(linear_probe(x, dim, y, 3, one_group), UsageError);
}

TEST_CASE("metric reports are deterministic json") {
  ScratchDir dir;
  const auto j = metric_report("bitrate", 25.0, "n_items", 3, {{"k", 1}}, 7);
  CHECK(j.at("metric") == "bitrate");
  CHECK(j.at("n_items") == 3);
  write_json(dir / "a.json", j);
  write_json(dir / "b.json", j);
  std::ifstream a(dir / "a.json"), b(dir / "b.json");
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}
