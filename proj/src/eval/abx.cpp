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

#include "zvq/eval/abx.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "zvq/error.hpp"
#include "zvq/numerics/init.hpp"

namespace zvq {

FrameMetric parse_frame_metric(const std::string& s) {
  if (s == "cosine") return FrameMetric::cosine;
  if (s == "angular") return FrameMetric::angular;
  throw UsageError("unknown frame metric '" + s + "' (expected cosine or angular)");
}

std::string to_string(FrameMetric m) { return m == FrameMetric::cosine ? "cosine" : "angular"; }

AbxMode parse_abx_mode(const std::string& s) {
  if (s == "within" || s == "within_talker") return AbxMode::within_talker;
  if (s == "across" || s == "across_talker") return AbxMode::across_talker;
  throw UsageError("unknown ABX mode '" + s + "' (expected within or across)");
}

std::string to_string(AbxMode m) { return m == AbxMode::within_talker ? "within_talker" : "across_talker"; }

double frame_distance(std::span<const float> a, std::span<const float> b, FrameMetric metric, bool* zero_norm) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 1.0;
  }
  const double c = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return metric == FrameMetric::cosine ? 1.0 - c : std::acos(c) / std::numbers::pi;
}

DtwResult dtw_distance(const FrameMatrix& a, const FrameMatrix& b, FrameMetric metric) {
  if (a.rows == 0 || b.rows == 0) throw UsageError("dtw_distance: empty sequence");
  if (a.cols != b.cols)
    throw UsageError("dtw_distance: dimension mismatch (" + std::to_string(a.cols) + " vs " + std::to_string(b.cols) +
                     ")");
  DtwResult r;
  const std::size_t n = a.rows, m = b.rows;
  std::vector<double> cost(n * m);
  std::vector<std::uint32_t> len(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = frame_distance(a.row(i), b.row(j), metric, &r.zero_norm);
      double best = 0.0;
      std::uint32_t best_len = 0;
      bool found = false;
      auto consider = [&](std::size_t pi, std::size_t pj) {
        const double c = cost[pi * m + pj];
        const std::uint32_t l = len[pi * m + pj];
        if (!found || c < best || (c == best && l < best_len)) {
          best = c;
          best_len = l;
          found = true;
        }
      };
      if (i > 0 && j > 0) consider(i - 1, j - 1);
      if (i > 0) consider(i - 1, j);
      if (j > 0) consider(i, j - 1);
      cost[i * m + j] = best + d;
      len[i * m + j] = best_len + 1;
    }
  r.distance = cost.back() / len.back();
  return r;
}

namespace {

struct Context {
  std::size_t target, other;  // category indices
  std::size_t t_ab, t_x;      // talker indices
  std::vector<std::size_t> as, bs, xs;
};

// Error of one cell; exhaustive when small, otherwise sampled.
void run_cell(const Context& ctx, bool within, std::span<const AbxItem> items, const AbxConfig& cfg,
              std::uint64_t cell_seed, AbxCell& out, bool& zero_norm) {
  std::unordered_map<std::uint64_t, double> cache;
  auto dist = [&](std::size_t i, std::size_t j) {
    const std::uint64_t key = (std::uint64_t(std::min(i, j)) << 32) | std::max(i, j);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const auto r = dtw_distance(items[i].rep, items[j].rep, cfg.metric);
    zero_norm = zero_norm || r.zero_norm;
    cache.emplace(key, r.distance);
    return r.distance;
  };
  double errors = 0.0;
  std::size_t n = 0;
  auto triple = [&](std::size_t a, std::size_t b, std::size_t x) {
    const double dax = dist(a, x), dbx = dist(b, x);
    errors += dax > dbx ? 1.0 : (dax == dbx ? 0.5 : 0.0);
    ++n;
  };
  const std::size_t na = ctx.as.size(), nb = ctx.bs.size();
  const std::size_t nx = within ? na - 1 : ctx.xs.size();
  const std::size_t total = na * nb * nx;
  if (total <= cfg.max_triples_per_cell) {
    for (std::size_t a : ctx.as)
      for (std::size_t b : ctx.bs)
        for (std::size_t x : (within ? ctx.as : ctx.xs))
          if (x != a) triple(a, b, x);
  } else {
    std::mt19937_64 rng(cell_seed);
    std::uniform_int_distribution<std::size_t> pa(0, na - 1), pb(0, nb - 1), px(0, nx - 1);
    for (std::size_t k = 0; k < cfg.max_triples_per_cell; ++k) {
      const std::size_t ai = pa(rng), bi = pb(rng);
      std::size_t xi = px(rng);
      if (within && xi >= ai) ++xi;  // X from the other A-category items
      triple(ctx.as[ai], ctx.bs[bi], within ? ctx.as[xi] : ctx.xs[xi]);
    }
  }
  out.n_triples = n;
  out.error = errors / static_cast<double>(n);
}

}  // namespace

AbxReport abx_score(std::span<const AbxItem> items, const AbxConfig& cfg) {
  std::vector<std::string> categories, talkers;
  {
    std::set<std::string> c, t;
    for (const auto& it : items) {
      if (it.rep.rows == 0) throw UsageError("abx_score: item with no frames");
      if (it.category.empty() || it.talker.empty()) throw UsageError("abx_score: item with an empty label");
      if (it.rep.cols != items[0].rep.cols) throw UsageError("abx_score: items differ in dimension");
      c.insert(it.category);
      t.insert(it.talker);
    }
    categories.assign(c.begin(), c.end());
    talkers.assign(t.begin(), t.end());
  }
  if (categories.size() < 2) throw UsageError("abx_score: need at least two categories");
  if (cfg.max_triples_per_cell == 0) throw UsageError("abx_score: max_triples_per_cell must be positive");

  const std::size_t C = categories.size(), T = talkers.size();
  std::vector<std::vector<std::size_t>> by(C * T);  // [category][talker]
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t c = std::lower_bound(categories.begin(), categories.end(), items[i].category) - categories.begin();
    const std::size_t t = std::lower_bound(talkers.begin(), talkers.end(), items[i].talker) - talkers.begin();
    by[c * T + t].push_back(i);
  }

  AbxReport report;
  const bool within = cfg.mode == AbxMode::within_talker;
  std::vector<Context> contexts;
  for (std::size_t c1 = 0; c1 < C; ++c1)
    for (std::size_t c2 = 0; c2 < C; ++c2) {
      if (c1 == c2) continue;
      for (std::size_t t = 0; t < T; ++t) {
        const auto& as = by[c1 * T + t];
        const auto& bs = by[c2 * T + t];
        if (as.empty() || bs.empty()) continue;
        if (within) {
          if (as.size() < 2) {
            report.skipped.push_back(categories[c1] + " vs " + categories[c2] + " talker " + talkers[t] +
                                     ": one item");
            continue;
          }
          contexts.push_back({c1, c2, t, t, as, bs, {}});
        } else {
          for (std::size_t u = 0; u < T; ++u) {
            if (u == t || by[c1 * T + u].empty()) continue;
            contexts.push_back({c1, c2, t, u, as, bs, by[c1 * T + u]});
          }
        }
      }
    }
  if (contexts.empty()) throw UsageError("abx_score: no admissible triples in " + to_string(cfg.mode) + " mode");

  report.cells.resize(contexts.size());
  std::vector<char> zero(contexts.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < contexts.size();) {
      bool z = false;
      run_cell(contexts[k], within, items, cfg, mix_seed(cfg.seed, k), report.cells[k], z);
      zero[k] = z;
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, contexts.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // mean over talker contexts per category pair, then over pairs
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> pairs;
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    auto& cell = report.cells[k];
    const auto& ctx = contexts[k];
    cell.target = categories[ctx.target];
    cell.other = categories[ctx.other];
    cell.talker_ab = talkers[ctx.t_ab];
    cell.talker_x = talkers[ctx.t_x];
    report.n_triples += cell.n_triples;
    report.zero_norm_frames = report.zero_norm_frames || zero[k];
    auto& acc = pairs[{ctx.target, ctx.other}];
    acc.first += cell.error;
    ++acc.second;
  }
  double total = 0.0;
  for (const auto& [key, acc] : pairs) {
    const double e = acc.first / static_cast<double>(acc.second);
    total += e;
    auto& cat = report.per_category[categories[key.first]];
    cat.error += e;
    ++cat.n_pairs;
  }
  for (auto& [_, cat] : report.per_category) cat.error /= static_cast<double>(cat.n_pairs);
  report.error_rate = total / static_cast<double>(pairs.size());
  return report;
}

std::vector<ItemSpec> read_item_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open item file " + path.string());
  std::vector<ItemSpec> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ItemSpec it;
    long long s = -1, e = -1;
    std::string extra;
    if (!(ls >> it.utterance_id >> s >> e >> it.category >> it.talker) || (ls >> extra))
      throw DataError(path.string() + ":" + std::to_string(no) +
                      ": expected `utterance_id start_frame end_frame category talker`");
    if (s < 0 || e <= s)
      throw DataError(path.string() + ":" + std::to_string(no) + ": need 0 <= start_frame < end_frame");
    it.start = static_cast<std::size_t>(s);
    it.end = static_cast<std::size_t>(e);
    out.push_back(std::move(it));
  }
  return out;
}

void write_item_file(const std::filesystem::path& path, std::span<const ItemSpec> items) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write item file " + path.string());
  for (const auto& it : items)
    out << it.utterance_id << ' ' << it.start << ' ' << it.end << ' ' << it.category << ' ' << it.talker << '\n';
  if (!out) throw DataError("failed writing item file " + path.string());
}

FrameMatrix item_frames(const FeatureSequence& rep, const ItemSpec& item) {
  const double r = rep.frame_rate_hz / 100.0;
  std::size_t s = static_cast<std::size_t>(std::floor(static_cast<double>(item.start) * r + 1e-9));
  std::size_t e = static_cast<std::size_t>(std::ceil(static_cast<double>(item.end) * r - 1e-9));
  if (s >= rep.num_frames)
    throw DataError("item " + item.utterance_id + " [" + std::to_string(item.start) + ", " + std::to_string(item.end) +
                    ") lies beyond the representation (" + std::to_string(rep.num_frames) + " frames)");
  e = std::clamp(e, s + 1, rep.num_frames);
  FrameMatrix m;
  m.rows = e - s;
  m.cols = rep.dim;
  m.data.assign(rep.frames.begin() + s * rep.dim, rep.frames.begin() + e * rep.dim);
  return m;
}

}  // namespace zvq
