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

#include "zvq/eval/bitrate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "zvq/error.hpp"
#include "zvq/eval/report.hpp"

namespace zvq {

std::string tuple_symbol(std::span<const std::uint32_t> tuple) {
  std::string s;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(tuple[i]);
  }
  return s;
}

std::string vector_symbol(std::span<const float> v) {
  std::string s(v.size() * 8, '0');
  for (std::size_t i = 0; i < v.size(); ++i)
    std::snprintf(s.data() + i * 8, 9, "%08x", std::bit_cast<std::uint32_t>(v[i]));
  return s;
}

SymbolStream stream_from_codes(const CodeSequence& codes, double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0)) throw UsageError("stream_from_codes: frame rate must be positive");
  SymbolStream out;
  const std::size_t n = codes.num_frames();
  for (std::size_t f = 0; f < n; ++f)
    out.symbols.push_back(tuple_symbol({codes.indices.data() + f * codes.n_slices, codes.n_slices}));
  out.duration_s = static_cast<double>(n) / frame_rate_hz;
  return out;
}

SymbolStream stream_from_features(const FeatureSequence& feat) {
  if (!(feat.frame_rate_hz > 0.0f)) throw UsageError("stream_from_features: frame rate must be positive");
  SymbolStream out;
  for (std::size_t t = 0; t < feat.num_frames; ++t) out.symbols.push_back(vector_symbol(feat.frame(t)));
  out.duration_s = static_cast<double>(feat.num_frames) / feat.frame_rate_hz;
  return out;
}

double entropy_bits(const std::map<std::string, std::size_t>& counts) {
  // summed over sorted counts so the result does not depend on symbol names
  std::vector<std::size_t> cs;
  cs.reserve(counts.size());
  double n = 0.0;
  for (const auto& [_, c] : counts) {
    if (c == 0) continue;
    cs.push_back(c);
    n += static_cast<double>(c);
  }
  if (n == 0.0) return 0.0;
  std::sort(cs.begin(), cs.end());
  double h = 0.0;
  for (std::size_t c : cs) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double bitrate(std::span<const SymbolStream> streams) {
  if (streams.empty()) throw UsageError("bitrate: no symbol streams");
  std::map<std::string, std::size_t> counts;
  double duration = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    if (!(s.duration_s > 0.0)) throw DataError("bitrate: stream " + std::to_string(i) + " has zero duration");
    if (s.symbols.empty()) throw DataError("bitrate: stream " + std::to_string(i) + " has no symbols");
    duration += s.duration_s;
    n += s.symbols.size();
    for (const auto& sym : s.symbols) ++counts[sym];
  }
  return static_cast<double>(n) / duration * entropy_bits(counts);
}

nlohmann::json metric_report(const std::string& metric, double value, const std::string& count_key,
                             std::size_t count, const nlohmann::json& config, std::uint64_t seed) {
  return {{"metric", metric}, {"value", value}, {count_key, count}, {"config", config}, {"seed", seed}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace zvq
