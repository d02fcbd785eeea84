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

#include <json.hpp>

#include "zvq/error.hpp"
#include "zvq/features/features.hpp"

namespace zvq {

CmvnStats compute_cmvn(std::span<const FeatureSequence> corpus) {
  if (corpus.empty()) throw DataError("cannot compute CMVN of an empty corpus");
  const std::size_t D = corpus.front().dim;
  std::vector<double> sum(D, 0.0), sq(D, 0.0);
  std::size_t count = 0;
  for (const auto& f : corpus) {
    if (f.dim != D) throw DataError("utterance " + f.utterance_id + " has dim " + std::to_string(f.dim) +
                                    ", expected " + std::to_string(D));
    for (std::size_t t = 0; t < f.num_frames; ++t)
      for (std::size_t d = 0; d < D; ++d) sum[d] += f.at(t, d);
    count += f.num_frames;
  }
  if (count == 0) throw DataError("cannot compute CMVN of a corpus with no frames");
  CmvnStats stats;
  stats.frame_count = count;
  stats.mean.resize(D);
  stats.std.resize(D);
  std::vector<double> mean(D);
  for (std::size_t d = 0; d < D; ++d) mean[d] = sum[d] / static_cast<double>(count);
  // second pass on centred values; single-pass sum of squares loses too much
  for (const auto& f : corpus)
    for (std::size_t t = 0; t < f.num_frames; ++t)
      for (std::size_t d = 0; d < D; ++d) {
        const double c = f.at(t, d) - mean[d];
        sq[d] += c * c;
      }
  for (std::size_t d = 0; d < D; ++d) {
    stats.mean[d] = static_cast<float>(mean[d]);
    stats.std[d] = std::max(static_cast<float>(std::sqrt(sq[d] / static_cast<double>(count))), kCmvnStdFloor);
  }
  return stats;
}

namespace {

void check_dims(const FeatureSequence& feat, const CmvnStats& stats) {
  if (stats.mean.size() != feat.dim || stats.std.size() != feat.dim)
    throw DataError("CMVN stats have dim " + std::to_string(stats.mean.size()) + " but features have dim " +
                    std::to_string(feat.dim));
}

}  // namespace

FeatureSequence apply_cmvn(const FeatureSequence& feat, const CmvnStats& stats) {
  check_dims(feat, stats);
  FeatureSequence out = feat;
  for (std::size_t t = 0; t < feat.num_frames; ++t)
    for (std::size_t d = 0; d < feat.dim; ++d)
      out.at(t, d) = static_cast<float>((static_cast<double>(feat.at(t, d)) - stats.mean[d]) / stats.std[d]);
  return out;
}

FeatureSequence invert_cmvn(const FeatureSequence& feat, const CmvnStats& stats) {
  check_dims(feat, stats);
  FeatureSequence out = feat;
  for (std::size_t t = 0; t < feat.num_frames; ++t)
    for (std::size_t d = 0; d < feat.dim; ++d)
      out.at(t, d) = static_cast<float>(static_cast<double>(feat.at(t, d)) * stats.std[d] + stats.mean[d]);
  return out;
}

void save_cmvn(const std::filesystem::path& path, const CmvnStats& stats) {
  nlohmann::json j;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  j["frame_count"] = stats.frame_count;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

CmvnStats load_cmvn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CmvnStats s;
    s.mean = j.at("mean").get<std::vector<float>>();
    s.std = j.at("std").get<std::vector<float>>();
    s.frame_count = j.at("frame_count").get<std::size_t>();
    if (s.mean.size() != s.std.size()) throw DataError(path.string() + ": mean and std lengths differ");
    for (float v : s.std)
      if (!(v >= kCmvnStdFloor)) throw DataError(path.string() + ": std entry below floor");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace zvq
