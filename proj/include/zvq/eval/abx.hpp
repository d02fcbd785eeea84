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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zvq/features/features.hpp"

namespace zvq {

/// Row-major [rows x cols] frames.
struct FrameMatrix {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

enum class FrameMetric { cosine, angular };

FrameMetric parse_frame_metric(const std::string& s);
std::string to_string(FrameMetric m);

/// 1 - cos (cosine) or arccos(cos) / pi (angular). A zero-norm frame is at
/// distance 1 from everything; zero_norm is set when that happens.
double frame_distance(std::span<const float> a, std::span<const float> b, FrameMetric metric, bool* zero_norm);

struct DtwResult {
  double distance = 0.0;
  bool zero_norm = false;
};

/// Symmetric DTW (diagonal, up and right steps) over the frame distance
/// matrix; accumulated cost of the cheapest path divided by its length in
/// steps. Among equally cheap predecessors the shorter path wins.
DtwResult dtw_distance(const FrameMatrix& a, const FrameMatrix& b, FrameMetric metric = FrameMetric::cosine);

enum class AbxMode { within_talker, across_talker };

AbxMode parse_abx_mode(const std::string& s);
std::string to_string(AbxMode m);

struct AbxItem {
  FrameMatrix rep;
  std::string category;
  std::string talker;
};

struct AbxConfig {
  AbxMode mode = AbxMode::across_talker;
  FrameMetric metric = FrameMetric::cosine;
  /// Cells with more admissible triples are sampled (with replacement).
  std::size_t max_triples_per_cell = 10000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Triples with A and X in category `target` and B in `other`, in one talker
/// context (within: A, B, X share `talker_ab`; across: A and B share
/// `talker_ab`, X has `talker_x` != talker_ab).
struct AbxCell {
  std::string target, other, talker_ab, talker_x;
  std::size_t n_triples = 0;
  double error = 0.0;
};

struct AbxCategoryScore {
  double error = 0.0;
  std::size_t n_pairs = 0;  // category pairs (target, other) averaged
};

struct AbxReport {
  double error_rate = 0.0;
  std::size_t n_triples = 0;
  std::vector<AbxCell> cells;
  /// Mean over the category pairs with this target category.
  std::map<std::string, AbxCategoryScore> per_category;
  /// Contexts that could not form a triple (e.g. a lone item in within mode).
  std::vector<std::string> skipped;
  bool zero_norm_frames = false;
};

/// Machine ABX: a triple errs when d(A,X) > d(B,X) and counts 0.5 on a tie.
/// Cell errors are averaged over talker contexts per ordered category pair,
/// then over pairs. Each cell samples from its own seed-derived generator,
/// so results do not depend on cfg.jobs. Throws UsageError with fewer than
/// two categories or when no cell is admissible.
AbxReport abx_score(std::span<const AbxItem> items, const AbxConfig& cfg = {});

/// Item file line: `utterance_id start_frame end_frame category talker`,
/// frames at 100 Hz, end exclusive.
struct ItemSpec {
  std::string utterance_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string category;
  std::string talker;
};

std::vector<ItemSpec> read_item_file(const std::filesystem::path& path);
void write_item_file(const std::filesystem::path& path, std::span<const ItemSpec> items);

/// Frames of `rep` covering an item's 100 Hz span: [floor(s*r/100),
/// ceil(e*r/100)) clipped to the sequence, at least one frame.
FrameMatrix item_frames(const FeatureSequence& rep, const ItemSpec& item);

}  // namespace zvq
