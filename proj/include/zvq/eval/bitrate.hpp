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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zvq/bottlenecks/quantizer.hpp"
#include "zvq/features/features.hpp"

namespace zvq {

/// Symbols of one utterance with its duration.
struct SymbolStream {
  std::vector<std::string> symbols;
  double duration_s = 0.0;
};

/// Key of an index tuple, e.g. "3,17,5,9".
std::string tuple_symbol(std::span<const std::uint32_t> tuple);
/// Exact-match key of a float vector (its bit pattern).
std::string vector_symbol(std::span<const float> v);

/// One symbol per frame (the full N-tuple); duration frames / rate.
SymbolStream stream_from_codes(const CodeSequence& codes, double frame_rate_hz);
/// One symbol per distinct frame vector; duration frames / frame_rate_hz.
SymbolStream stream_from_features(const FeatureSequence& feat);

/// Empirical entropy in bits of a count table.
double entropy_bits(const std::map<std::string, std::size_t>& counts);

/// (total symbols / total duration) * entropy of the pooled symbol
/// distribution. Throws UsageError on no streams, DataError on a stream with
/// non-positive duration or no symbols.
double bitrate(std::span<const SymbolStream> streams);

}  // namespace zvq
