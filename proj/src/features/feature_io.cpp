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
#include <fstream>

#include "zvq/binary_io.hpp"
#include "zvq/error.hpp"
#include "zvq/features/features.hpp"

namespace zvq {

Segments segment(const FeatureSequence& feat, std::size_t len_frames, std::size_t hop_frames) {
  if (len_frames == 0 || hop_frames == 0) throw UsageError("segment length and hop must be positive");
  Segments out;
  if (feat.num_frames < len_frames) {
    out.dropped_frames = feat.num_frames;
    out.warning = "utterance " + feat.utterance_id + " has " + std::to_string(feat.num_frames) +
                  " frames, shorter than one segment (" + std::to_string(len_frames) + ")";
    return out;
  }
  std::size_t begin = 0;
  for (; begin + len_frames <= feat.num_frames; begin += hop_frames)
    out.segments.push_back(frames_to_tensor(feat, begin, len_frames));
  const std::size_t covered = begin - hop_frames + len_frames;
  out.dropped_frames = feat.num_frames - covered;
  return out;
}

Tensor frames_to_tensor(const FeatureSequence& feat, std::size_t begin, std::size_t len) {
  if (len == 0 || begin + len > feat.num_frames)
    throw UsageError("frame range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                     ") outside sequence of " + std::to_string(feat.num_frames) + " frames");
  Tensor t({1, feat.dim, len});
  auto& s = t.storage();
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t d = 0; d < feat.dim; ++d) s[d * len + i] = feat.at(begin + i, d);
  return t;
}

namespace {
constexpr char kMagic[4] = {'Z', 'V', 'Q', 'F'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_features(const std::filesystem::path& path, const FeatureSequence& feat) {
  if (feat.frames.size() != feat.num_frames * feat.dim) throw UsageError("feature buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, 4);
  binary::write_u32(out, kVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(feat.dim));
  binary::write_u32(out, static_cast<std::uint32_t>(feat.num_frames));
  binary::write_f32(out, feat.frame_rate_hz);
  binary::write_f32s(out, feat.frames);
  if (!out) throw DataError("failed writing " + path.string());
}

FeatureSequence read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw DataError(path.string() + ": bad magic");
  try {
    const auto version = binary::read_u32(in);
    if (version != kVersion) throw DataError(path.string() + ": unsupported version " + std::to_string(version));
    FeatureSequence f;
    f.dim = binary::read_u32(in);
    f.num_frames = binary::read_u32(in);
    f.frame_rate_hz = binary::read_f32(in);
    if (f.dim == 0 || !(f.frame_rate_hz > 0.0f)) throw DataError(path.string() + ": invalid header");
    f.frames.resize(f.dim * f.num_frames);
    binary::read_f32s(in, f.frames);
    f.utterance_id = path.stem().string();
    return f;
  } catch (const DataError& e) {
    if (std::string(e.what()).rfind(path.string(), 0) == 0) throw;
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace zvq
