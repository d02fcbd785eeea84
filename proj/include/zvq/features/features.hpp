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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zvq/features/audio.hpp"
#include "zvq/numerics/tensor.hpp"

namespace zvq {

/// Per-utterance matrix of acoustic frames, row-major [num_frames x dim].
struct FeatureSequence {
  std::vector<float> frames;
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  float frame_rate_hz = 100.0f;
  std::string utterance_id;

  float& at(std::size_t t, std::size_t d) { return frames[t * dim + d]; }
  float at(std::size_t t, std::size_t d) const { return frames[t * dim + d]; }
  std::span<const float> frame(std::size_t t) const { return {frames.data() + t * dim, dim}; }
};

struct MfccConfig {
  double win_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 40;
  std::size_t n_ceps = 13;
  float preemphasis = 0.97f;
  float log_floor = 1e-10f;
};

/// Window and hop in samples for a sample rate.
std::size_t window_samples(const MfccConfig& cfg, int sample_rate_hz);
std::size_t hop_samples(const MfccConfig& cfg, int sample_rate_hz);

/// Pre-emphasis, Hamming window, power spectrum, mel filterbank, log and
/// orthonormal DCT-II; keeps the first n_ceps coefficients including c0.
/// Frame count is floor((n_samples - win) / hop) + 1.
FeatureSequence mfcc(const AudioClip& clip, const MfccConfig& cfg = {});

/// Appends regression deltas and delta-deltas (edges replicated):
/// d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2), n = 1..window.
FeatureSequence add_deltas(const FeatureSequence& feat, std::size_t window = 2);

struct CmvnStats {
  std::vector<float> mean;
  std::vector<float> std;
  std::size_t frame_count = 0;
};

inline constexpr float kCmvnStdFloor = 1e-8f;

/// Per-dimension population mean and standard deviation over every frame of
/// the corpus, accumulated in double.
CmvnStats compute_cmvn(std::span<const FeatureSequence> corpus);
FeatureSequence apply_cmvn(const FeatureSequence& feat, const CmvnStats& stats);
/// Inverse of apply_cmvn.
FeatureSequence invert_cmvn(const FeatureSequence& feat, const CmvnStats& stats);

void save_cmvn(const std::filesystem::path& path, const CmvnStats& stats);
CmvnStats load_cmvn(const std::filesystem::path& path);

struct Segments {
  std::vector<Tensor> segments;  // each [1, dim, len_frames]
  std::size_t dropped_frames = 0;
  std::optional<std::string> warning;
};

/// Cuts [dim x len] windows every hop frames; the trailing remainder is dropped.
Segments segment(const FeatureSequence& feat, std::size_t len_frames = 32, std::size_t hop_frames = 32);

/// Frames [begin, begin+len) as a [1, dim, len] tensor.
Tensor frames_to_tensor(const FeatureSequence& feat, std::size_t begin, std::size_t len);

/// Little-endian "ZVQF" feature file: magic, u32 version (1), u32 dim,
/// u32 num_frames, f32 frame_rate_hz, then row-major f32 frames.
void write_features(const std::filesystem::path& path, const FeatureSequence& feat);
/// The utterance id is taken from the file stem.
FeatureSequence read_features(const std::filesystem::path& path);

}  // namespace zvq
