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
#include <string>
#include <vector>

#include "zvq/eval/abx.hpp"
#include "zvq/features/features.hpp"
#include "zvq/models/model.hpp"

namespace zvq::cli {

struct SynthConfig {
  std::size_t n_speakers = 2;
  std::size_t n_phones = 5;
  std::size_t utts_per_speaker = 20;
  int sample_rate_hz = 16000;
  std::size_t min_phones = 6;
  std::size_t max_phones = 12;
  double min_phone_ms = 80.0;
  double max_phone_ms = 200.0;
  double test_fraction = 0.2;  // trailing utterances of each speaker tagged "test"
  double noise = 0.003;
  double formant_jitter = 0.05;  // relative, per phone instance
  double gain_jitter_db = 2.0;   // per phone instance
  double pitch_slope = 0.15;     // max relative f0 change across an utterance
};

/// Every tunable of a run. Defaults are the desk-scale settings.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string log_level = "info";

  MfccConfig mfcc;
  std::size_t delta_window = 2;

  Variant variant = Variant::svq_wae;
  std::size_t frame_rate_hz = 25;  // latent rate: 25 or 50
  std::size_t hidden = 64;
  std::size_t latent_dim = 16;
  std::size_t speaker_convs = 3;
  std::size_t speaker_channels = 64;
  std::size_t speaker_dim = 64;
  std::size_t speaker_embedding = 64;
  std::size_t codebook_size = 128;
  std::size_t n_slices = 4;
  float beta = 0.25f;
  float epsilon = 1e-5f;
  bool per_instance_stats = false;
  std::size_t segment_frames = 32;
  std::size_t batch_size = 10;
  float learning_rate = 4e-4f;

  std::uint64_t steps = 20000;
  std::uint64_t checkpoint_interval = 1000;
  std::uint64_t log_interval = 1;

  AbxMode abx_mode = AbxMode::across_talker;
  FrameMetric abx_metric = FrameMetric::cosine;
  std::size_t abx_max_triples = 10000;

  SynthConfig synth;
};

inline constexpr const char* kEnvPrefix = "ZVQ_";

/// Sets `section.key` from its textual value; UsageError on an unknown key or
/// a malformed value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

/// `[section]` headers and `key = value` lines; `#` starts a comment line.
/// Keys outside a section must be written as `section.key`.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
/// ZVQ_<SECTION>_<KEY>=value, e.g. ZVQ_MODEL_HIDDEN=128.
void apply_environment(RunConfig& cfg, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> config_environment();

/// Fully resolved config in the file format, sections and keys sorted.
std::string resolved_text(const RunConfig& cfg);

/// Model configuration for a run with n_speakers training speakers.
ModelConfig model_config(const RunConfig& cfg, std::size_t n_speakers);

}  // namespace zvq::cli
