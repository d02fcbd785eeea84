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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zvq/cli/config.hpp"

namespace zvq::cli {

struct Formants {
  double f[3];
  double bandwidth[3];
};

struct SynthVoice {
  double f0_hz;
  double tilt_db_per_octave;
};

/// Phone templates and voices implied by (cfg, seed).
std::vector<Formants> synth_phones(const SynthConfig& cfg, std::uint64_t seed);
std::vector<SynthVoice> synth_voices(const SynthConfig& cfg, std::uint64_t seed);

struct SynthSummary {
  std::size_t n_wavs = 0;
  std::size_t n_items = 0;
  std::filesystem::path manifest;
  std::filesystem::path item_file;
};

/// Writes wavs/<utt>.wav, manifest.tsv and items.txt (frames at the MFCC hop)
/// under out_dir. Each utterance is a random phone sequence voiced with its
/// speaker's pitch and spectral tilt.
SynthSummary make_synth_corpus(const SynthConfig& cfg, const MfccConfig& mfcc, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

}  // namespace zvq::cli
