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

#include <filesystem>
#include <optional>
#include <string>

#include "zvq/cli/config.hpp"

namespace zvq::cli {

/// MFCC + deltas per manifest utterance into out_dir/<utt>.zvqf, plus
/// out_dir/cmvn.json over the training utterances. Unreadable WAVs are
/// reported and skipped; returns the number of failures.
std::size_t extract_features(const RunConfig& cfg, const std::filesystem::path& manifest,
                             const std::filesystem::path& out_dir);

struct TrainArgs {
  std::filesystem::path manifest;
  std::filesystem::path features;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
};

/// Writes train_log.jsonl, ckpt_<step>.zvqm every checkpoint interval,
/// final.zvqm, speaker_map.json and config.txt. On a non-finite loss the
/// untouched state is saved as last_good.zvqm and NumericalError propagates.
void train(const RunConfig& cfg, const TrainArgs& args);

enum class EncodeFormat { codes, latents };

/// Per utterance: <utt>.codes (one code line) or <utt>.zvqf latents. The
/// default format follows the variant; codes from an IN-WAE model are rejected.
void encode(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& features,
            const std::optional<std::filesystem::path>& manifest, const std::filesystem::path& out_dir,
            std::optional<EncodeFormat> format);

/// Converted features, denormalized to the input domain at the input rate.
void convert(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& source,
             const std::string& target_speaker, const std::filesystem::path& out);

void eval_abx(const RunConfig& cfg, const std::filesystem::path& inputs, const std::filesystem::path& item_file,
              const std::optional<std::filesystem::path>& cmvn, const std::filesystem::path& out);
/// Reads <utt>.codes files if any, otherwise hashes <utt>.zvqf frames.
void eval_bitrate(const RunConfig& cfg, const std::filesystem::path& inputs, const std::filesystem::path& out);

/// Entry point of the zvq executable; returns the process exit code
/// (0 ok, 1 usage, 2 data, 3 numerical).
int run(int argc, char** argv);

}  // namespace zvq::cli
