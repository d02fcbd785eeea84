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
#include <vector>

namespace zvq {

struct AudioClip {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate_hz = 16000;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

/// Reads a RIFF/WAVE file holding 16-bit PCM mono audio. Samples are scaled
/// by 1/32768. Anything else is rejected with a DataError naming the problem.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clamped to [-1, 1] and rounded.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace zvq
