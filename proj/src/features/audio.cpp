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

#include "zvq/features/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "zvq/binary_io.hpp"
#include "zvq/error.hpp"

namespace zvq {
namespace {

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw DataError("unexpected end of file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

std::string read_tag(std::istream& in) {
  std::string tag(4, '\0');
  if (!in.read(tag.data(), 4)) return {};
  return tag;
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string where = path.string() + ": ";
  if (read_tag(in) != "RIFF") throw DataError(where + "not a RIFF file");
  binary::read_u32(in);
  if (read_tag(in) != "WAVE") throw DataError(where + "not a WAVE file");

  bool have_fmt = false;
  AudioClip clip;
  for (;;) {
    const std::string tag = read_tag(in);
    if (tag.empty()) break;
    const std::uint32_t size = binary::read_u32(in);
    if (tag == "fmt ") {
      if (size < 16) throw DataError(where + "fmt chunk too short");
      const std::uint16_t format = read_u16(in);
      const std::uint16_t channels = read_u16(in);
      const std::uint32_t rate = binary::read_u32(in);
      binary::read_u32(in);  // byte rate
      read_u16(in);          // block align
      const std::uint16_t bits = read_u16(in);
      if (format != 1) throw DataError(where + "unsupported format tag " + std::to_string(format) + ", need PCM (1)");
      if (channels != 1) throw DataError(where + std::to_string(channels) + " channels, need mono");
      if (bits != 16) throw DataError(where + std::to_string(bits) + "-bit samples, need 16-bit");
      if (rate == 0) throw DataError(where + "zero sample rate");
      clip.sample_rate_hz = static_cast<int>(rate);
      in.seekg(size - 16 + (size & 1u), std::ios::cur);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw DataError(where + "data chunk before fmt chunk");
      if (size % 2 != 0) throw DataError(where + "data chunk is not a whole number of samples");
      clip.samples.resize(size / 2);
      for (auto& s : clip.samples) s = static_cast<float>(static_cast<std::int16_t>(read_u16(in))) / 32768.0f;
      return clip;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
    if (!in) break;
  }
  throw DataError(where + (have_fmt ? "missing data chunk" : "missing fmt chunk"));
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  binary::write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  binary::write_u32(out, 16);
  write_u16(out, 1);
  write_u16(out, 1);
  binary::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  binary::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  binary::write_u32(out, data_bytes);
  for (float s : clip.samples) {
    const long v = std::lround(static_cast<double>(std::clamp(s, -1.0f, 1.0f)) * 32768.0);
    write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace zvq
