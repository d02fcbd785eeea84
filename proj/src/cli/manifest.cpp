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

#include "zvq/cli/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "zvq/error.hpp"

namespace zvq::cli {

std::string to_string(Role r) {
  switch (r) {
    case Role::train_unit: return "train_unit";
    case Role::train_voice: return "train_voice";
    case Role::test: return "test";
    case Role::unspecified: return "";
  }
  return "";
}

Role parse_role(const std::string& s) {
  if (s == "train_unit") return Role::train_unit;
  if (s == "train_voice") return Role::train_voice;
  if (s == "test") return Role::test;
  if (s.empty()) return Role::unspecified;
  throw DataError("unknown role '" + s + "' (train_unit, train_voice, test)");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    if (cols.size() < 3 || cols.size() > 4) throw DataError(where + "expected 3 or 4 tab-separated columns");
    ManifestEntry e;
    e.utterance_id = cols[0];
    e.wav_path = std::filesystem::path(cols[1]).is_absolute() ? std::filesystem::path(cols[1]) : base / cols[1];
    e.speaker = cols[2];
    try {
      e.role = parse_role(cols.size() == 4 ? cols[3] : "");
    } catch (const DataError& err) {
      throw DataError(where + err.what());
    }
    if (e.utterance_id.empty() || e.speaker.empty()) throw DataError(where + "empty utterance id or speaker");
    if (!seen.insert(e.utterance_id).second) throw DataError(where + "duplicate utterance id " + e.utterance_id);
    if (check_paths && !std::filesystem::exists(e.wav_path))
      throw DataError(where + "missing file " + e.wav_path.string());
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("empty manifest");
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    auto rel = e.wav_path.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") rel = e.wav_path;
    out << e.utterance_id << '\t' << rel.generic_string() << '\t' << e.speaker;
    if (e.role != Role::unspecified) out << '\t' << to_string(e.role);
    out << '\n';
  }
}

}  // namespace zvq::cli
