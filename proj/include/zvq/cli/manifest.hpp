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
#include <string>
#include <vector>

namespace zvq::cli {

enum class Role { train_unit, train_voice, test, unspecified };

std::string to_string(Role r);
Role parse_role(const std::string& s);

struct ManifestEntry {
  std::string utterance_id;
  std::filesystem::path wav_path;  // resolved against the manifest directory
  std::string speaker;
  Role role = Role::unspecified;

  bool trains() const { return role != Role::test; }
};

/// `utterance_id<TAB>wav_path<TAB>speaker[<TAB>role]` per line; blank lines
/// and lines starting with `#` are skipped. Ids must be unique and every
/// path must exist.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path, bool check_paths = true);
/// Paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace zvq::cli
