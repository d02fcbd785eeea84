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
#include <json.hpp>
#include <string>

namespace zvq {

/// {metric, value, <count_key>: count, config, seed}.
nlohmann::json metric_report(const std::string& metric, double value, const std::string& count_key,
                             std::size_t count, const nlohmann::json& config, std::uint64_t seed);

/// Pretty-printed with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace zvq
