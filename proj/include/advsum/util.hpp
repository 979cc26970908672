// Copyright 2026 The advsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace advsum {

/// Lowercase hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

/// First 8 bytes of SHA-256, big-endian. Stable across platforms, unlike
/// std::hash, so it is safe for seeds and fingerprints written to disk.
std::uint64_t StableHash64(std::string_view data);

/// Derives an independent stream seed from a base seed and a key.
std::uint64_t MixSeed(std::uint64_t seed, std::string_view key);

/// Splits on runs of ASCII whitespace; never yields empty tokens.
std::vector<std::string> SplitWhitespace(std::string_view text);

std::string Join(const std::vector<std::string>& parts, std::string_view sep);

std::string_view Trim(std::string_view s);

std::string ToLower(std::string_view s);

/// Calls `fn(line, line_number)` for every line of a text file (1-based line
/// numbers, trailing '\r' stripped). Throws IoError when the file cannot be
/// opened.
void ForEachLine(const std::filesystem::path& path,
                 const std::function<void(std::string_view, std::size_t)>& fn);

std::string ReadFile(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: truncate then write.
void WriteFile(const std::filesystem::path& path, std::string_view content);

}  // namespace advsum
