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

// Flat key=value experiment configuration.
//
//   # comment
//   corpus = data/corpus.jsonl
//   variants = baseline,fsd,invd
//
// Only known keys are accepted; every key has a default.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace advsum {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

/// Every recognized key, sorted by name.
const std::vector<ConfigKey>& ConfigKeys();

class Config {
 public:
  /// All keys at their defaults.
  Config();

  static bool IsKnownKey(std::string_view key);

  /// Throws InvalidArgument for unknown keys.
  void Set(std::string_view key, std::string_view value);
  /// Parses "key=value" (whitespace around both sides is trimmed).
  void SetAssignment(std::string_view assignment);
  /// Applies every assignment in the file; paths stay as written.
  void LoadFile(const std::filesystem::path& path);

  const std::string& Get(std::string_view key) const;
  std::int64_t GetInt(std::string_view key) const;
  std::uint64_t GetUint(std::string_view key) const;
  double GetDouble(std::string_view key) const;
  bool GetBool(std::string_view key) const;
  /// Comma-separated, trimmed, empty items dropped.
  std::vector<std::string> GetList(std::string_view key) const;

  /// "key=value" lines for every key, sorted.
  std::string Dump() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace advsum
