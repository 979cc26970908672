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

#include <filesystem>
#include <string>

#include "advsum/corpus.hpp"
#include "advsum/util.hpp"

#ifndef ADVSUM_TEST_DATA_DIR
#error "ADVSUM_TEST_DATA_DIR must be defined"
#endif

namespace advsum::testing {

inline std::filesystem::path DataPath(const std::string& name) {
  return std::filesystem::path(ADVSUM_TEST_DATA_DIR) / name;
}

inline std::string ReadData(const std::string& name) {
  return std::string(Trim(ReadFile(DataPath(name))));
}

inline CodeSnippet GntpInit() {
  return MakeSnippet("listing1", ReadData("listing1.txt"), "__init__");
}

}  // namespace advsum::testing
