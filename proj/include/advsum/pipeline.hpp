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


// Subcommand implementations shared by the C API and the command line.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "advsum/config.hpp"
#include "advsum/llmclient.hpp"

namespace advsum {

struct SurrogateModel;

/// Ordered key/value pairs describing a finished run.
using Summary = std::vector<std::pair<std::string, std::string>>;

/// "key=value" pairs joined by single spaces.
std::string RenderSummary(const Summary& summary);

/// Provider named by `provider`, wrapped in a response cache when `cache` is
/// set. `surrogate` may be null unless the provider needs it.
std::shared_ptr<ChatProvider> MakeProvider(const Config& config,
                                           std::shared_ptr<const SurrogateModel> surrogate);

/// Surrogate from `model_checkpoint`, or null when the key is empty.
std::shared_ptr<const SurrogateModel> LoadSurrogate(const Config& config);

// Each step writes effective_config.txt into `out_dir` before doing any work.
Summary PrepareData(const Config& config, const std::filesystem::path& out_dir);
Summary TrainSurrogate(const Config& config, const std::filesystem::path& out_dir);
Summary GenerateAttacks(const Config& config, const std::filesystem::path& out_dir);
Summary Evaluate(const Config& config, const std::filesystem::path& out_dir);
Summary MetaPrompt(const Config& config, const std::filesystem::path& out_dir);
Summary Report(const Config& config, const std::filesystem::path& out_dir);

}  // namespace advsum
