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


// advsum command line. Talks to the library only through advsum.h.

#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advsum/advsum.h"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

using StepFn = advsum_status (*)(const advsum_config*, const char*, char**);

struct Subcommand {
  const char* name;
  const char* help;
  StepFn run;
};

const Subcommand kSubcommands[] = {
    {"prepare-data", "Validate data.input and write corpus, vocabulary and labels",
     &advsum_prepare_data},
    {"train-surrogate", "Train the surrogate classifier on corpus", &advsum_train_surrogate},
    {"gen-attacks", "Attack the surrogate on its correctly classified snippets",
     &advsum_generate_attacks},
    {"evaluate", "Run the prompt experiment and write records and reports", &advsum_evaluate},
    {"meta-prompt", "Ask the provider for EBMP and PAMP instructions", &advsum_meta_prompt},
    {"report", "Rebuild reports from a records file", &advsum_report},
};

struct ConfigHandle {
  advsum_config* cfg = nullptr;
  ~ConfigHandle() { advsum_config_free(cfg); }
};

int Fail(int code, const std::string& what) {
  std::cerr << "advsum: " << what << ": " << advsum_last_error() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness experiments for LLM code summarization", "advsum"};
  std::string subcommand, config_path, out_dir = "advsum_out", provider, cache;
  std::vector<std::string> overrides;
  std::string seed;

  std::vector<std::string> names;
  std::string footer = "Subcommands:\n";
  for (const auto& s : kSubcommands) {
    names.push_back(s.name);
    footer += "  " + std::string(s.name) + std::string(18 - std::strlen(s.name), ' ') +
              s.help + "\n";
  }
  footer += "\nExit status: 0 success, 1 usage error, 2 runtime error.";
  app.footer(footer);
  app.add_option("subcommand", subcommand, "Step to run")
      ->required()
      ->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "Key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override one config key (KEY=VALUE, repeatable)")
      ->allow_extra_args(false);
  app.add_option("--seed", seed, "Shorthand for --set seed=N");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--provider", provider, "Shorthand for --set provider=NAME");
  app.add_option("--cache", cache, "Shorthand for --set cache=PATH");

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsageError;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "advsum: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  ConfigHandle handle;
  if (advsum_config_create(&handle.cfg) != ADVSUM_OK) return Fail(kRuntimeError, "config");
  if (!config_path.empty() && advsum_config_load_file(handle.cfg, config_path.c_str()) != ADVSUM_OK) {
    return Fail(kRuntimeError, "--config " + config_path);
  }
  std::vector<std::string> assignments = overrides;
  if (!seed.empty()) assignments.push_back("seed=" + seed);
  if (!provider.empty()) assignments.push_back("provider=" + provider);
  if (!cache.empty()) assignments.push_back("cache=" + cache);
  for (const auto& a : assignments) {
    if (advsum_config_set_assignment(handle.cfg, a.c_str()) != ADVSUM_OK) {
      std::cerr << "advsum: --set " << a << ": " << advsum_last_error() << "\n\n" << app.help();
      return kUsageError;
    }
  }

  for (const auto& s : kSubcommands) {
    if (subcommand != s.name) continue;
    char* summary = nullptr;
    if (s.run(handle.cfg, out_dir.c_str(), &summary) != ADVSUM_OK) {
      return Fail(kRuntimeError, subcommand);
    }
    std::cout << "ok subcommand=" << subcommand << " " << summary << "\n";
    advsum_string_free(summary);
    return 0;
  }
  return kUsageError;
}
