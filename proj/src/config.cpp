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

#include "advsum/config.hpp"

#include <algorithm>
#include <charconv>

#include "advsum/error.hpp"
#include "advsum/util.hpp"

namespace advsum {

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k = {
        {"attack.iters", "100", "optimizer iterations per snippet"},
        {"attack.k", "5", "maximum number of perturbed sites"},
        {"attack.max_insert_slots", "8", "insert slots offered per snippet"},
        {"attack.smooth_samples", "10", "gradient samples per iteration (0 disables)"},
        {"attack.smooth_sigma", "0.1", "smoothing noise scale"},
        {"attack.step", "0.5", "ascent step size"},
        {"attack.threads", "1", "snippets attacked in parallel"},
        {"attack_file", "", "attack records for the adversarial passes"},
        {"cache", "", "response cache file"},
        {"corpus", "", "dataset of {id, code, label} records"},
        {"data.input", "", "raw dataset read by prepare-data"},
        {"data.limit", "0", "keep at most this many records (0 keeps all)"},
        {"dictionary.mode", "per_snippet", "per_snippet or shared"},
        {"dictionary.size", "500", "candidate names per query"},
        {"fewshot.count", "4", "clean few-shot examples (held out of S)"},
        {"invd.ebmp_prompt", "", "file holding an example-based generated prompt"},
        {"invd.pamp_prompt", "", "file holding a perturbation-aware generated prompt"},
        {"lenient", "false", "accept replies containing exactly one dictionary word"},
        {"max_tokens", "16", "reply limit for classification queries"},
        {"max_tokens.recovery", "512", "reply limit for code-recovery queries"},
        {"meta.examples", "2", "example pairs in the example-based meta prompt"},
        {"model_checkpoint", "", "surrogate directory"},
        {"model_id", "surrogate", "model name sent to the provider"},
        {"provider", "mock", "mock, surrogate or http"},
        {"provider.auth_env", "", "environment variable holding the API key"},
        {"provider.backoff_ms", "500", "base retry backoff"},
        {"provider.endpoint", "", "chat-completions URL"},
        {"provider.max_parallel", "1", "requests in flight"},
        {"provider.max_retries", "3", "retries for transient failures"},
        {"provider.script", "", "scripted {fingerprint, text} responses"},
        {"provider.timeout_ms", "60000", "per-request timeout"},
        {"records", "", "records log read by the report subcommand"},
        {"seed", "0", "master seed"},
        {"temperature", "0", "sampling temperature"},
        {"train.batch_size", "8", "surrogate mini-batch size"},
        {"train.embed_dim", "16", "surrogate embedding width"},
        {"train.epochs", "200", "surrogate training epochs"},
        {"train.hidden_dim", "32", "surrogate hidden width"},
        {"train.learning_rate", "0.5", "surrogate step size"},
        {"variants", "baseline", "comma-separated evaluation variants"},
    };
    std::sort(k.begin(), k.end(),
              [](const ConfigKey& a, const ConfigKey& b) { return a.name < b.name; });
    return k;
  }();
  return keys;
}

Config::Config() {
  for (const auto& k : ConfigKeys()) values_.emplace(std::string(k.name), k.default_value);
}

bool Config::IsKnownKey(std::string_view key) {
  const auto& keys = ConfigKeys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
}

void Config::Set(std::string_view key, std::string_view value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  it->second = std::string(value);
}

void Config::SetAssignment(std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument("expected KEY=VALUE, got '" + std::string(assignment) + "'");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

void Config::LoadFile(const std::filesystem::path& path) {
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    std::string_view t = Trim(line);
    if (t.empty() || t.front() == '#') return;
    try {
      SetAssignment(t);
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
}

const std::string& Config::Get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t Config::GetInt(std::string_view key) const {
  const auto& v = Get(key);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(std::string(key) + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::GetUint(std::string_view key) const {
  auto v = GetInt(key);
  if (v < 0) throw InvalidArgument(std::string(key) + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

double Config::GetDouble(std::string_view key) const {
  const auto& v = Get(key);
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw InvalidArgument(std::string(key) + ": expected a number, got '" + v + "'");
}

bool Config::GetBool(std::string_view key) const {
  auto v = ToLower(Get(key));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(std::string(key) + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::GetList(std::string_view key) const {
  std::vector<std::string> out;
  std::string_view rest = Get(key);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = Trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string Config::Dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace advsum
