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

// Evaluation passes over a chat provider and the metrics computed from them.
//
// S is the evaluation set, S_M the subset the model classifies correctly
// without defenses, and S_M^adv its perturbed counterpart.
//
//   Acc on S  = Correct(S) / |S|
//   ASR       = Wrong(S_M^adv) / |S_M|
//   Abs       = Abstain(X) / |X|

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advsum/attack.hpp"
#include "advsum/config.hpp"
#include "advsum/corpus.hpp"
#include "advsum/llmclient.hpp"

namespace advsum {

struct SurrogateModel;

enum class InputKind { kClean, kAdversarial };
std::string_view InputKindName(InputKind kind);

enum class TwoStepOutcome { kFullSuccess, kPartialSuccess, kFailure };
std::string_view TwoStepOutcomeName(TwoStepOutcome outcome);

/// Evaluation variants in report order.
const std::vector<std::string>& KnownVariants();
bool IsAbstainVariant(std::string_view variant);

struct EvalRecord {
  std::string origin_id;
  std::string variant;
  InputKind input = InputKind::kClean;
  ParsedAnswer answer;
  bool correct = false;
  bool abstained = false;
  std::string fingerprint;
  /// Provider failure message, if any (the answer is then malformed).
  std::string error;
  /// Where the adversarial code came from: attack_file, surrogate or clean.
  std::string adv_source;
  std::optional<TwoStepOutcome> outcome;
  std::string recovered_code;

  bool operator==(const EvalRecord&) const = default;
};

std::string SerializeRecords(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> LoadRecords(const std::filesystem::path& path);

/// Ids of correctly classified records. Duplicate ids throw.
std::set<std::string> ComputeSM(const std::vector<EvalRecord>& clean_records);

/// A ratio num/den rendered as a percentage with two decimals, rounded half
/// up in integer arithmetic.
struct Percentage {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double ratio() const { return static_cast<double>(num) / static_cast<double>(den); }
  /// Hundredths of a percent, half up.
  std::uint64_t basis_points() const;
  std::string Render() const;
};

/// Correct / total. Empty input throws.
Percentage AccuracyOf(const std::vector<EvalRecord>& records);
/// (wrong + malformed) / sm_size. sm_size == 0 throws.
Percentage AsrOf(const std::vector<EvalRecord>& adv_records, std::uint64_t sm_size);
/// abstained / denom. denom == 0 throws.
Percentage AbstainRateOf(const std::vector<EvalRecord>& records, std::uint64_t denom);

/// Strips a leading "code:" marker and collapses whitespace.
std::string NormalizeRecovered(std::string_view text);
TwoStepOutcome ClassifyTwoStep(const std::vector<std::string>& original_tokens,
                               std::string_view recovered_text, bool final_correct);

struct CellCounts {
  std::uint64_t correct = 0;
  std::uint64_t wrong = 0;
  std::uint64_t abstain = 0;
  std::uint64_t malformed = 0;

  std::uint64_t total() const { return correct + wrong + abstain + malformed; }
};

struct EvalReport {
  std::string model_id;
  std::uint64_t s_size = 0;
  std::uint64_t sm_size = 0;
  std::vector<std::string> variants;  // report order
  std::map<std::pair<std::string, InputKind>, CellCounts> cells;
  std::map<std::pair<std::string, InputKind>, std::array<std::uint64_t, 3>> two_step;

  const CellCounts* Cell(const std::string& variant, InputKind kind) const;
};

EvalReport BuildReport(const std::string& model_id, const std::vector<EvalRecord>& records);

enum class ReportFormat { kText, kTsv };
std::string RenderReport(const EvalReport& report, ReportFormat format);

struct ExperimentResult {
  std::vector<EvalRecord> records;
  EvalReport report;
};

/// Clean baseline over S, S_M, adversarial baseline over S_M^adv, then each
/// requested defense on S_M and S_M^adv, then abstain variants on S and
/// S_M^adv. `surrogate` (optional) generates attacks missing from the attack
/// file. Inconsistent configuration throws before any provider call.
/// attack.* and seed keys as an AttackConfig.
AttackConfig AttackSettings(const Config& config);

ExperimentResult RunExperiment(const Config& config, ChatProvider& provider,
                               std::shared_ptr<const SurrogateModel> surrogate);

}  // namespace advsum
