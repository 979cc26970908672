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

// Chat prompt templates for function-name classification and its defenses.
// Every builder is a pure function of its arguments.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace advsum {

enum class Role { kSystem, kUser, kAssistant };

std::string_view RoleName(Role role);
std::optional<Role> ParseRole(std::string_view name);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatPrompt {
  std::vector<ChatMessage> messages;

  /// Throws InvalidArgument unless: at most one System message and only in
  /// front, non-empty contents, last message from the User.
  void Validate() const;

  /// [{"role": ..., "content": ...}, ...], pretty-printed, trailing newline.
  std::string ToJson() const;
  static ChatPrompt FromJson(std::string_view text);

  bool operator==(const ChatPrompt&) const = default;
};

struct FewShotPair {
  std::string code;
  std::string label;
};

enum class PromptVariant {
  kBaseline,
  kAbstain,
  kConfidence,
  kFsd,
  kInvD,
  kInvDStep1,
  kInvDStep2,
  kInvDGenerated,
};

inline constexpr std::string_view kSystemPrefix =
    "act as a code summarization model that only outputs one word; the possible output "
    "should be one of the following dictionary: ";

inline constexpr std::string_view kInvDInstruction =
    "Remove the if false statement and the print statement in the code before the "
    "summarization.";

inline constexpr std::string_view kCodeSeparator = "\n code: ";

inline constexpr std::string_view kAbstainInstruction =
    "If you are not confident that any word in the dictionary describes the code, reply "
    "with \"I don't know\" instead.";

/// Restoration prompts produced by example-based and perturbation-aware
/// meta-prompting, shipped as defaults for the generated-instruction defense.
inline constexpr std::string_view kEbmpGeneratedPrompt =
    "Given a perturbed version of a code snippet, your task is to convert it back to its "
    "original, clean, and functional form by removing any extraneous and unnecessary lines or "
    "elements. Make sure the output is syntactically correct and maintains the original logic "
    "and structure of the code.";

inline constexpr std::string_view kPampGeneratedPrompt =
    "Restore the perturbed code to its original form. Remove added print statements, "
    "eliminate dead code, correct replaced literals, and restore renamed variables, "
    "parameters, and fields to their original names. Ensure the output is syntactically "
    "correct and retains the original logic.";

/// Comma-space joined, no quoting.
std::string RenderDictionary(const std::vector<std::string>& dictionary);

ChatPrompt BuildBaseline(const std::vector<std::string>& dictionary,
                         const std::vector<FewShotPair>& fewshot,
                         const std::string& query_code);

/// Appends the abstain sentence to the final User message.
ChatPrompt WithAbstain(ChatPrompt prompt);

ChatPrompt BuildAbstain(const std::vector<std::string>& dictionary,
                        const std::vector<FewShotPair>& fewshot,
                        const std::string& query_code);

ChatPrompt BuildConfidence(const std::vector<std::string>& dictionary,
                           const std::string& query_code);

/// Adversarial pairs follow the clean pairs. Throws on empty `adv_pairs`.
ChatPrompt BuildFsd(const std::vector<std::string>& dictionary,
                    const std::vector<FewShotPair>& clean_pairs,
                    const std::vector<FewShotPair>& adv_pairs,
                    const std::string& query_code);

/// `instruction` absent: the manual removal sentence. Present: wrapped as
/// "Before summarization, {instruction}." (one trailing period of the
/// instruction is dropped first). Empty instruction throws.
ChatPrompt BuildInvD(const std::vector<std::string>& dictionary,
                     const std::vector<FewShotPair>& fewshot,
                     const std::string& query_code,
                     const std::optional<std::string>& instruction = std::nullopt);

struct TwoStepPrompts {
  ChatPrompt step1;
  /// Classification prompt over the code recovered in step 1.
  std::function<ChatPrompt(const std::string& recovered_code)> step2;
};

TwoStepPrompts BuildInvDTwoStep(const std::vector<std::string>& dictionary,
                                const std::vector<FewShotPair>& fewshot,
                                const std::string& query_code);

/// Example-based meta-prompting request over (original, perturbed) pairs.
ChatPrompt BuildMetaEbmp(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Perturbation-aware meta-prompting request.
ChatPrompt BuildMetaPamp();

/// What a prompt asks for, recovered from its text. Used by offline
/// providers to answer without a language model.
struct QueryInfo {
  enum class Kind { kClassify, kConfidence, kRecover, kMeta, kUnknown };
  Kind kind = Kind::kUnknown;
  std::vector<std::string> dictionary;
  std::string code;
  bool abstain_allowed = false;
  /// kMeta only: true for the perturbation-aware request.
  bool perturbation_aware = false;
};

QueryInfo InspectPrompt(const ChatPrompt& prompt);

}  // namespace advsum
