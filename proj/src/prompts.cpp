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

#include "advsum/prompts.hpp"

#include "advsum/error.hpp"
#include "advsum/util.hpp"
#include "json.hpp"

namespace advsum {
namespace {

constexpr std::string_view kConfidencePrefix = "Use one word from the set ";
constexpr std::string_view kConfidenceMiddle = " to describe the following piece of code: ";
constexpr std::string_view kConfidenceSuffix =
    ". Also, output your confidence in your choice as a probability between 0 and 1. "
    "Don’t provide any other description. The reply form should be \"word (confidence).\"";

constexpr std::string_view kEbmpIntro =
    "Below are examples of original code snippets and the perturbed versions derived from "
    "them.";
constexpr std::string_view kEbmpRequest =
    "Write a prompt that instructs a language model to convert a perturbed code snippet like "
    "the ones above back to its original form. Reply with the prompt only.";
constexpr std::string_view kPampIntro =
    "A code snippet may have been perturbed with the following semantics-preserving "
    "transformations:";
constexpr std::string_view kPampKinds[] = {
    "renaming local variables",      "renaming function parameters", "renaming object fields",
    "replacing boolean literals",    "inserting print statements",
    "adding dead code guarded by an always-false condition",
};
constexpr std::string_view kPampRequest =
    "Write a prompt that instructs a language model to restore such a perturbed code snippet "
    "to its original form. Reply with the prompt only.";

ChatMessage System(const std::vector<std::string>& dictionary) {
  if (dictionary.empty()) throw InvalidArgument("dictionary is empty");
  return {Role::kSystem, std::string(kSystemPrefix) + RenderDictionary(dictionary)};
}

void AppendPairs(ChatPrompt& p, const std::vector<FewShotPair>& pairs) {
  for (const auto& pair : pairs) {
    if (pair.code.empty() || pair.label.empty()) {
      throw InvalidArgument("few-shot pair with empty code or label");
    }
    p.messages.push_back({Role::kUser, pair.code});
    p.messages.push_back({Role::kAssistant, pair.label});
  }
}

ChatPrompt Classification(const std::vector<std::string>& dictionary,
                          const std::vector<FewShotPair>& fewshot, std::string final_user) {
  ChatPrompt p;
  p.messages.push_back(System(dictionary));
  AppendPairs(p, fewshot);
  p.messages.push_back({Role::kUser, std::move(final_user)});
  p.Validate();
  return p;
}

std::string WithCode(std::string_view instruction, const std::string& code) {
  return std::string(instruction) + std::string(kCodeSeparator) + code;
}

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool EndsWith(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string> SplitDictionary(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(", ", pos);
    out.emplace_back(s.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 2;
  }
  return out;
}

}  // namespace

std::string_view RoleName(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

std::optional<Role> ParseRole(std::string_view name) {
  for (Role r : {Role::kSystem, Role::kUser, Role::kAssistant}) {
    if (RoleName(r) == name) return r;
  }
  return std::nullopt;
}

void ChatPrompt::Validate() const {
  if (messages.empty()) throw InvalidArgument("prompt has no messages");
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i].content.empty()) {
      throw InvalidArgument("message " + std::to_string(i) + " is empty");
    }
    if (messages[i].role == Role::kSystem && i != 0) {
      throw InvalidArgument("system message must come first");
    }
  }
  if (messages.back().role != Role::kUser) {
    throw InvalidArgument("prompt must end with a user message");
  }
}

std::string ChatPrompt::ToJson() const {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    arr.push_back({{"role", RoleName(m.role)}, {"content", m.content}});
  }
  return arr.dump(2) + "\n";
}

ChatPrompt ChatPrompt::FromJson(std::string_view text) {
  ChatPrompt p;
  try {
    for (const auto& m : nlohmann::json::parse(text)) {
      auto role = ParseRole(m.at("role").get<std::string>());
      if (!role) throw ParseError("unknown role " + m.at("role").dump());
      p.messages.push_back({*role, m.at("content").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed prompt: ") + e.what());
  }
  return p;
}

std::string RenderDictionary(const std::vector<std::string>& dictionary) {
  return Join(dictionary, ", ");
}

ChatPrompt BuildBaseline(const std::vector<std::string>& dictionary,
                         const std::vector<FewShotPair>& fewshot,
                         const std::string& query_code) {
  return Classification(dictionary, fewshot, query_code);
}

ChatPrompt WithAbstain(ChatPrompt prompt) {
  prompt.Validate();
  auto& last = prompt.messages.back().content;
  last += "\n";
  last += kAbstainInstruction;
  return prompt;
}

ChatPrompt BuildAbstain(const std::vector<std::string>& dictionary,
                        const std::vector<FewShotPair>& fewshot,
                        const std::string& query_code) {
  return WithAbstain(BuildBaseline(dictionary, fewshot, query_code));
}

ChatPrompt BuildConfidence(const std::vector<std::string>& dictionary,
                           const std::string& query_code) {
  if (dictionary.empty()) throw InvalidArgument("dictionary is empty");
  ChatPrompt p;
  p.messages.push_back({Role::kUser, std::string(kConfidencePrefix) +
                                         RenderDictionary(dictionary) +
                                         std::string(kConfidenceMiddle) + query_code +
                                         std::string(kConfidenceSuffix)});
  p.Validate();
  return p;
}

ChatPrompt BuildFsd(const std::vector<std::string>& dictionary,
                    const std::vector<FewShotPair>& clean_pairs,
                    const std::vector<FewShotPair>& adv_pairs,
                    const std::string& query_code) {
  if (adv_pairs.empty()) throw InvalidArgument("FSD needs at least one adversarial pair");
  std::vector<FewShotPair> all = clean_pairs;
  all.insert(all.end(), adv_pairs.begin(), adv_pairs.end());
  return Classification(dictionary, all, query_code);
}

ChatPrompt BuildInvD(const std::vector<std::string>& dictionary,
                     const std::vector<FewShotPair>& fewshot,
                     const std::string& query_code,
                     const std::optional<std::string>& instruction) {
  if (!instruction || *instruction == kInvDInstruction) {
    return Classification(dictionary, fewshot, WithCode(kInvDInstruction, query_code));
  }
  std::string_view text = Trim(*instruction);
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  if (text.empty()) throw InvalidArgument("generated instruction is empty");
  std::string wrapped = "Before summarization, " + std::string(text) + ".";
  return Classification(dictionary, fewshot, WithCode(wrapped, query_code));
}

TwoStepPrompts BuildInvDTwoStep(const std::vector<std::string>& dictionary,
                                const std::vector<FewShotPair>& fewshot,
                                const std::string& query_code) {
  TwoStepPrompts out;
  out.step1.messages.push_back({Role::kUser, WithCode(kInvDInstruction, query_code)});
  out.step1.Validate();
  out.step2 = [dictionary, fewshot](const std::string& recovered) {
    return BuildBaseline(dictionary, fewshot, recovered);
  };
  return out;
}

ChatPrompt BuildMetaEbmp(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw InvalidArgument("meta-prompting needs at least one example pair");
  std::string text(kEbmpIntro);
  text += "\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    text += "\nExample " + std::to_string(i + 1) + "\nOriginal:\n" + pairs[i].first +
            "\nPerturbed:\n" + pairs[i].second + "\n";
  }
  text += "\n";
  text += kEbmpRequest;
  ChatPrompt p;
  p.messages.push_back({Role::kUser, std::move(text)});
  return p;
}

ChatPrompt BuildMetaPamp() {
  std::string text(kPampIntro);
  text += "\n";
  int i = 0;
  for (auto kind : kPampKinds) {
    text += std::to_string(++i) + ". " + std::string(kind) + "\n";
  }
  text += kPampRequest;
  ChatPrompt p;
  p.messages.push_back({Role::kUser, std::move(text)});
  return p;
}

QueryInfo InspectPrompt(const ChatPrompt& prompt) {
  QueryInfo info;
  if (prompt.messages.empty()) return info;
  std::string_view last = prompt.messages.back().content;
  const auto& first = prompt.messages.front();

  if (first.role == Role::kSystem && StartsWith(first.content, kSystemPrefix)) {
    info.kind = QueryInfo::Kind::kClassify;
    info.dictionary =
        SplitDictionary(std::string_view(first.content).substr(kSystemPrefix.size()));
    std::string abstain_suffix = "\n" + std::string(kAbstainInstruction);
    if (EndsWith(last, abstain_suffix)) {
      info.abstain_allowed = true;
      last.remove_suffix(abstain_suffix.size());
    }
    auto sep = last.find(kCodeSeparator);
    info.code = sep == std::string_view::npos ? std::string(last)
                                              : std::string(last.substr(sep + kCodeSeparator.size()));
    return info;
  }
  if (prompt.messages.size() != 1) return info;
  if (StartsWith(last, kConfidencePrefix) && EndsWith(last, kConfidenceSuffix)) {
    std::string_view body = last.substr(kConfidencePrefix.size());
    body.remove_suffix(kConfidenceSuffix.size());
    auto mid = body.find(kConfidenceMiddle);
    if (mid == std::string_view::npos) return info;
    info.kind = QueryInfo::Kind::kConfidence;
    info.dictionary = SplitDictionary(body.substr(0, mid));
    info.code = std::string(body.substr(mid + kConfidenceMiddle.size()));
    return info;
  }
  if (StartsWith(last, kEbmpIntro) || StartsWith(last, kPampIntro)) {
    info.kind = QueryInfo::Kind::kMeta;
    info.perturbation_aware = StartsWith(last, kPampIntro);
    return info;
  }
  auto sep = last.find(kCodeSeparator);
  if (sep != std::string_view::npos) {
    info.kind = QueryInfo::Kind::kRecover;
    info.code = std::string(last.substr(sep + kCodeSeparator.size()));
  }
  return info;
}

}  // namespace advsum
