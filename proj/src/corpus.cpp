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

#include "advsum/corpus.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "advsum/error.hpp"
#include "advsum/util.hpp"
#include "json.hpp"

namespace advsum {
namespace {

using ordered_json = nlohmann::ordered_json;

bool HasWhitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  });
}

std::string RequireString(const nlohmann::json& rec, const char* field,
                          std::size_t lineno) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError("line " + std::to_string(lineno) + ": missing string field '" +
                     field + "'");
  }
  return it->get<std::string>();
}

// Reads {"token","index"} dumps; the indices must be dense and in order.
std::vector<std::string> LoadIndexedTokens(const std::filesystem::path& path) {
  std::vector<std::string> tokens;
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    if (Trim(line).empty()) return;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string token = RequireString(rec, "token", lineno);
    auto idx = rec.find("index");
    if (idx == rec.end() || !idx->is_number_unsigned() ||
        idx->get<std::size_t>() != tokens.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": index out of sequence");
    }
    tokens.push_back(std::move(token));
  });
  return tokens;
}

std::string SerializeIndexedTokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ordered_json rec;
    rec["token"] = tokens[i];
    rec["index"] = i;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

void ValidateSnippet(const CodeSnippet& s) {
  if (s.tokens.empty()) throw InvalidArgument("snippet '" + s.id + "' has no tokens");
  for (const auto& t : s.tokens) {
    if (t.empty() || HasWhitespace(t)) {
      throw InvalidArgument("snippet '" + s.id + "' has an empty or whitespace token");
    }
  }
  if (s.label.empty() || HasWhitespace(s.label)) {
    throw InvalidArgument("snippet '" + s.id + "' has an invalid label");
  }
}

std::string RenderTokens(const CodeSnippet& s) { return Join(s.tokens, " "); }

CodeSnippet MakeSnippet(std::string id, std::string_view code, std::string label) {
  return CodeSnippet{std::move(id), SplitWhitespace(code), std::move(label)};
}

std::vector<CodeSnippet> LoadDataset(const std::filesystem::path& path) {
  std::vector<CodeSnippet> out;
  std::unordered_set<std::string> seen;
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    if (Trim(line).empty()) return;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": malformed record: " +
                       e.what());
    }
    if (!rec.is_object()) {
      throw ParseError("line " + std::to_string(lineno) + ": record is not an object");
    }
    CodeSnippet s = MakeSnippet(RequireString(rec, "id", lineno),
                                RequireString(rec, "code", lineno),
                                RequireString(rec, "label", lineno));
    try {
      ValidateSnippet(s);
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(s.id).second) {
      throw ParseError("line " + std::to_string(lineno) + ": duplicate id '" + s.id +
                       "'");
    }
    out.push_back(std::move(s));
  });
  return out;
}

std::string SerializeDataset(const std::vector<CodeSnippet>& snippets) {
  std::string out;
  for (const auto& s : snippets) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["code"] = RenderTokens(s);
    rec["label"] = s.label;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

bool Dictionary::Contains(std::string_view name) const {
  return std::find(labels.begin(), labels.end(), name) != labels.end();
}

Dictionary BuildDictionary(const std::string& true_label,
                           const std::set<std::string>& all_labels,
                           std::size_t size, std::uint64_t seed) {
  if (size == 0) throw InvalidArgument("dictionary size must be positive");
  std::vector<std::string> others;
  others.reserve(all_labels.size());
  for (const auto& l : all_labels) {
    if (l != true_label) others.push_back(l);
  }
  Dictionary dict;
  std::size_t want_others = size - 1;
  if (want_others > others.size()) {
    want_others = others.size();
    dict.clamped = true;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> sampled;
  sampled.reserve(want_others + 1);
  std::sample(others.begin(), others.end(), std::back_inserter(sampled), want_others,
              rng);
  std::shuffle(sampled.begin(), sampled.end(), rng);
  std::uniform_int_distribution<std::size_t> pos(0, sampled.size());
  dict.true_label_index = pos(rng);
  sampled.insert(sampled.begin() + static_cast<std::ptrdiff_t>(dict.true_label_index),
                 true_label);
  dict.labels = std::move(sampled);
  return dict;
}

Dictionary SharedDictionary(const std::string& true_label,
                            const std::vector<std::string>& pool,
                            std::uint64_t seed) {
  Dictionary dict;
  dict.labels = pool;
  auto it = std::find(dict.labels.begin(), dict.labels.end(), true_label);
  if (it != dict.labels.end()) {
    dict.true_label_index = static_cast<std::size_t>(it - dict.labels.begin());
    return dict;
  }
  if (dict.labels.empty()) {
    dict.labels.push_back(true_label);
    return dict;
  }
  std::mt19937_64 rng(MixSeed(seed, true_label));
  std::uniform_int_distribution<std::size_t> pos(0, dict.labels.size() - 1);
  dict.true_label_index = pos(rng);
  dict.labels[dict.true_label_index] = true_label;
  return dict;
}

Vocabulary::Vocabulary() : Vocabulary(std::set<std::string>{}) {}

Vocabulary::Vocabulary(const std::set<std::string>& tokens) {
  tokens_.reserve(tokens.size() + 1);
  tokens_.emplace_back(kUnknown);
  for (const auto& t : tokens) {
    if (t == kUnknown) continue;
    tokens_.push_back(t);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::size_t Vocabulary::Lookup(std::string_view token) const {
  return Find(token).value_or(0);
}

std::optional<std::size_t> Vocabulary::Find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end() || it->second == 0) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Vocabulary::Encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Lookup(t));
  return ids;
}

std::string Vocabulary::Hash() const { return Sha256Hex(Join(tokens_, "\n")); }

std::string Vocabulary::Serialize() const { return SerializeIndexedTokens(tokens_); }

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  auto tokens = LoadIndexedTokens(path);
  if (tokens.empty() || tokens.front() != kUnknown) {
    throw ParseError(path.string() + ": vocabulary must start with the sentinel");
  }
  std::set<std::string> set(tokens.begin() + 1, tokens.end());
  Vocabulary v(set);
  if (v.tokens_ != tokens) {
    throw ParseError(path.string() + ": vocabulary is not sorted and distinct");
  }
  return v;
}

Vocabulary BuildVocab(const std::vector<CodeSnippet>& corpus,
                      const std::vector<std::string>& extra_tokens) {
  std::set<std::string> tokens;
  for (const auto& s : corpus) tokens.insert(s.tokens.begin(), s.tokens.end());
  tokens.insert(extra_tokens.begin(), extra_tokens.end());
  return Vocabulary(tokens);
}

LabelSet::LabelSet(const std::set<std::string>& labels)
    : labels_(labels.begin(), labels.end()) {
  for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], i);
}

std::optional<std::size_t> LabelSet::Find(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string LabelSet::Hash() const { return Sha256Hex(Join(labels_, "\n")); }

std::string LabelSet::Serialize() const { return SerializeIndexedTokens(labels_); }

LabelSet LabelSet::Load(const std::filesystem::path& path) {
  auto labels = LoadIndexedTokens(path);
  LabelSet set(std::set<std::string>(labels.begin(), labels.end()));
  if (set.labels_ != labels) {
    throw ParseError(path.string() + ": label set is not sorted and distinct");
  }
  return set;
}

LabelSet CollectLabels(const std::vector<CodeSnippet>& corpus) {
  std::set<std::string> labels;
  for (const auto& s : corpus) labels.insert(s.label);
  return LabelSet(labels);
}

}  // namespace advsum
