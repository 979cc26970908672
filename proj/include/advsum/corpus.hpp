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

// Code-summarization dataset: flattened token streams labelled with a
// single-word function name, plus the label dictionaries and the token
// vocabulary the attack optimizes over.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace advsum {

struct CodeSnippet {
  std::string id;
  std::vector<std::string> tokens;
  std::string label;

  bool operator==(const CodeSnippet&) const = default;
};

/// Throws InvalidArgument if `s` breaks the snippet invariants (non-empty
/// whitespace-free tokens, non-empty whitespace-free label).
void ValidateSnippet(const CodeSnippet& s);

/// Tokens joined by single spaces.
std::string RenderTokens(const CodeSnippet& s);

/// Builds a snippet from a space-joined code string.
CodeSnippet MakeSnippet(std::string id, std::string_view code, std::string label);

/// Reads newline-delimited {"id","code","label"} records. Blank lines are
/// skipped. Errors name the offending 1-based line number.
std::vector<CodeSnippet> LoadDataset(const std::filesystem::path& path);

std::string SerializeDataset(const std::vector<CodeSnippet>& snippets);

/// Per-query closed set of candidate function names.
struct Dictionary {
  std::vector<std::string> labels;
  std::size_t true_label_index = 0;
  /// Set when the requested size exceeded the number of available names.
  bool clamped = false;

  const std::string& true_label() const { return labels[true_label_index]; }
  bool Contains(std::string_view name) const;
};

/// Samples `size - 1` distinct names uniformly without replacement from
/// `all_labels \ {true_label}` and inserts `true_label` at a seeded random
/// position. Deterministic in (true_label, all_labels, size, seed).
Dictionary BuildDictionary(const std::string& true_label,
                           const std::set<std::string>& all_labels,
                           std::size_t size, std::uint64_t seed);

/// Shared-dictionary mode: one fixed pool for every query. If the pool lacks
/// `true_label`, the entry at a seeded position is replaced by it.
Dictionary SharedDictionary(const std::string& true_label,
                            const std::vector<std::string>& pool,
                            std::uint64_t seed);

/// Token vocabulary (the attack's Omega). Index 0 is a reserved sentinel that
/// every out-of-vocabulary token maps to; real tokens occupy 1..size()-1 in
/// lexicographic order.
class Vocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  Vocabulary();
  explicit Vocabulary(const std::set<std::string>& tokens);

  /// Number of rows, sentinel included.
  std::size_t size() const { return tokens_.size(); }
  /// Number of real tokens.
  std::size_t token_count() const { return tokens_.size() - 1; }

  /// Index of `token`, or 0 when it is not in the vocabulary.
  std::size_t Lookup(std::string_view token) const;
  std::optional<std::size_t> Find(std::string_view token) const;
  bool Contains(std::string_view token) const { return Find(token).has_value(); }
  const std::string& TokenAt(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> Encode(const std::vector<std::string>& tokens) const;

  /// SHA-256 over the ordered token list; checkpoints pin it.
  std::string Hash() const;

  /// {"token","index"} records, one per line, sentinel included.
  std::string Serialize() const;
  static Vocabulary Load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

Vocabulary BuildVocab(const std::vector<CodeSnippet>& corpus,
                      const std::vector<std::string>& extra_tokens);

/// Closed label space of the surrogate, sorted.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::set<std::string>& labels);

  std::size_t size() const { return labels_.size(); }
  std::optional<std::size_t> Find(std::string_view label) const;
  const std::string& At(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::set<std::string> AsSet() const { return {labels_.begin(), labels_.end()}; }
  std::string Hash() const;

  std::string Serialize() const;
  static LabelSet Load(const std::filesystem::path& path);

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

LabelSet CollectLabels(const std::vector<CodeSnippet>& corpus);

}  // namespace advsum
