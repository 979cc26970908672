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

// Semantics-preserving transformations over flattened token streams.
//
// Two families exist. Replace sites rename an identifier token everywhere it
// occurs (or flip a boolean literal occurrence); insert sites splice a
// dead-code or print template into a statement boundary. Every
// transformation is invertible given the plan that produced it.

#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advsum/corpus.hpp"
#include "json.hpp"

namespace advsum {

enum class SiteKind {
  kRenameLocalVar,
  kRenameParam,
  kRenameField,
  kReplaceBoolLiteral,
  kInsertPrint,
  kInsertDeadCode,
};

inline constexpr SiteKind kAllSiteKinds[] = {
    SiteKind::kRenameLocalVar,     SiteKind::kRenameParam, SiteKind::kRenameField,
    SiteKind::kReplaceBoolLiteral, SiteKind::kInsertPrint, SiteKind::kInsertDeadCode,
};

std::string_view SiteKindName(SiteKind kind);
std::optional<SiteKind> ParseSiteKind(std::string_view name);

constexpr bool IsInsert(SiteKind k) {
  return k == SiteKind::kInsertPrint || k == SiteKind::kInsertDeadCode;
}

/// Number of template slots stacked at one statement boundary.
inline constexpr std::size_t kLanesPerGap = 2;

struct PerturbSite {
  SiteKind kind = SiteKind::kRenameLocalVar;
  /// Replace kinds: every position of `target`, strictly increasing.
  /// Insert kinds: a single gap index in 0..len(tokens).
  std::vector<std::size_t> anchors;
  /// Insert kinds only: templates sharing a gap are spliced in lane order.
  std::size_t lane = 0;
  /// Replace kinds only: the original token at every anchor.
  std::string target;

  std::size_t gap() const { return anchors.front(); }
  /// Offset of the optimizer-chosen token inside the site's template
  /// (always 0 for replace kinds).
  std::size_t slot_offset() const;

  bool operator==(const PerturbSite&) const = default;
  auto operator<=>(const PerturbSite&) const = default;
};

struct Assignment {
  PerturbSite site;
  std::string token;

  bool operator==(const Assignment&) const = default;
};

struct PerturbationPlan {
  std::vector<Assignment> assignments;

  bool empty() const { return assignments.empty(); }
  std::size_t size() const { return assignments.size(); }
  bool operator==(const PerturbationPlan&) const = default;
};

struct PerturbedSnippet {
  std::vector<std::string> tokens;
  PerturbationPlan plan;
  std::string origin_id;
  std::string label;
};

/// Reserved words are never renamed: the Python keyword set (both cases of
/// the constants) plus "self" and "print".
bool IsReserved(std::string_view token);
/// Letters, digits and underscores, not starting with a digit.
bool IsIdentifierToken(std::string_view token);

/// Token sequence spliced in for an insert site.
std::vector<std::string> InsertTemplate(SiteKind kind, const std::string& slot_token);

/// Gap indices after which a new statement may be inserted.
std::vector<std::size_t> StatementBoundaries(const std::vector<std::string>& tokens);

/// All replace sites plus insert sites for up to `max_insert_slots`
/// (gap, lane) slots; each slot offers one InsertDeadCode and one InsertPrint
/// site. When more slots exist than allowed, an evenly spaced subset is kept.
/// Deterministic.
std::vector<PerturbSite> ExtractSites(const CodeSnippet& snippet,
                                      std::size_t max_insert_slots = 8);

/// Whether `token` may be assigned to `site` in `snippet`: rename tokens must
/// be fresh identifiers, literal sites take "true"/"false", insert slots take
/// any non-reserved identifier.
bool TokenAllowed(const PerturbSite& site, std::string_view token,
                  const std::set<std::string, std::less<>>& snippet_tokens);

/// Throws InvalidArgument when `plan` is not applicable to `snippet`: unknown
/// site, duplicate site or slot, disallowed token, rename collision, or (when
/// `vocab` is given) a token outside the vocabulary.
void ValidatePlan(const CodeSnippet& snippet, const PerturbationPlan& plan,
                  const Vocabulary* vocab = nullptr);

PerturbedSnippet ApplyPlan(const CodeSnippet& snippet, const PerturbationPlan& plan,
                           const Vocabulary* vocab = nullptr);

/// Exact inverse of ApplyPlan. Throws InvalidArgument when the tokens do not
/// carry the plan's perturbations.
CodeSnippet StripPerturbations(const PerturbedSnippet& perturbed);

/// A program with every candidate site materialized: replace occurrences are
/// marked in place and every insert template is spliced in. A relaxed model
/// weighs template positions by the site's selection score, so the program
/// with all sites deselected evaluates like the original.
struct SlotProgram {
  static constexpr std::string_view kSlotMarker = "<slot>";

  enum class Role { kFixed, kOccurrence, kTemplate, kSlot };

  struct Position {
    std::string token;  // kSlotMarker for kSlot positions
    Role role = Role::kFixed;
    std::ptrdiff_t site = -1;  // owning site for non-fixed roles
  };

  std::vector<Position> positions;
  std::vector<PerturbSite> sites;
  /// Per site: occurrence positions (replace) or the single slot position
  /// (insert), in augmented coordinates.
  std::vector<std::vector<std::size_t>> slot_positions;

  /// Token stream obtained by keeping only the templates of assigned sites and
  /// filling every assigned slot. Matches ApplyPlan on the same assignments.
  std::vector<std::string> Realize(const PerturbationPlan& plan) const;
};

SlotProgram InstantiateSlots(const CodeSnippet& snippet,
                             const std::vector<PerturbSite>& sites);

nlohmann::ordered_json AssignmentToJson(const Assignment& a);
Assignment AssignmentFromJson(const nlohmann::json& j);

/// One {"origin_id","kind","anchors","lane","target","token"} line per
/// assignment.
std::string SerializePlanRecords(const std::string& origin_id,
                                 const PerturbationPlan& plan);

}  // namespace advsum
