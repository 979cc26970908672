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

#include "advsum/transforms.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <map>

#include "advsum/error.hpp"

namespace advsum {
namespace {

constexpr std::array<std::string_view, 6> kKindNames = {
    "rename_local_var",     "rename_param",  "rename_field",
    "replace_bool_literal", "insert_print",  "insert_dead_code",
};

// Python keywords, lowercase as they appear in the flattened corpus, plus
// the capitalized constants.
const std::set<std::string, std::less<>>& ReservedWords() {
  static const std::set<std::string, std::less<>> kWords = {
      "and",    "as",     "assert", "async",    "await",  "break",  "class",
      "continue", "def",  "del",    "elif",     "else",   "except", "false",
      "finally", "for",   "from",   "global",   "if",     "import", "in",
      "is",     "lambda", "none",   "nonlocal", "not",    "or",     "pass",
      "raise",  "return", "true",   "try",      "while",  "with",   "yield",
      "False",  "None",   "True",   "self",     "print",
  };
  return kWords;
}

const std::set<std::string, std::less<>>& StatementKeywords() {
  static const std::set<std::string, std::less<>> kWords = {
      "self",   "if",    "elif",   "else",     "for",    "while",  "return",
      "print",  "del",   "pass",   "break",    "continue", "try", "except",
      "finally", "with", "raise",  "yield",    "assert", "import", "from",
      "def",    "class", "global", "nonlocal",
  };
  return kWords;
}

// Statements that are complete without an assignment or call.
const std::set<std::string, std::less<>>& SimpleStatementKeywords() {
  static const std::set<std::string, std::less<>> kWords = {
      "return", "pass",   "break", "continue", "del",    "raise",
      "yield",  "assert", "import", "from",    "global", "nonlocal",
  };
  return kWords;
}

bool IsOpen(std::string_view t) { return t == "(" || t == "[" || t == "{"; }
bool IsClose(std::string_view t) { return t == ")" || t == "]" || t == "}"; }
bool IsBoolLiteral(std::string_view t) {
  return t == "true" || t == "false" || t == "True" || t == "False";
}
bool IsRenameable(std::string_view t) { return IsIdentifierToken(t) && !IsReserved(t); }

struct Header {
  bool present = false;
  std::size_t close = 0;       // index of the ')' closing the parameter list
  std::size_t body_start = 0;  // first token after the header colon
};

Header FindHeader(const std::vector<std::string>& tokens) {
  Header h;
  if (tokens.empty() || tokens[0] != "(") return h;
  int depth = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (IsOpen(tokens[i])) ++depth;
    if (IsClose(tokens[i]) && --depth == 0) {
      h.present = true;
      h.close = i;
      h.body_start = i + 1;
      if (h.body_start < tokens.size() && tokens[h.body_start] == ":") ++h.body_start;
      return h;
    }
  }
  return h;
}

bool StartsStatement(const std::vector<std::string>& tokens, std::size_t k) {
  if (StatementKeywords().count(tokens[k])) return true;
  return IsRenameable(tokens[k]) && k + 1 < tokens.size() && tokens[k + 1] == "=";
}

bool IsTemplateFalse(const std::vector<std::string>& tokens, std::size_t i) {
  return tokens[i] == "false" && i > 0 && tokens[i - 1] == "if" &&
         i + 1 < tokens.size() && tokens[i + 1] == ":";
}

// Classifies identifier tokens into rename kinds. Priority when a token plays
// several roles: parameter, then field, then local variable.
std::map<std::string, SiteKind> ClassifyIdentifiers(
    const std::vector<std::string>& tokens) {
  std::map<std::string, SiteKind> kinds;
  auto rank = [](SiteKind kind) {
    switch (kind) {
      case SiteKind::kRenameParam: return 3;
      case SiteKind::kRenameField: return 2;
      default: return 1;
    }
  };
  auto mark = [&](const std::string& t, SiteKind k) {
    auto it = kinds.find(t);
    if (it == kinds.end()) {
      kinds.emplace(t, k);
    } else if (rank(k) > rank(it->second)) {
      it->second = k;
    }
  };

  Header header = FindHeader(tokens);
  if (header.present) {
    for (std::size_t i = 1; i < header.close; ++i) {
      if (IsRenameable(tokens[i])) mark(tokens[i], SiteKind::kRenameParam);
    }
  }
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] != "self" || tokens[i + 1] != ".") continue;
    for (std::size_t j = i + 2; j < tokens.size() && IsRenameable(tokens[j]); ++j) {
      mark(tokens[j], SiteKind::kRenameField);
    }
  }
  int depth = 0;
  for (std::size_t i = header.body_start; i < tokens.size(); ++i) {
    if (IsOpen(tokens[i])) ++depth;
    if (IsClose(tokens[i]) && depth > 0) --depth;
    if (tokens[i] != "=" || depth != 0) continue;
    std::size_t j = i;
    std::vector<std::size_t> run;
    while (j > header.body_start && IsRenameable(tokens[j - 1])) {
      run.push_back(j - 1);
      --j;
    }
    // `obj . attr =` assigns an attribute, not a local.
    if (j > 0 && tokens[j - 1] == ".") continue;
    for (std::size_t p : run) mark(tokens[p], SiteKind::kRenameLocalVar);
  }
  return kinds;
}

std::vector<PerturbSite> ReplaceSites(const std::vector<std::string>& tokens) {
  auto kinds = ClassifyIdentifiers(tokens);
  std::vector<PerturbSite> sites;
  std::map<std::string, std::size_t> by_token;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (IsBoolLiteral(t)) {
      if (IsTemplateFalse(tokens, i)) continue;
      sites.push_back(PerturbSite{SiteKind::kReplaceBoolLiteral, {i}, 0, t});
      continue;
    }
    auto k = kinds.find(t);
    if (k == kinds.end()) continue;
    auto [it, inserted] = by_token.emplace(t, sites.size());
    if (inserted) {
      sites.push_back(PerturbSite{k->second, {i}, 0, t});
    } else {
      sites[it->second].anchors.push_back(i);
    }
  }
  return sites;
}

std::vector<PerturbSite> InsertSites(const std::vector<std::string>& tokens,
                                     std::size_t max_slots) {
  auto gaps = StatementBoundaries(tokens);
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (gap, lane)
  for (std::size_t lane = 0; lane < kLanesPerGap; ++lane) {
    for (std::size_t g : gaps) slots.emplace_back(g, lane);
  }
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  if (slots.size() <= max_slots) {
    kept = slots;
  } else {
    for (std::size_t i = 0; i < max_slots; ++i) {
      kept.push_back(slots[i * slots.size() / max_slots]);
    }
  }
  std::sort(kept.begin(), kept.end());
  std::vector<PerturbSite> sites;
  for (auto [gap, lane] : kept) {
    sites.push_back(PerturbSite{SiteKind::kInsertDeadCode, {gap}, lane, ""});
    sites.push_back(PerturbSite{SiteKind::kInsertPrint, {gap}, lane, ""});
  }
  return sites;
}

std::vector<const Assignment*> SortedInserts(const PerturbationPlan& plan) {
  std::vector<const Assignment*> inserts;
  for (const auto& a : plan.assignments) {
    if (IsInsert(a.site.kind)) inserts.push_back(&a);
  }
  std::sort(inserts.begin(), inserts.end(), [](const Assignment* x, const Assignment* y) {
    return std::pair(x->site.gap(), x->site.lane) < std::pair(y->site.gap(), y->site.lane);
  });
  return inserts;
}

}  // namespace

std::string_view SiteKindName(SiteKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<SiteKind> ParseSiteKind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<SiteKind>(i);
  }
  return std::nullopt;
}

std::size_t PerturbSite::slot_offset() const {
  switch (kind) {
    case SiteKind::kInsertDeadCode: return 3;  // if false : <slot> = 1
    case SiteKind::kInsertPrint: return 2;     // print ( <slot> )
    default: return 0;
  }
}

bool IsReserved(std::string_view token) { return ReservedWords().count(token) > 0; }

bool IsIdentifierToken(std::string_view token) {
  if (token.empty()) return false;
  auto first = static_cast<unsigned char>(token.front());
  if (!(std::isalpha(first) || first == '_')) return false;
  return std::all_of(token.begin(), token.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

std::vector<std::string> InsertTemplate(SiteKind kind, const std::string& slot_token) {
  switch (kind) {
    case SiteKind::kInsertDeadCode: return {"if", "false", ":", slot_token, "=", "1"};
    case SiteKind::kInsertPrint: return {"print", "(", slot_token, ")"};
    default: throw InvalidArgument("not an insert kind");
  }
}

std::vector<std::size_t> StatementBoundaries(const std::vector<std::string>& tokens) {
  std::vector<std::size_t> gaps;
  Header header = FindHeader(tokens);
  std::size_t start = 0;
  if (header.present) {
    start = header.body_start;
    if (start > header.close + 1) gaps.push_back(start);  // after the header colon
  }
  int depth = 0;
  bool complete = false;
  bool fresh = true;
  for (std::size_t j = start; j < tokens.size(); ++j) {
    const auto& t = tokens[j];
    if (fresh) {
      complete = SimpleStatementKeywords().count(t) > 0;
      fresh = false;
    }
    if (IsOpen(t)) ++depth;
    if (IsClose(t) && depth > 0 && --depth == 0) complete = true;
    if (t == "=" && depth == 0) complete = true;
    if (depth != 0) continue;
    bool end = t == ":" ||
               (complete && (j + 1 == tokens.size() || StartsStatement(tokens, j + 1)));
    if (end) {
      if (gaps.empty() || gaps.back() != j + 1) gaps.push_back(j + 1);
      complete = false;
      fresh = true;
    }
  }
  return gaps;
}

std::vector<PerturbSite> ExtractSites(const CodeSnippet& snippet,
                                      std::size_t max_insert_slots) {
  auto sites = ReplaceSites(snippet.tokens);
  auto inserts = InsertSites(snippet.tokens, max_insert_slots);
  sites.insert(sites.end(), inserts.begin(), inserts.end());
  return sites;
}

bool TokenAllowed(const PerturbSite& site, std::string_view token,
                  const std::set<std::string, std::less<>>& snippet_tokens) {
  switch (site.kind) {
    case SiteKind::kReplaceBoolLiteral: {
      bool upper = !site.target.empty() &&
                   std::isupper(static_cast<unsigned char>(site.target[0]));
      return upper ? (token == "True" || token == "False")
                   : (token == "true" || token == "false");
    }
    case SiteKind::kInsertPrint:
    case SiteKind::kInsertDeadCode:
      return IsRenameable(token);
    default:
      return IsRenameable(token) && snippet_tokens.count(token) == 0;
  }
}

void ValidatePlan(const CodeSnippet& snippet, const PerturbationPlan& plan,
                  const Vocabulary* vocab) {
  auto catalog = ExtractSites(snippet, std::numeric_limits<std::size_t>::max());
  std::set<PerturbSite> known(catalog.begin(), catalog.end());
  std::set<std::string, std::less<>> present(snippet.tokens.begin(), snippet.tokens.end());
  std::set<PerturbSite> used_sites;
  std::set<std::pair<std::size_t, std::size_t>> used_slots;
  std::set<std::string> rename_tokens;
  for (const auto& a : plan.assignments) {
    const auto& site = a.site;
    if (!known.count(site)) {
      throw InvalidArgument("site " + std::string(SiteKindName(site.kind)) + "@" +
                            std::to_string(site.anchors.empty() ? 0 : site.anchors[0]) +
                            " is not a site of '" + snippet.id + "'");
    }
    if (!used_sites.insert(site).second) throw InvalidArgument("site assigned twice");
    if (IsInsert(site.kind) && !used_slots.emplace(site.gap(), site.lane).second) {
      throw InvalidArgument("two templates assigned to one insert slot");
    }
    if (vocab && !vocab->Contains(a.token)) {
      throw InvalidArgument("token '" + a.token + "' is not in the vocabulary");
    }
    if (!TokenAllowed(site, a.token, present)) {
      throw InvalidArgument("token '" + a.token + "' not allowed at " +
                            std::string(SiteKindName(site.kind)) + " site");
    }
    if (!IsInsert(site.kind) && site.kind != SiteKind::kReplaceBoolLiteral &&
        !rename_tokens.insert(a.token).second) {
      throw InvalidArgument("two renames share token '" + a.token + "'");
    }
  }
}

PerturbedSnippet ApplyPlan(const CodeSnippet& snippet, const PerturbationPlan& plan,
                           const Vocabulary* vocab) {
  ValidatePlan(snippet, plan, vocab);
  std::vector<std::string> out = snippet.tokens;
  for (const auto& a : plan.assignments) {
    if (IsInsert(a.site.kind)) continue;
    for (std::size_t pos : a.site.anchors) out[pos] = a.token;
  }
  auto inserts = SortedInserts(plan);
  for (auto it = inserts.rbegin(); it != inserts.rend(); ++it) {
    auto tmpl = InsertTemplate((*it)->site.kind, (*it)->token);
    out.insert(out.begin() + static_cast<std::ptrdiff_t>((*it)->site.gap()), tmpl.begin(),
               tmpl.end());
  }
  return PerturbedSnippet{std::move(out), plan, snippet.id, snippet.label};
}

CodeSnippet StripPerturbations(const PerturbedSnippet& perturbed) {
  std::vector<std::string> tokens = perturbed.tokens;
  auto inserts = SortedInserts(perturbed.plan);
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (position, length)
  std::size_t shift = 0;
  for (const Assignment* a : inserts) {
    auto tmpl = InsertTemplate(a->site.kind, a->token);
    std::size_t pos = a->site.gap() + shift;
    if (pos + tmpl.size() > tokens.size() ||
        !std::equal(tmpl.begin(), tmpl.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
      throw InvalidArgument("perturbed tokens do not contain the planned " +
                            std::string(SiteKindName(a->site.kind)) + " at gap " +
                            std::to_string(a->site.gap()));
    }
    spans.emplace_back(pos, tmpl.size());
    shift += tmpl.size();
  }
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    auto first = tokens.begin() + static_cast<std::ptrdiff_t>(it->first);
    tokens.erase(first, first + static_cast<std::ptrdiff_t>(it->second));
  }
  for (const auto& a : perturbed.plan.assignments) {
    if (IsInsert(a.site.kind)) continue;
    for (std::size_t pos : a.site.anchors) {
      if (pos >= tokens.size() || tokens[pos] != a.token) {
        throw InvalidArgument("perturbed tokens do not carry rename '" + a.token + "'");
      }
      tokens[pos] = a.site.target;
    }
  }
  return CodeSnippet{perturbed.origin_id, std::move(tokens), perturbed.label};
}

SlotProgram InstantiateSlots(const CodeSnippet& snippet,
                             const std::vector<PerturbSite>& sites) {
  const auto& tokens = snippet.tokens;
  SlotProgram prog;
  prog.sites = sites;
  prog.slot_positions.resize(sites.size());

  std::vector<std::ptrdiff_t> owner(tokens.size(), -1);
  std::map<std::size_t, std::vector<std::size_t>> inserts_at;  // gap -> site ids
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto& site = sites[s];
    if (site.anchors.empty()) throw InvalidArgument("site without anchors");
    if (IsInsert(site.kind)) {
      if (site.gap() > tokens.size()) throw InvalidArgument("insert gap out of range");
      inserts_at[site.gap()].push_back(s);
      continue;
    }
    for (std::size_t pos : site.anchors) {
      if (pos >= tokens.size()) throw InvalidArgument("replace anchor out of range");
      if (owner[pos] != -1) throw InvalidArgument("overlapping replace occurrence lists");
      owner[pos] = static_cast<std::ptrdiff_t>(s);
    }
  }
  for (auto& [gap, ids] : inserts_at) {
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      auto key = [&](std::size_t s) {
        return std::pair(sites[s].lane, sites[s].kind == SiteKind::kInsertPrint);
      };
      return key(a) < key(b);
    });
  }

  auto emit_templates = [&](std::size_t gap) {
    auto it = inserts_at.find(gap);
    if (it == inserts_at.end()) return;
    for (std::size_t s : it->second) {
      auto tmpl = InsertTemplate(sites[s].kind, std::string(SlotProgram::kSlotMarker));
      for (std::size_t k = 0; k < tmpl.size(); ++k) {
        bool slot = k == sites[s].slot_offset();
        if (slot) prog.slot_positions[s].push_back(prog.positions.size());
        prog.positions.push_back({tmpl[k],
                                  slot ? SlotProgram::Role::kSlot : SlotProgram::Role::kTemplate,
                                  static_cast<std::ptrdiff_t>(s)});
      }
    }
  };
  for (std::size_t i = 0; i <= tokens.size(); ++i) {
    emit_templates(i);
    if (i == tokens.size()) break;
    if (owner[i] >= 0) {
      prog.slot_positions[static_cast<std::size_t>(owner[i])].push_back(prog.positions.size());
      prog.positions.push_back({tokens[i], SlotProgram::Role::kOccurrence, owner[i]});
    } else {
      prog.positions.push_back({tokens[i], SlotProgram::Role::kFixed, -1});
    }
  }
  return prog;
}

std::vector<std::string> SlotProgram::Realize(const PerturbationPlan& plan) const {
  std::vector<const std::string*> chosen(sites.size(), nullptr);
  for (const auto& a : plan.assignments) {
    auto it = std::find(sites.begin(), sites.end(), a.site);
    if (it == sites.end()) throw InvalidArgument("assignment to a site outside the program");
    chosen[static_cast<std::size_t>(it - sites.begin())] = &a.token;
  }
  std::vector<std::string> out;
  out.reserve(positions.size());
  for (const auto& p : positions) {
    const std::string* tok = p.site >= 0 ? chosen[static_cast<std::size_t>(p.site)] : nullptr;
    switch (p.role) {
      case Role::kFixed: out.push_back(p.token); break;
      case Role::kOccurrence: out.push_back(tok ? *tok : p.token); break;
      case Role::kTemplate:
        if (tok) out.push_back(p.token);
        break;
      case Role::kSlot:
        if (tok) out.push_back(*tok);
        break;
    }
  }
  return out;
}

nlohmann::ordered_json AssignmentToJson(const Assignment& a) {
  nlohmann::ordered_json j;
  j["kind"] = SiteKindName(a.site.kind);
  j["anchors"] = a.site.anchors;
  j["lane"] = a.site.lane;
  j["target"] = a.site.target;
  j["token"] = a.token;
  return j;
}

Assignment AssignmentFromJson(const nlohmann::json& j) {
  try {
    auto kind = ParseSiteKind(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("unknown site kind " + j.at("kind").dump());
    Assignment a;
    a.site.kind = *kind;
    a.site.anchors = j.at("anchors").get<std::vector<std::size_t>>();
    a.site.lane = j.value("lane", std::size_t{0});
    a.site.target = j.value("target", std::string());
    a.token = j.at("token").get<std::string>();
    if (a.site.anchors.empty()) throw ParseError("assignment without anchors");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed plan assignment: ") + e.what());
  }
}

std::string SerializePlanRecords(const std::string& origin_id,
                                 const PerturbationPlan& plan) {
  std::string out;
  for (const auto& a : plan.assignments) {
    nlohmann::ordered_json rec;
    rec["origin_id"] = origin_id;
    for (auto& [k, v] : AssignmentToJson(a).items()) rec[k] = v;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace advsum
