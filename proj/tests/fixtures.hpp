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

// Seeded generators shared by unit and acceptance tests.

#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "advsum/attack.hpp"
#include "advsum/corpus.hpp"
#include "advsum/surrogate.hpp"
#include "advsum/transforms.hpp"

namespace advsum::testing {

inline const std::vector<std::string>& TinyCodes() {
  static const std::vector<std::string> codes = {
      "( a b ) : c = a + b return c",
      "( self x ) : self . x = x",
      "( n ) : if n : return True return False",
      "( items ) : total = 0 for i in items : total = total + i return total",
      "( self ) : print ( self . name ) return None",
      "( path ) : f = open ( path ) data = f . read ( ) return data",
  };
  return codes;
}

/// Random classifier over `vocab` with `labels` classes.
inline ModelParams RandomParams(std::size_t vocab, std::size_t labels, std::uint64_t seed,
                                std::size_t d = 6, std::size_t h = 5, double scale = 1.0) {
  TrainConfig cfg;
  cfg.embed_dim = d;
  cfg.hidden_dim = h;
  cfg.seed = seed;
  cfg.init_scale = scale;
  return InitParams(vocab, labels, cfg);
}

/// Random plan over `sites` with at most `max_assign` assignments, drawing
/// tokens from `pool` (which must hold fresh identifiers).
inline PerturbationPlan RandomPlan(const CodeSnippet& s, const std::vector<PerturbSite>& sites,
                                   const std::vector<std::string>& pool, std::size_t max_assign,
                                   std::mt19937_64& rng) {
  std::vector<std::size_t> order(sites.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t want = std::uniform_int_distribution<std::size_t>(0, max_assign)(rng);
  std::set<std::string, std::less<>> present(s.tokens.begin(), s.tokens.end());
  std::set<std::pair<std::size_t, std::size_t>> slots;
  std::set<std::string> renames;
  PerturbationPlan plan;
  for (std::size_t i : order) {
    if (plan.size() == want) break;
    const auto& site = sites[i];
    if (IsInsert(site.kind) && slots.count({site.gap(), site.lane})) continue;
    std::vector<std::string> ok;
    for (const auto& t : pool) {
      if (!TokenAllowed(site, t, present)) continue;
      bool rename = !IsInsert(site.kind) && site.kind != SiteKind::kReplaceBoolLiteral;
      if (rename && renames.count(t)) continue;
      ok.push_back(t);
    }
    if (ok.empty()) continue;
    std::string tok = ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    if (IsInsert(site.kind)) slots.insert({site.gap(), site.lane});
    if (!IsInsert(site.kind) && site.kind != SiteKind::kReplaceBoolLiteral) renames.insert(tok);
    plan.assignments.push_back({site, tok});
  }
  return plan;
}

/// A tiny attack instance: n <= 4 sites, |vocab_subset| <= 6, k <= 2.
struct TinyInstance {
  SurrogateModel model;
  CodeSnippet snippet;
  std::vector<PerturbSite> sites;
  std::vector<std::string> vocab_subset;
  std::size_t k = 1;
};

inline TinyInstance MakeTinyInstance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& codes = TinyCodes();
  TinyInstance inst;
  std::string code = codes[rng() % codes.size()];
  std::vector<std::string> labels = {"add", "init", "check", "total"};
  inst.snippet = MakeSnippet("tiny" + std::to_string(seed), code, labels[rng() % labels.size()]);

  std::vector<std::string> fresh = {"p", "q", "r", "s", "t", "w", "True", "False"};
  std::shuffle(fresh.begin(), fresh.end(), rng);
  std::size_t m = 3 + rng() % 4;
  inst.vocab_subset.assign(fresh.begin(), fresh.begin() + m);

  auto sites = ExtractSites(inst.snippet, 4);
  std::shuffle(sites.begin(), sites.end(), rng);
  std::size_t n = std::min<std::size_t>(sites.size(), 1 + rng() % 4);
  inst.sites.assign(sites.begin(), sites.begin() + n);
  std::sort(inst.sites.begin(), inst.sites.end());
  inst.k = 1 + rng() % 2;

  std::set<std::string> toks(inst.snippet.tokens.begin(), inst.snippet.tokens.end());
  toks.insert(inst.vocab_subset.begin(), inst.vocab_subset.end());
  toks.insert({"if", "false", ":", "=", "1", "print", "(", ")"});
  inst.model.vocab = Vocabulary(toks);
  inst.model.labels = LabelSet({labels.begin(), labels.end()});
  inst.model.params = RandomParams(inst.model.vocab.size(), labels.size(), seed ^ 0x5eed, 6, 5,
                                   1.5);
  return inst;
}

}  // namespace advsum::testing
