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

// First-order attack on the surrogate.
//
// The discrete problem picks at most k sites (z in {0,1}^n) and one token per
// site (u_i one-hot) to maximize the cross-entropy of the true label. We relax
// z to [0,1]^n with sum(z) <= k and each u_i to the probability simplex, run
// projected gradient ascent with Gaussian-smoothed gradients, and round to a
// discrete plan every iteration, keeping the best plan seen.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advsum/corpus.hpp"
#include "advsum/surrogate.hpp"
#include "advsum/transforms.hpp"

namespace advsum {

struct AttackConfig {
  std::size_t k = 5;
  std::size_t iters = 100;
  double step = 0.5;
  std::size_t smooth_samples = 10;  // 0 disables smoothing
  double smooth_sigma = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_insert_slots = 8;
  /// Tokens the optimizer may place; empty means the whole vocabulary.
  std::vector<std::string> candidate_tokens;
  /// Worker threads for AttackCorpus.
  std::size_t threads = 1;
};

/// Relaxed optimization state. u[i] is a distribution over the candidate
/// tokens of site i (AttackProblem::candidates[i]); coordinates outside the
/// candidate list are implicitly zero.
struct AttackVars {
  std::vector<double> z;
  std::vector<std::vector<double>> u;
};

struct AttackGradient {
  std::vector<double> z;
  std::vector<std::vector<double>> u;
};

/// Everything the optimizer needs about one snippet.
class AttackProblem {
 public:
  /// Sites with no admissible candidate token are dropped.
  AttackProblem(const SurrogateModel& model, const CodeSnippet& snippet,
                const std::vector<PerturbSite>& sites,
                const std::vector<std::string>& candidate_tokens = {});

  const SlotProgram& program() const { return program_; }
  const std::vector<PerturbSite>& sites() const { return program_.sites; }
  std::size_t site_count() const { return program_.sites.size(); }
  /// Vocabulary ids a site may take.
  const std::vector<std::size_t>& candidates(std::size_t site) const {
    return candidates_[site];
  }
  std::size_t label() const { return label_; }
  const CodeSnippet& snippet() const { return snippet_; }
  const SurrogateModel& model() const { return *model_; }

  /// Mixture input: replace occurrences become (1-z) onehot + z u, template
  /// rows get pooling weight z.
  RelaxedInput Relax(const AttackVars& vars) const;
  double RelaxedLoss(const AttackVars& vars) const;
  /// Exact gradient of the relaxed loss with respect to (z, u).
  AttackGradient Gradient(const AttackVars& vars) const;

  /// Cross-entropy of the true label on the discrete program.
  double DiscreteLoss(const PerturbationPlan& plan) const;
  PerturbationPlan MakePlan(const std::vector<std::pair<std::size_t, std::size_t>>&
                                site_and_candidate) const;

 private:
  const SurrogateModel* model_;
  CodeSnippet snippet_;
  SlotProgram program_;
  std::vector<std::vector<std::size_t>> candidates_;
  std::vector<std::size_t> position_ids_;  // vocabulary id of each program position
  std::size_t label_ = 0;
};

/// Indicator of the min(k, n) largest scores; ties go to the lower index.
std::vector<bool> ProjectTopK(std::span<const double> scores, std::size_t k);

/// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> ProjectSimplex(std::span<const double> v);

/// Euclidean projection onto {x in [0,1]^n : sum(x) <= cap}.
std::vector<double> ProjectCappedBox(std::span<const double> v, double cap);

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Mean of `grad` evaluated at x + sigma * N(0, I), over `samples` draws.
/// sigma == 0 or samples == 0 returns grad(x) exactly.
std::vector<double> SmoothedGradient(const GradientFn& grad, std::span<const double> x,
                                     std::size_t samples, double sigma,
                                     std::mt19937_64& rng);

/// Smoothed gradient of the attack objective. Each noisy draw is projected
/// back onto the feasible set before the gradient is taken.
AttackGradient SmoothedGradient(const AttackProblem& problem, const AttackVars& vars,
                                std::size_t samples, double sigma, std::mt19937_64& rng);

struct AttackResult {
  std::string origin_id;
  PerturbationPlan plan;
  PerturbedSnippet perturbed;
  double clean_loss = 0.0;
  double adv_loss = 0.0;
  bool success = false;
  /// Best-so-far discrete loss; entry 0 is the clean loss.
  std::vector<double> trace;
  /// Set when the snippet could not be attacked.
  std::optional<std::string> error;
};

AttackResult Optimize(const SurrogateModel& model, const CodeSnippet& snippet,
                      const std::vector<PerturbSite>& sites, const AttackConfig& config);

struct BruteForceResult {
  PerturbationPlan plan;
  double loss = 0.0;
  std::size_t evaluated = 0;
};

/// Number of (subset, assignment) pairs BruteForce would visit before
/// validity filtering.
double BruteForceSize(std::size_t sites, std::size_t k, std::size_t vocab_subset);

/// Exhaustive maximizer of the discrete loss over every valid plan with at
/// most k assignments drawn from `vocab_subset`. Throws ErrorCode::kBudget when
/// the search space exceeds 1e6 candidates.
BruteForceResult BruteForce(const SurrogateModel& model, const CodeSnippet& snippet,
                            const std::vector<PerturbSite>& sites, std::size_t k,
                            const std::vector<std::string>& vocab_subset);

/// Attacks every snippet independently; the per-snippet seed mixes
/// `config.seed` with the snippet id. Failures are recorded on the result.
std::vector<AttackResult> AttackCorpus(const SurrogateModel& model,
                                       const std::vector<CodeSnippet>& snippets,
                                       const AttackConfig& config);

/// One attack-file record as read back from disk.
struct AttackRecord {
  std::string origin_id;
  PerturbationPlan plan;
  std::string perturbed_code;
  double clean_loss = 0.0;
  double adv_loss = 0.0;
  bool success = false;
};

/// Newline-delimited {origin_id, plan, perturbed_code, clean_loss, adv_loss,
/// success} records. Failed attacks are written with an "error" field.
/// On load only origin_id and perturbed_code are required.
std::string SerializeAttackResults(const std::vector<AttackResult>& results);
std::vector<AttackRecord> LoadAttackFile(const std::filesystem::path& path);

}  // namespace advsum
