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

#include "advsum/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "advsum/error.hpp"
#include "advsum/util.hpp"
#include "fixtures.hpp"

namespace advsum {
namespace {

using testing::MakeTinyInstance;

TEST(ProjectTopKTest, Basics) {
  std::vector<double> s = {0.9, 0.1, 0.5};
  EXPECT_EQ(ProjectTopK(s, 2), (std::vector<bool>{true, false, true}));
  EXPECT_EQ(ProjectTopK(s, 0), (std::vector<bool>{false, false, false}));
  EXPECT_EQ(ProjectTopK(s, 7), (std::vector<bool>{true, true, true}));
  std::vector<double> ties = {1.0, 1.0, 1.0};
  EXPECT_EQ(ProjectTopK(ties, 2), (std::vector<bool>{true, true, false}));
}

TEST(ProjectSimplexTest, Basics) {
  std::vector<double> v = {2.0, 0.0};
  EXPECT_EQ(ProjectSimplex(v), (std::vector<double>{1.0, 0.0}));
  std::vector<double> on = {0.25, 0.5, 0.25};
  auto p = ProjectSimplex(on);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], on[i], 1e-15);
  EXPECT_THROW(ProjectSimplex(std::vector<double>{}), Error);
}

TEST(ProjectCappedBoxTest, FeasibleAndOptimal) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.5, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = n(rng);
    double cap = 1.0 + trial % 3;
    auto p = ProjectCappedBox(v, cap);
    double sum = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_LE(sum, cap + 1e-9);
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    // Optimality against random feasible points.
    double dist = 0.0;
    for (std::size_t i = 0; i < 6; ++i) dist += (p[i] - v[i]) * (p[i] - v[i]);
    for (int probe = 0; probe < 100; ++probe) {
      std::vector<double> q(6);
      for (double& x : q) x = std::uniform_real_distribution<double>(0, 1)(rng);
      double qs = std::accumulate(q.begin(), q.end(), 0.0);
      if (qs > cap) for (double& x : q) x *= cap / qs;
      double dq = 0.0;
      for (std::size_t i = 0; i < 6; ++i) dq += (q[i] - v[i]) * (q[i] - v[i]);
      EXPECT_LE(dist, dq + 1e-9);
    }
  }
}

TEST(SmoothedGradientTest, ZeroSigmaIsExact) {
  GradientFn g = [](std::span<const double> x) {
    return std::vector<double>{2 * x[0], std::cos(x[1])};
  };
  std::mt19937_64 rng(1);
  std::vector<double> x = {0.3, 1.1};
  EXPECT_EQ(SmoothedGradient(g, x, 10, 0.0, rng), g(x));
  EXPECT_EQ(SmoothedGradient(g, x, 0, 0.5, rng), g(x));
}

TEST(SmoothedGradientTest, QuadraticMatchesClosedForm) {
  // f(x) = x^T A x / 2 + x_0^3; Gaussian smoothing adds 3 sigma^2 to d/dx_0.
  const double sigma = 0.3;
  GradientFn g = [](std::span<const double> x) {
    return std::vector<double>{2 * x[0] + 0.5 * x[1] + 3 * x[0] * x[0], 0.5 * x[0] + x[1]};
  };
  std::vector<double> x = {0.2, -0.4};
  std::mt19937_64 rng(7);
  const std::size_t m = 20000;
  auto est = SmoothedGradient(g, x, m, sigma, rng);
  double expect0 = 2 * x[0] + 0.5 * x[1] + 3 * (x[0] * x[0] + sigma * sigma);
  double expect1 = 0.5 * x[0] + x[1];
  // Per-draw standard deviations of each component.
  double sd0 = std::sqrt(std::pow(2 * sigma + 6 * x[0] * sigma, 2) + std::pow(0.5 * sigma, 2) +
                         18 * std::pow(sigma, 4));
  double sd1 = std::sqrt(std::pow(0.5 * sigma, 2) + sigma * sigma);
  EXPECT_NEAR(est[0], expect0, 3 * sd0 / std::sqrt(double(m)));
  EXPECT_NEAR(est[1], expect1, 3 * sd1 / std::sqrt(double(m)));
}

TEST(SmoothedGradientTest, SeededDeterminism) {
  auto inst = MakeTinyInstance(5);
  AttackProblem prob(inst.model, inst.snippet, inst.sites, inst.vocab_subset);
  AttackVars vars;
  vars.z.assign(prob.site_count(), 0.5);
  for (std::size_t s = 0; s < prob.site_count(); ++s) {
    vars.u.emplace_back(prob.candidates(s).size(), 1.0 / prob.candidates(s).size());
  }
  std::mt19937_64 a(9), b(9);
  auto ga = SmoothedGradient(prob, vars, 5, 0.1, a);
  auto gb = SmoothedGradient(prob, vars, 5, 0.1, b);
  EXPECT_EQ(ga.z, gb.z);
  EXPECT_EQ(ga.u, gb.u);
  std::mt19937_64 c(9);
  auto exact = SmoothedGradient(prob, vars, 5, 0.0, c);
  EXPECT_EQ(exact.z, prob.Gradient(vars).z);
}

AttackVars RandomVars(const AttackProblem& prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  AttackVars vars;
  for (std::size_t s = 0; s < prob.site_count(); ++s) {
    vars.z.push_back(u(rng));
    std::vector<double> w(prob.candidates(s).size());
    double sum = 0.0;
    for (double& x : w) sum += x = u(rng);
    for (double& x : w) x /= sum;
    vars.u.push_back(w);
  }
  return vars;
}

TEST(AttackProblemTest, DeselectedRelaxationEqualsCleanLoss) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = MakeTinyInstance(seed);
    AttackProblem prob(inst.model, inst.snippet, inst.sites, inst.vocab_subset);
    std::mt19937_64 rng(seed);
    AttackVars vars = RandomVars(prob, rng);
    std::fill(vars.z.begin(), vars.z.end(), 0.0);
    double clean = LossTokens(inst.model.params, inst.model.vocab.Encode(inst.snippet.tokens),
                              prob.label());
    EXPECT_NEAR(prob.RelaxedLoss(vars), clean, 1e-12);
    EXPECT_NEAR(prob.DiscreteLoss({}), clean, 1e-12);
  }
}

TEST(AttackProblemTest, RelaxationAtVertexEqualsDiscreteLoss) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = MakeTinyInstance(seed);
    AttackProblem prob(inst.model, inst.snippet, inst.sites, inst.vocab_subset);
    if (prob.site_count() == 0) continue;
    AttackVars vars;
    vars.z.assign(prob.site_count(), 0.0);
    for (std::size_t s = 0; s < prob.site_count(); ++s) {
      vars.u.emplace_back(prob.candidates(s).size(), 0.0);
      vars.u[s][0] = 1.0;
    }
    vars.z[0] = 1.0;
    auto plan = prob.MakePlan({{0, 0}});
    EXPECT_NEAR(prob.RelaxedLoss(vars), prob.DiscreteLoss(plan), 1e-12) << seed;
  }
}

TEST(AttackProblemTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto inst = MakeTinyInstance(seed);
    AttackProblem prob(inst.model, inst.snippet, inst.sites, inst.vocab_subset);
    std::mt19937_64 rng(seed + 100);
    AttackVars vars = RandomVars(prob, rng);
    auto g = prob.Gradient(vars);
    const double h = 1e-6;
    for (std::size_t s = 0; s < prob.site_count(); ++s) {
      AttackVars up = vars, down = vars;
      up.z[s] += h;
      down.z[s] -= h;
      double num = (prob.RelaxedLoss(up) - prob.RelaxedLoss(down)) / (2 * h);
      EXPECT_NEAR(g.z[s], num, 1e-6 + 1e-5 * std::abs(num));
      for (std::size_t c = 0; c < vars.u[s].size(); ++c) {
        up = vars;
        down = vars;
        up.u[s][c] += h;
        down.u[s][c] -= h;
        num = (prob.RelaxedLoss(up) - prob.RelaxedLoss(down)) / (2 * h);
        EXPECT_NEAR(g.u[s][c], num, 1e-6 + 1e-5 * std::abs(num));
      }
    }
  }
}

TEST(OptimizeTest, ZeroBudgetLeavesSnippetAlone) {
  auto inst = MakeTinyInstance(1);
  AttackConfig cfg;
  cfg.k = 0;
  cfg.candidate_tokens = inst.vocab_subset;
  auto r = Optimize(inst.model, inst.snippet, inst.sites, cfg);
  EXPECT_TRUE(r.plan.empty());
  EXPECT_EQ(r.perturbed.tokens, inst.snippet.tokens);
  EXPECT_DOUBLE_EQ(r.adv_loss, r.clean_loss);
}

TEST(OptimizeTest, NoSitesIsDegenerate) {
  auto inst = MakeTinyInstance(2);
  AttackConfig cfg;
  auto r = Optimize(inst.model, inst.snippet, {}, cfg);
  EXPECT_TRUE(r.plan.empty());
  EXPECT_DOUBLE_EQ(r.adv_loss, r.clean_loss);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(OptimizeTest, TraceAndPlanInvariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = MakeTinyInstance(seed);
    AttackConfig cfg;
    cfg.k = inst.k;
    cfg.iters = 30;
    cfg.seed = seed;
    cfg.candidate_tokens = inst.vocab_subset;
    auto r = Optimize(inst.model, inst.snippet, inst.sites, cfg);
    ASSERT_EQ(r.trace.size(), 31u);
    EXPECT_DOUBLE_EQ(r.trace.front(), r.clean_loss);
    EXPECT_TRUE(std::is_sorted(r.trace.begin(), r.trace.end()));
    EXPECT_NEAR(r.trace.back(), r.adv_loss, 1e-12);
    EXPECT_LE(r.plan.size(), inst.k);
    for (const auto& a : r.plan.assignments) EXPECT_TRUE(inst.model.vocab.Contains(a.token));
    std::size_t label = *inst.model.labels.Find(inst.snippet.label);
    EXPECT_EQ(r.success, inst.model.Classify(r.perturbed.tokens) != label);
    EXPECT_EQ(StripPerturbations(r.perturbed), inst.snippet);
    // Same seed, same answer.
    auto again = Optimize(inst.model, inst.snippet, inst.sites, cfg);
    EXPECT_EQ(again.plan, r.plan);
    EXPECT_EQ(again.trace, r.trace);
  }
}

TEST(BruteForceTest, SingleSiteSingleToken) {
  auto inst = MakeTinyInstance(4);
  std::vector<PerturbSite> one;
  for (const auto& s : ExtractSites(inst.snippet)) {
    if (IsInsert(s.kind)) { one.push_back(s); break; }
  }
  std::string tok;
  for (const auto& t : inst.vocab_subset) {
    if (t != "True" && t != "False") { tok = t; break; }
  }
  auto r = BruteForce(inst.model, inst.snippet, one, 1, {tok});
  EXPECT_EQ(r.evaluated, 2u);
  EXPECT_GE(r.loss, LossTokens(inst.model.params,
                               inst.model.vocab.Encode(inst.snippet.tokens),
                               *inst.model.labels.Find(inst.snippet.label)));
}

TEST(BruteForceTest, BudgetExceeded) {
  EXPECT_DOUBLE_EQ(BruteForceSize(1, 1, 1), 2.0);
  EXPECT_DOUBLE_EQ(BruteForceSize(4, 2, 6), 1 + 4 * 6 + 6 * 36);
  auto inst = MakeTinyInstance(4);
  auto sites = ExtractSites(inst.snippet, 100);
  std::vector<std::string> many;
  for (int i = 0; i < 200; ++i) many.push_back("v" + std::to_string(i));
  try {
    BruteForce(inst.model, inst.snippet, sites, 5, many);
    FAIL() << "expected budget error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudget);
  }
}

TEST(BruteForceTest, OptimizeNeverBeatsOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = MakeTinyInstance(seed);
    AttackConfig cfg;
    cfg.k = inst.k;
    cfg.iters = 20;
    cfg.seed = seed;
    cfg.candidate_tokens = inst.vocab_subset;
    auto r = Optimize(inst.model, inst.snippet, inst.sites, cfg);
    auto bf = BruteForce(inst.model, inst.snippet, inst.sites, inst.k, inst.vocab_subset);
    EXPECT_LE(r.adv_loss, bf.loss + 1e-12);
    EXPECT_GE(bf.loss, r.clean_loss);
  }
}

TEST(AttackCorpusTest, EmptyAndErrors) {
  auto inst = MakeTinyInstance(3);
  AttackConfig cfg;
  EXPECT_TRUE(AttackCorpus(inst.model, {}, cfg).empty());
  CodeSnippet unknown = inst.snippet;
  unknown.label = "nope";
  cfg.iters = 5;
  cfg.candidate_tokens = inst.vocab_subset;
  auto results = AttackCorpus(inst.model, {unknown, inst.snippet}, cfg);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_TRUE(results[0].error.has_value());
  EXPECT_FALSE(results[1].error.has_value());
  cfg.threads = 2;
  auto threaded = AttackCorpus(inst.model, {unknown, inst.snippet}, cfg);
  EXPECT_EQ(threaded[1].plan, results[1].plan);
}

TEST(AttackCorpusTest, FileRoundTrip) {
  auto inst = MakeTinyInstance(6);
  AttackConfig cfg;
  cfg.iters = 5;
  cfg.candidate_tokens = inst.vocab_subset;
  CodeSnippet unknown = inst.snippet;
  unknown.id = "bad";
  unknown.label = "nope";
  auto results = AttackCorpus(inst.model, {inst.snippet, unknown}, cfg);
  auto path = std::filesystem::temp_directory_path() / "advsum_attack_roundtrip.jsonl";
  WriteFile(path, SerializeAttackResults(results));
  auto back = LoadAttackFile(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].origin_id, inst.snippet.id);
  EXPECT_EQ(back[0].plan, results[0].plan);
  EXPECT_EQ(back[0].perturbed_code, Join(results[0].perturbed.tokens, " "));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace advsum
