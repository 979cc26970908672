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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "advsum/error.hpp"
#include "advsum/util.hpp"
#include "json.hpp"

namespace advsum {
namespace {

constexpr double kBruteForceBudget = 1e6;

// Indices sorted by descending value, ties by ascending index.
std::vector<std::size_t> DescendingOrder(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

void ScaledAdd(std::vector<double>& x, const std::vector<double>& g, double step) {
  double mx = 0.0;
  for (double gi : g) mx = std::max(mx, std::abs(gi));
  if (mx == 0.0) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * g[i] / mx;
}

bool IsRename(SiteKind k) { return !IsInsert(k) && k != SiteKind::kReplaceBoolLiteral; }

}  // namespace

std::vector<bool> ProjectTopK(std::span<const double> scores, std::size_t k) {
  std::vector<bool> out(scores.size(), false);
  auto order = DescendingOrder(scores);
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out[order[i]] = true;
  return out;
}

std::vector<double> ProjectSimplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("cannot project an empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

std::vector<double> ProjectCappedBox(std::span<const double> v, double cap) {
  auto clipped = [&](double tau) {
    std::vector<double> x(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::clamp(v[i] - tau, 0.0, 1.0);
    return x;
  };
  auto sum = [](const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0);
  };
  auto x = clipped(0.0);
  if (sum(x) <= cap) return x;
  // sum(clip(v - tau)) is non-increasing in tau; bisect for sum == cap.
  double lo = 0.0;
  double hi = *std::max_element(v.begin(), v.end());
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    if (sum(clipped(mid)) > cap) lo = mid; else hi = mid;
  }
  return clipped(hi);
}

std::vector<double> SmoothedGradient(const GradientFn& grad, std::span<const double> x,
                                     std::size_t samples, double sigma,
                                     std::mt19937_64& rng) {
  if (samples == 0 || sigma == 0.0) return grad(x);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> acc(x.size(), 0.0);
  std::vector<double> point(x.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + sigma * noise(rng);
    auto g = grad(point);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  for (double& a : acc) a /= static_cast<double>(samples);
  return acc;
}

AttackProblem::AttackProblem(const SurrogateModel& model, const CodeSnippet& snippet,
                             const std::vector<PerturbSite>& sites,
                             const std::vector<std::string>& candidate_tokens)
    : model_(&model), snippet_(snippet) {
  auto label = model.labels.Find(snippet.label);
  if (!label) throw InvalidArgument("label '" + snippet.label + "' unknown to the surrogate");
  label_ = *label;

  std::vector<std::size_t> pool;
  if (candidate_tokens.empty()) {
    pool.resize(model.vocab.size() - 1);
    std::iota(pool.begin(), pool.end(), 1);
  } else {
    std::set<std::size_t> ids;
    for (const auto& t : candidate_tokens) {
      if (auto id = model.vocab.Find(t)) ids.insert(*id);
    }
    pool.assign(ids.begin(), ids.end());
  }
  std::set<std::string, std::less<>> present(snippet.tokens.begin(), snippet.tokens.end());
  std::vector<PerturbSite> kept;
  for (const auto& site : sites) {
    std::vector<std::size_t> cands;
    for (std::size_t id : pool) {
      if (TokenAllowed(site, model.vocab.TokenAt(id), present)) cands.push_back(id);
    }
    if (cands.empty()) continue;
    kept.push_back(site);
    candidates_.push_back(std::move(cands));
  }
  program_ = InstantiateSlots(snippet, kept);
  position_ids_.reserve(program_.positions.size());
  for (const auto& p : program_.positions) {
    position_ids_.push_back(p.role == SlotProgram::Role::kSlot ? 0 : model.vocab.Lookup(p.token));
  }
}

RelaxedInput AttackProblem::Relax(const AttackVars& vars) const {
  using Role = SlotProgram::Role;
  RelaxedInput in;
  in.rows.reserve(program_.positions.size());
  in.weights.reserve(program_.positions.size());
  for (std::size_t p = 0; p < program_.positions.size(); ++p) {
    const auto& pos = program_.positions[p];
    auto s = static_cast<std::size_t>(pos.site);
    SparseRow row;
    double weight = 1.0;
    switch (pos.role) {
      case Role::kFixed:
        row.emplace_back(position_ids_[p], 1.0);
        break;
      case Role::kOccurrence: {
        double z = vars.z[s];
        row.emplace_back(position_ids_[p], 1.0 - z);
        for (std::size_t c = 0; c < candidates_[s].size(); ++c) {
          if (vars.u[s][c] != 0.0) row.emplace_back(candidates_[s][c], z * vars.u[s][c]);
        }
        break;
      }
      case Role::kTemplate:
        row.emplace_back(position_ids_[p], 1.0);
        weight = vars.z[s];
        break;
      case Role::kSlot:
        for (std::size_t c = 0; c < candidates_[s].size(); ++c) {
          if (vars.u[s][c] != 0.0) row.emplace_back(candidates_[s][c], vars.u[s][c]);
        }
        weight = vars.z[s];
        break;
    }
    in.rows.push_back(std::move(row));
    in.weights.push_back(weight);
  }
  return in;
}

double AttackProblem::RelaxedLoss(const AttackVars& vars) const {
  return Loss(model_->params, Relax(vars), label_);
}

AttackGradient AttackProblem::Gradient(const AttackVars& vars) const {
  using Role = SlotProgram::Role;
  InputGradient g = GradInput(model_->params, Relax(vars), label_);
  AttackGradient out;
  out.z.assign(site_count(), 0.0);
  out.u.resize(site_count());
  for (std::size_t s = 0; s < site_count(); ++s) out.u[s].assign(candidates_[s].size(), 0.0);

  for (std::size_t p = 0; p < program_.positions.size(); ++p) {
    const auto& pos = program_.positions[p];
    if (pos.role == Role::kFixed) continue;
    auto s = static_cast<std::size_t>(pos.site);
    const auto& cands = candidates_[s];
    double r = g.row_scale[p];
    switch (pos.role) {
      case Role::kOccurrence: {
        double mixed = 0.0;
        for (std::size_t c = 0; c < cands.size(); ++c) {
          mixed += vars.u[s][c] * g.direction[cands[c]];
          out.u[s][c] += r * vars.z[s] * g.direction[cands[c]];
        }
        out.z[s] += r * (mixed - g.direction[position_ids_[p]]);
        break;
      }
      case Role::kTemplate:
        out.z[s] += g.weight_grad[p];
        break;
      case Role::kSlot:
        out.z[s] += g.weight_grad[p];
        for (std::size_t c = 0; c < cands.size(); ++c) {
          out.u[s][c] += r * g.direction[cands[c]];
        }
        break;
      case Role::kFixed:
        break;
    }
  }
  return out;
}

double AttackProblem::DiscreteLoss(const PerturbationPlan& plan) const {
  auto tokens = program_.Realize(plan);
  return LossTokens(model_->params, model_->vocab.Encode(tokens), label_);
}

PerturbationPlan AttackProblem::MakePlan(
    const std::vector<std::pair<std::size_t, std::size_t>>& site_and_candidate) const {
  PerturbationPlan plan;
  for (auto [s, c] : site_and_candidate) {
    plan.assignments.push_back(
        {program_.sites[s], model_->vocab.TokenAt(candidates_[s][c])});
  }
  return plan;
}

AttackGradient SmoothedGradient(const AttackProblem& problem, const AttackVars& vars,
                                std::size_t samples, double sigma, std::mt19937_64& rng) {
  if (samples == 0 || sigma == 0.0) return problem.Gradient(vars);
  std::normal_distribution<double> noise(0.0, 1.0);
  AttackGradient acc;
  acc.z.assign(vars.z.size(), 0.0);
  acc.u.resize(vars.u.size());
  for (std::size_t s = 0; s < vars.u.size(); ++s) acc.u[s].assign(vars.u[s].size(), 0.0);
  AttackVars point = vars;
  for (std::size_t draw = 0; draw < samples; ++draw) {
    for (std::size_t s = 0; s < vars.z.size(); ++s) {
      point.z[s] = std::clamp(vars.z[s] + sigma * noise(rng), 0.0, 1.0);
      std::vector<double> noisy = vars.u[s];
      for (double& x : noisy) x += sigma * noise(rng);
      point.u[s] = ProjectSimplex(noisy);
    }
    auto g = problem.Gradient(point);
    for (std::size_t s = 0; s < acc.z.size(); ++s) {
      acc.z[s] += g.z[s];
      for (std::size_t c = 0; c < acc.u[s].size(); ++c) acc.u[s][c] += g.u[s][c];
    }
  }
  double inv = 1.0 / static_cast<double>(samples);
  for (std::size_t s = 0; s < acc.z.size(); ++s) {
    acc.z[s] *= inv;
    for (double& x : acc.u[s]) x *= inv;
  }
  return acc;
}

namespace {

// Rounds relaxed variables to a discrete selection: sites in descending z
// (at most one template per insert slot), each with its highest-mass token
// that does not collide with another rename. Returned in selection order.
std::vector<std::pair<std::size_t, std::size_t>> Discretize(const AttackProblem& problem,
                                                            const AttackVars& vars,
                                                            std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  std::set<std::pair<std::size_t, std::size_t>> used_slots;
  std::set<std::size_t> used_rename_tokens;
  for (std::size_t s : DescendingOrder(vars.z)) {
    if (chosen.size() == k) break;
    const auto& site = problem.sites()[s];
    if (IsInsert(site.kind) && used_slots.count({site.gap(), site.lane})) continue;
    const auto& cands = problem.candidates(s);
    std::optional<std::size_t> pick;
    for (std::size_t c : DescendingOrder(vars.u[s])) {
      if (IsRename(site.kind) && used_rename_tokens.count(cands[c])) continue;
      pick = c;
      break;
    }
    if (!pick) continue;
    if (IsInsert(site.kind)) used_slots.insert({site.gap(), site.lane});
    if (IsRename(site.kind)) used_rename_tokens.insert(cands[*pick]);
    chosen.emplace_back(s, *pick);
  }
  return chosen;
}

AttackResult FinishResult(const SurrogateModel& model, const CodeSnippet& snippet,
                          PerturbationPlan plan, double clean_loss,
                          std::vector<double> trace) {
  AttackResult r;
  r.origin_id = snippet.id;
  r.perturbed = ApplyPlan(snippet, plan, &model.vocab);
  r.plan = std::move(plan);
  r.clean_loss = clean_loss;
  auto label = *model.labels.Find(snippet.label);
  auto ids = model.vocab.Encode(r.perturbed.tokens);
  r.adv_loss = LossTokens(model.params, ids, label);
  r.success = Argmax(PredictTokens(model.params, ids)) != label;
  r.trace = std::move(trace);
  return r;
}

}  // namespace

AttackResult Optimize(const SurrogateModel& model, const CodeSnippet& snippet,
                      const std::vector<PerturbSite>& sites, const AttackConfig& config) {
  AttackProblem problem(model, snippet, sites, config.candidate_tokens);
  const double clean_loss = problem.DiscreteLoss({});
  std::vector<double> trace{clean_loss};
  const std::size_t n = problem.site_count();
  if (config.k == 0 || n == 0) {
    return FinishResult(model, snippet, {}, clean_loss, std::move(trace));
  }

  std::mt19937_64 rng(MixSeed(config.seed, snippet.id));
  AttackVars vars;
  vars.z.assign(n, std::min(1.0, static_cast<double>(config.k) / static_cast<double>(n)));
  vars.u.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto m = problem.candidates(s).size();
    vars.u[s].assign(m, 1.0 / static_cast<double>(m));
  }

  PerturbationPlan best_plan;
  double best = clean_loss;
  for (std::size_t it = 0; it < config.iters; ++it) {
    AttackGradient g =
        SmoothedGradient(problem, vars, config.smooth_samples, config.smooth_sigma, rng);
    ScaledAdd(vars.z, g.z, config.step);
    vars.z = ProjectCappedBox(vars.z, static_cast<double>(config.k));
    for (std::size_t s = 0; s < n; ++s) {
      ScaledAdd(vars.u[s], g.u[s], config.step);
      vars.u[s] = ProjectSimplex(vars.u[s]);
    }

    auto chosen = Discretize(problem, vars, config.k);
    for (std::size_t j = 1; j <= chosen.size(); ++j) {
      std::vector<std::pair<std::size_t, std::size_t>> prefix(chosen.begin(),
                                                              chosen.begin() + j);
      auto plan = problem.MakePlan(prefix);
      double loss = problem.DiscreteLoss(plan);
      if (loss > best) {
        best = loss;
        best_plan = std::move(plan);
      }
    }
    trace.push_back(best);
  }
  return FinishResult(model, snippet, std::move(best_plan), clean_loss, std::move(trace));
}

double BruteForceSize(std::size_t sites, std::size_t k, std::size_t vocab_subset) {
  double total = 0.0;
  double choose = 1.0;  // C(sites, j)
  for (std::size_t j = 0; j <= std::min(k, sites); ++j) {
    if (j > 0) choose = choose * static_cast<double>(sites - j + 1) / static_cast<double>(j);
    total += choose * std::pow(static_cast<double>(vocab_subset), static_cast<double>(j));
  }
  return total;
}

BruteForceResult BruteForce(const SurrogateModel& model, const CodeSnippet& snippet,
                            const std::vector<PerturbSite>& sites, std::size_t k,
                            const std::vector<std::string>& vocab_subset) {
  double size = BruteForceSize(sites.size(), k, vocab_subset.size());
  if (size > kBruteForceBudget) {
    throw Error(ErrorCode::kBudget,
                "brute-force search space " + std::to_string(static_cast<long long>(size)) +
                    " exceeds budget");
  }
  AttackProblem problem(model, snippet, sites, vocab_subset);
  const std::size_t n = problem.site_count();

  BruteForceResult best;
  best.loss = problem.DiscreteLoss({});
  best.evaluated = 1;

  // Subsets in lexicographic order, then token tuples in lexicographic order,
  // so the first strict improvement wins ties.
  std::vector<std::size_t> subset;
  std::vector<std::size_t> choice;
  std::function<void(std::size_t)> assign = [&](std::size_t depth) {
    if (depth == subset.size()) {
      std::vector<std::pair<std::size_t, std::size_t>> picks;
      std::set<std::size_t> rename_tokens;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        std::size_t s = subset[i];
        if (IsRename(problem.sites()[s].kind) &&
            !rename_tokens.insert(problem.candidates(s)[choice[i]]).second) {
          return;
        }
        picks.emplace_back(s, choice[i]);
      }
      auto plan = problem.MakePlan(picks);
      double loss = problem.DiscreteLoss(plan);
      ++best.evaluated;
      if (loss > best.loss) {
        best.loss = loss;
        best.plan = std::move(plan);
      }
      return;
    }
    for (std::size_t c = 0; c < problem.candidates(subset[depth]).size(); ++c) {
      choice[depth] = c;
      assign(depth + 1);
    }
  };
  std::function<void(std::size_t, std::size_t)> pick = [&](std::size_t from,
                                                            std::size_t remaining) {
    if (remaining == 0) {
      std::set<std::pair<std::size_t, std::size_t>> slots;
      for (std::size_t s : subset) {
        const auto& site = problem.sites()[s];
        if (IsInsert(site.kind) && !slots.emplace(site.gap(), site.lane).second) return;
      }
      choice.assign(subset.size(), 0);
      assign(0);
      return;
    }
    for (std::size_t s = from; s < n; ++s) {
      subset.push_back(s);
      pick(s + 1, remaining - 1);
      subset.pop_back();
    }
  };
  for (std::size_t j = 1; j <= std::min(k, n); ++j) pick(0, j);
  return best;
}

std::vector<AttackResult> AttackCorpus(const SurrogateModel& model,
                                       const std::vector<CodeSnippet>& snippets,
                                       const AttackConfig& config) {
  std::vector<AttackResult> results(snippets.size());
  auto run_one = [&](std::size_t i) {
    const auto& s = snippets[i];
    try {
      results[i] = Optimize(model, s, ExtractSites(s, config.max_insert_slots), config);
    } catch (const std::exception& e) {
      results[i] = AttackResult{};
      results[i].origin_id = s.id;
      results[i].error = e.what();
    }
  };
  std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, snippets.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < snippets.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < snippets.size(); i = next++) run_one(i);
    });
  }
  return pool.clear(), results;
}

std::string SerializeAttackResults(const std::vector<AttackResult>& results) {
  std::string out;
  for (const auto& r : results) {
    nlohmann::ordered_json rec;
    rec["origin_id"] = r.origin_id;
    if (r.error) {
      rec["error"] = *r.error;
    } else {
      auto plan = nlohmann::ordered_json::array();
      for (const auto& a : r.plan.assignments) plan.push_back(AssignmentToJson(a));
      rec["plan"] = std::move(plan);
      rec["perturbed_code"] = Join(r.perturbed.tokens, " ");
      rec["clean_loss"] = r.clean_loss;
      rec["adv_loss"] = r.adv_loss;
      rec["success"] = r.success;
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<AttackRecord> LoadAttackFile(const std::filesystem::path& path) {
  std::vector<AttackRecord> out;
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    if (Trim(line).empty()) return;
    try {
      auto rec = nlohmann::json::parse(line);
      if (rec.contains("error")) return;
      AttackRecord r;
      r.origin_id = rec.at("origin_id").get<std::string>();
      if (rec.contains("plan")) {
        for (const auto& a : rec.at("plan")) r.plan.assignments.push_back(AssignmentFromJson(a));
      }
      r.perturbed_code = rec.at("perturbed_code").get<std::string>();
      r.clean_loss = rec.value("clean_loss", 0.0);
      r.adv_loss = rec.value("adv_loss", 0.0);
      r.success = rec.value("success", false);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace advsum
