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

#include "advsum/harness.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "advsum/attack.hpp"
#include "advsum/error.hpp"
#include "advsum/prompts.hpp"
#include "advsum/surrogate.hpp"
#include "advsum/transforms.hpp"
#include "advsum/util.hpp"
#include "json.hpp"

namespace advsum {
namespace {

const std::vector<std::string> kDefenses = {"fsd", "invd", "invd_two_step", "invd_ebmp",
                                            "invd_pamp"};

std::size_t VariantRank(const std::string& v) {
  const auto& known = KnownVariants();
  return static_cast<std::size_t>(std::find(known.begin(), known.end(), v) - known.begin());
}

bool NeedsAdvFewShot(const std::string& v) { return v == "fsd" || v == "abstain_fsd"; }

std::optional<TwoStepOutcome> ParseOutcome(std::string_view name) {
  for (auto o : {TwoStepOutcome::kFullSuccess, TwoStepOutcome::kPartialSuccess,
                 TwoStepOutcome::kFailure}) {
    if (TwoStepOutcomeName(o) == name) return o;
  }
  return std::nullopt;
}

}  // namespace

std::string_view InputKindName(InputKind kind) {
  return kind == InputKind::kClean ? "clean" : "adversarial";
}

std::string_view TwoStepOutcomeName(TwoStepOutcome outcome) {
  switch (outcome) {
    case TwoStepOutcome::kFullSuccess: return "full_success";
    case TwoStepOutcome::kPartialSuccess: return "partial_success";
    case TwoStepOutcome::kFailure: return "failure";
  }
  return "failure";
}

const std::vector<std::string>& KnownVariants() {
  static const std::vector<std::string> v = {
      "baseline",  "fsd",     "invd",        "invd_two_step", "invd_ebmp",
      "invd_pamp", "abstain", "abstain_fsd", "abstain_invd",
  };
  return v;
}

bool IsAbstainVariant(std::string_view variant) { return variant.starts_with("abstain"); }

std::string SerializeRecords(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["origin_id"] = r.origin_id;
    j["variant"] = r.variant;
    j["input"] = InputKindName(r.input);
    j["answer_kind"] = AnswerKindName(r.answer.kind);
    j["answer"] = r.answer.value;
    j["correct"] = r.correct;
    j["abstained"] = r.abstained;
    j["fingerprint"] = r.fingerprint;
    if (!r.error.empty()) j["error"] = r.error;
    if (!r.adv_source.empty()) j["adv_source"] = r.adv_source;
    if (r.outcome) {
      j["outcome"] = TwoStepOutcomeName(*r.outcome);
      j["recovered_code"] = r.recovered_code;
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<EvalRecord> LoadRecords(const std::filesystem::path& path) {
  std::vector<EvalRecord> out;
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    if (Trim(line).empty()) return;
    try {
      auto j = nlohmann::json::parse(line);
      EvalRecord r;
      r.origin_id = j.at("origin_id").get<std::string>();
      r.variant = j.at("variant").get<std::string>();
      auto input = j.at("input").get<std::string>();
      if (input != "clean" && input != "adversarial") throw ParseError("bad input " + input);
      r.input = input == "clean" ? InputKind::kClean : InputKind::kAdversarial;
      auto kind = j.at("answer_kind").get<std::string>();
      if (kind == "label") r.answer.kind = ParsedAnswer::Kind::kLabel;
      else if (kind == "abstain") r.answer.kind = ParsedAnswer::Kind::kAbstain;
      else if (kind == "malformed") r.answer.kind = ParsedAnswer::Kind::kMalformed;
      else throw ParseError("bad answer_kind " + kind);
      r.answer.value = j.at("answer").get<std::string>();
      r.correct = j.at("correct").get<bool>();
      r.abstained = j.at("abstained").get<bool>();
      r.fingerprint = j.value("fingerprint", "");
      r.error = j.value("error", "");
      r.adv_source = j.value("adv_source", "");
      if (j.contains("outcome")) {
        r.outcome = ParseOutcome(j.at("outcome").get<std::string>());
        if (!r.outcome) throw ParseError("bad outcome");
        r.recovered_code = j.value("recovered_code", "");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

std::set<std::string> ComputeSM(const std::vector<EvalRecord>& clean_records) {
  std::set<std::string> seen, sm;
  for (const auto& r : clean_records) {
    if (!seen.insert(r.origin_id).second) {
      throw InvalidArgument("duplicate record for '" + r.origin_id + "'");
    }
    if (r.correct) sm.insert(r.origin_id);
  }
  return sm;
}

std::uint64_t Percentage::basis_points() const {
  if (den == 0) throw InvalidArgument("percentage with zero denominator");
  return (20000 * num + den) / (2 * den);
}

std::string Percentage::Render() const {
  auto bp = basis_points();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(bp / 100),
                static_cast<unsigned long long>(bp % 100));
  return buf;
}

Percentage AccuracyOf(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw InvalidArgument("accuracy over no records");
  Percentage p{0, records.size()};
  for (const auto& r : records) p.num += r.correct ? 1 : 0;
  return p;
}

Percentage AsrOf(const std::vector<EvalRecord>& adv_records, std::uint64_t sm_size) {
  if (sm_size == 0) throw InvalidArgument("ASR with empty S_M");
  Percentage p{0, sm_size};
  for (const auto& r : adv_records) p.num += (!r.correct && !r.abstained) ? 1 : 0;
  return p;
}

Percentage AbstainRateOf(const std::vector<EvalRecord>& records, std::uint64_t denom) {
  if (denom == 0) throw InvalidArgument("abstain rate with zero denominator");
  Percentage p{0, denom};
  for (const auto& r : records) p.num += r.abstained ? 1 : 0;
  return p;
}

std::string NormalizeRecovered(std::string_view text) {
  std::string_view t = Trim(text);
  if (t.starts_with("code:")) t.remove_prefix(5);
  return Join(SplitWhitespace(t), " ");
}

TwoStepOutcome ClassifyTwoStep(const std::vector<std::string>& original_tokens,
                               std::string_view recovered_text, bool final_correct) {
  if (SplitWhitespace(NormalizeRecovered(recovered_text)) != original_tokens) {
    return TwoStepOutcome::kFailure;
  }
  return final_correct ? TwoStepOutcome::kFullSuccess : TwoStepOutcome::kPartialSuccess;
}

const CellCounts* EvalReport::Cell(const std::string& variant, InputKind kind) const {
  auto it = cells.find({variant, kind});
  return it == cells.end() ? nullptr : &it->second;
}

EvalReport BuildReport(const std::string& model_id, const std::vector<EvalRecord>& records) {
  EvalReport rep;
  rep.model_id = model_id;
  std::set<std::string> variants;
  for (const auto& r : records) {
    if (VariantRank(r.variant) == KnownVariants().size()) {
      throw InvalidArgument("unknown variant '" + r.variant + "' in records");
    }
    variants.insert(r.variant);
    auto& c = rep.cells[{r.variant, r.input}];
    if (r.answer.kind == ParsedAnswer::Kind::kMalformed) ++c.malformed;
    else if (r.abstained) ++c.abstain;
    else if (r.correct) ++c.correct;
    else ++c.wrong;
    if (r.outcome) {
      auto& t = rep.two_step[{r.variant, r.input}];
      ++t[static_cast<std::size_t>(*r.outcome)];
    }
    if (r.variant == "baseline" && r.input == InputKind::kClean) {
      ++rep.s_size;
      if (r.correct) ++rep.sm_size;
    }
  }
  rep.variants.assign(variants.begin(), variants.end());
  std::sort(rep.variants.begin(), rep.variants.end(),
            [](const std::string& a, const std::string& b) { return VariantRank(a) < VariantRank(b); });
  return rep;
}

std::string RenderReport(const EvalReport& rep, ReportFormat format) {
  const std::string kAcc = "Acc on S (Correct(S)/|S|)";
  const std::string kAccSm = "Acc on S_M (Correct(S_M)/|S_M|)";
  const std::string kAsr = "ASR (Wrong(S_M^adv)/|S_M|)";
  const std::string kAbsS = "Abs on S (Abstain(S)/|S|)";
  const std::string kAbsAdv = "Abs on S_M^adv (Abstain(S_M^adv)/|S_M|)";

  auto pct = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? std::string("-") : Percentage{num, den}.Render();
  };
  auto cell = [&](const std::string& variant, InputKind kind) -> CellCounts {
    const CellCounts* c = rep.Cell(variant, kind);
    return c ? *c : CellCounts{};
  };
  auto has = [&](const std::string& variant, InputKind kind) {
    return rep.Cell(variant, kind) != nullptr;
  };
  auto wrong = [](const CellCounts& c) { return c.wrong + c.malformed; };

  std::vector<std::string> header = {"Model", kAcc, kAsr};
  std::vector<std::string> row = {rep.model_id,
                                  has("baseline", InputKind::kClean)
                                      ? pct(cell("baseline", InputKind::kClean).correct, rep.s_size)
                                      : "-",
                                  has("baseline", InputKind::kAdversarial)
                                      ? pct(wrong(cell("baseline", InputKind::kAdversarial)),
                                            rep.sm_size)
                                      : "-"};
  for (const auto& v : rep.variants) {
    if (v == "baseline") continue;
    const auto clean = cell(v, InputKind::kClean);
    const auto adv = cell(v, InputKind::kAdversarial);
    const bool has_clean = has(v, InputKind::kClean);
    const bool has_adv = has(v, InputKind::kAdversarial);
    if (IsAbstainVariant(v)) {
      header.push_back(v + " " + kAbsS);
      row.push_back(has_clean ? pct(clean.abstain, clean.total()) : "-");
      header.push_back(v + " " + kAcc);
      row.push_back(has_clean ? pct(clean.correct, clean.total()) : "-");
      header.push_back(v + " " + kAbsAdv);
      row.push_back(has_adv ? pct(adv.abstain, rep.sm_size) : "-");
    } else {
      header.push_back(v + " " + kAccSm);
      row.push_back(has_clean ? pct(clean.correct, rep.sm_size) : "-");
    }
    header.push_back(v + " " + kAsr);
    row.push_back(has_adv ? pct(wrong(adv), rep.sm_size) : "-");
  }

  std::vector<std::vector<std::string>> counts = {
      {"variant", "input", "correct", "wrong", "abstain", "malformed", "total"}};
  for (const auto& v : rep.variants) {
    for (auto kind : {InputKind::kClean, InputKind::kAdversarial}) {
      const CellCounts* c = rep.Cell(v, kind);
      if (!c) continue;
      counts.push_back({v, std::string(InputKindName(kind)), std::to_string(c->correct),
                        std::to_string(c->wrong), std::to_string(c->abstain),
                        std::to_string(c->malformed), std::to_string(c->total())});
    }
  }
  std::vector<std::vector<std::string>> steps;
  if (!rep.two_step.empty()) {
    steps.push_back({"variant", "input", "full_success", "partial_success", "failure"});
    for (const auto& [key, t] : rep.two_step) {
      steps.push_back({key.first, std::string(InputKindName(key.second)), std::to_string(t[0]),
                       std::to_string(t[1]), std::to_string(t[2])});
    }
  }

  auto render = [&](const std::vector<std::vector<std::string>>& table) {
    std::string out;
    if (format == ReportFormat::kTsv) {
      for (const auto& r : table) out += Join(r, "\t") + "\n";
      return out;
    }
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& r : table) {
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    for (const auto& r : table) {
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        line += r[i];
        if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
      }
      out += line + "\n";
    }
    return out;
  };

  std::string out;
  out += render({header, row});
  out += "\n|S|=" + std::to_string(rep.s_size) + " |S_M|=" + std::to_string(rep.sm_size) + "\n\n";
  out += render(counts);
  if (!steps.empty()) out += "\n" + render(steps);
  return out;
}

AttackConfig AttackSettings(const Config& cfg) {
  AttackConfig ac;
  ac.k = cfg.GetUint("attack.k");
  ac.iters = cfg.GetUint("attack.iters");
  ac.step = cfg.GetDouble("attack.step");
  ac.smooth_samples = cfg.GetUint("attack.smooth_samples");
  ac.smooth_sigma = cfg.GetDouble("attack.smooth_sigma");
  ac.max_insert_slots = cfg.GetUint("attack.max_insert_slots");
  ac.threads = std::max<std::uint64_t>(1, cfg.GetUint("attack.threads"));
  ac.seed = cfg.GetUint("seed");
  return ac;
}

namespace {

struct Query {
  const CodeSnippet* snippet;
  const Dictionary* dictionary;
  std::string code;        // text placed in the prompt
  std::string adv_source;  // adversarial inputs only
};

class Experiment {
 public:
  Experiment(const Config& cfg, ChatProvider& provider,
             std::shared_ptr<const SurrogateModel> surrogate)
      : cfg_(cfg), provider_(provider), surrogate_(std::move(surrogate)) {}

  ExperimentResult Run();

 private:
  void Prepare();
  std::string AdversarialCode(const CodeSnippet& s, std::string* source);
  void GenerateMissingAttacks(const std::vector<const CodeSnippet*>& snippets);
  ChatPrompt BuildPrompt(const std::string& variant, const Dictionary& dict,
                         const std::string& code) const;
  ChatRequest Request(ChatPrompt prompt, int max_tokens) const;
  EvalRecord Judge(const Query& q, const std::string& variant, InputKind kind,
                   const CallOutcome& outcome, const std::string& fingerprint) const;
  std::vector<EvalRecord> Pass(const std::string& variant, InputKind kind,
                               const std::vector<Query>& queries);
  std::vector<EvalRecord> TwoStepPass(InputKind kind, const std::vector<Query>& queries);

  const Config& cfg_;
  ChatProvider& provider_;
  std::shared_ptr<const SurrogateModel> surrogate_;

  std::vector<std::string> variants_;
  std::vector<CodeSnippet> eval_;  // S
  std::vector<CodeSnippet> fewshot_snippets_;
  std::vector<FewShotPair> fewshot_;
  std::vector<FewShotPair> adv_fewshot_;
  std::map<std::string, Dictionary> dictionaries_;
  std::map<std::string, std::string> attack_code_;    // origin id -> perturbed code
  std::map<std::string, std::string> attack_source_;  // origin id -> source
  std::string ebmp_prompt_;
  std::string pamp_prompt_;
  bool lenient_ = false;
  int max_parallel_ = 1;
};

void Experiment::Prepare() {
  variants_ = cfg_.GetList("variants");
  for (const auto& v : variants_) {
    if (VariantRank(v) == KnownVariants().size()) {
      throw InvalidArgument("unknown variant '" + v + "'");
    }
  }
  if (cfg_.Get("corpus").empty()) throw InvalidArgument("config key 'corpus' is required");
  if (cfg_.GetDouble("temperature") < 0) throw InvalidArgument("temperature must be >= 0");
  if (cfg_.GetInt("max_tokens") <= 0 || cfg_.GetInt("max_tokens.recovery") <= 0) {
    throw InvalidArgument("max_tokens must be positive");
  }
  lenient_ = cfg_.GetBool("lenient");
  max_parallel_ = static_cast<int>(cfg_.GetInt("provider.max_parallel"));
  if (max_parallel_ < 1) throw InvalidArgument("provider.max_parallel must be >= 1");
  const auto mode = cfg_.Get("dictionary.mode");
  if (mode != "per_snippet" && mode != "shared") {
    throw InvalidArgument("dictionary.mode must be per_snippet or shared");
  }
  const std::size_t dict_size = cfg_.GetUint("dictionary.size");
  if (dict_size == 0) throw InvalidArgument("dictionary.size must be positive");
  const std::uint64_t seed = cfg_.GetUint("seed");

  auto corpus = LoadDataset(cfg_.Get("corpus"));
  const std::size_t nshot = cfg_.GetUint("fewshot.count");
  if (corpus.size() <= nshot) throw InvalidArgument("corpus too small for the few-shot count");

  // Few-shot examples are a seeded sample held out of S.
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(MixSeed(seed, "fewshot"));
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nshot));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (held.count(i)) fewshot_snippets_.push_back(corpus[i]);
    else eval_.push_back(corpus[i]);
  }
  for (const auto& s : fewshot_snippets_) fewshot_.push_back({RenderTokens(s), s.label});

  std::set<std::string> all_labels;
  for (const auto& s : corpus) all_labels.insert(s.label);
  if (mode == "shared") {
    auto pool = BuildDictionary(*all_labels.begin(), all_labels, dict_size,
                                MixSeed(seed, "shared-dictionary"));
    for (const auto& s : eval_) {
      dictionaries_[s.id] = SharedDictionary(s.label, pool.labels, MixSeed(seed, s.id));
    }
  } else {
    for (const auto& s : eval_) {
      dictionaries_[s.id] = BuildDictionary(s.label, all_labels, dict_size, MixSeed(seed, s.id));
    }
  }

  if (!cfg_.Get("attack_file").empty()) {
    for (auto& rec : LoadAttackFile(cfg_.Get("attack_file"))) {
      attack_source_[rec.origin_id] = "attack_file";
      attack_code_[rec.origin_id] = std::move(rec.perturbed_code);
    }
  } else if (!surrogate_) {
    throw InvalidArgument("adversarial passes need attack_file or model_checkpoint");
  }

  bool need_adv_shots = std::any_of(variants_.begin(), variants_.end(), NeedsAdvFewShot);
  if (need_adv_shots) {
    if (fewshot_snippets_.empty()) {
      throw InvalidArgument("fsd variants need fewshot.count >= 1");
    }
    std::vector<const CodeSnippet*> missing;
    for (const auto& s : fewshot_snippets_) {
      if (!attack_code_.count(s.id)) missing.push_back(&s);
    }
    if (!missing.empty() && !surrogate_) {
      throw InvalidArgument("fsd variants need attacks for the few-shot snippets");
    }
    GenerateMissingAttacks(missing);
    for (const auto& s : fewshot_snippets_) {
      if (!attack_code_.count(s.id)) {
        throw InvalidArgument("could not attack few-shot snippet '" + s.id + "'");
      }
      adv_fewshot_.push_back({attack_code_[s.id], s.label});
    }
  }

  ebmp_prompt_ = std::string(kEbmpGeneratedPrompt);
  pamp_prompt_ = std::string(kPampGeneratedPrompt);
  if (!cfg_.Get("invd.ebmp_prompt").empty()) {
    ebmp_prompt_ = std::string(Trim(ReadFile(cfg_.Get("invd.ebmp_prompt"))));
  }
  if (!cfg_.Get("invd.pamp_prompt").empty()) {
    pamp_prompt_ = std::string(Trim(ReadFile(cfg_.Get("invd.pamp_prompt"))));
  }
}

void Experiment::GenerateMissingAttacks(const std::vector<const CodeSnippet*>& snippets) {
  if (snippets.empty() || !surrogate_) return;
  const AttackConfig ac = AttackSettings(cfg_);
  std::vector<CodeSnippet> batch;
  for (const auto* s : snippets) batch.push_back(*s);
  for (auto& r : AttackCorpus(*surrogate_, batch, ac)) {
    if (r.error) continue;
    attack_source_[r.origin_id] = "surrogate";
    attack_code_[r.origin_id] = Join(r.perturbed.tokens, " ");
  }
}

std::string Experiment::AdversarialCode(const CodeSnippet& s, std::string* source) {
  auto it = attack_code_.find(s.id);
  if (it == attack_code_.end()) {
    *source = "clean";
    return RenderTokens(s);
  }
  *source = attack_source_[s.id];
  return it->second;
}

ChatPrompt Experiment::BuildPrompt(const std::string& variant, const Dictionary& dict,
                                   const std::string& code) const {
  const auto& names = dict.labels;
  if (variant == "baseline") return BuildBaseline(names, fewshot_, code);
  if (variant == "fsd") return BuildFsd(names, fewshot_, adv_fewshot_, code);
  if (variant == "invd") return BuildInvD(names, fewshot_, code);
  if (variant == "invd_ebmp") return BuildInvD(names, fewshot_, code, ebmp_prompt_);
  if (variant == "invd_pamp") return BuildInvD(names, fewshot_, code, pamp_prompt_);
  if (variant == "abstain") return BuildAbstain(names, fewshot_, code);
  if (variant == "abstain_fsd") return WithAbstain(BuildFsd(names, fewshot_, adv_fewshot_, code));
  if (variant == "abstain_invd") return WithAbstain(BuildInvD(names, fewshot_, code));
  throw Error(ErrorCode::kInternal, "no single-step prompt for variant " + variant);
}

ChatRequest Experiment::Request(ChatPrompt prompt, int max_tokens) const {
  ChatRequest r;
  r.model_id = cfg_.Get("model_id");
  r.messages = std::move(prompt);
  r.temperature = cfg_.GetDouble("temperature");
  r.max_tokens = max_tokens;
  return r;
}

EvalRecord Experiment::Judge(const Query& q, const std::string& variant, InputKind kind,
                             const CallOutcome& outcome, const std::string& fingerprint) const {
  EvalRecord r;
  r.origin_id = q.snippet->id;
  r.variant = variant;
  r.input = kind;
  r.fingerprint = fingerprint;
  r.adv_source = q.adv_source;
  if (outcome.response) {
    r.answer = ParseAnswer(outcome.response->text, q.dictionary->labels, lenient_);
  } else {
    r.answer = ParsedAnswer::Malformed("");
    r.error = outcome.error;
  }
  r.correct = r.answer.kind == ParsedAnswer::Kind::kLabel && r.answer.value == q.snippet->label;
  r.abstained = r.answer.kind == ParsedAnswer::Kind::kAbstain;
  return r;
}

std::vector<EvalRecord> Experiment::Pass(const std::string& variant, InputKind kind,
                                         const std::vector<Query>& queries) {
  std::vector<ChatRequest> requests;
  const int max_tokens = static_cast<int>(cfg_.GetInt("max_tokens"));
  for (const auto& q : queries) {
    requests.push_back(Request(BuildPrompt(variant, *q.dictionary, q.code), max_tokens));
  }
  auto outcomes = CompleteAll(provider_, requests, max_parallel_);
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back(Judge(queries[i], variant, kind, outcomes[i], requests[i].Fingerprint()));
  }
  return out;
}

std::vector<EvalRecord> Experiment::TwoStepPass(InputKind kind, const std::vector<Query>& queries) {
  const int recovery_tokens = static_cast<int>(cfg_.GetInt("max_tokens.recovery"));
  const int max_tokens = static_cast<int>(cfg_.GetInt("max_tokens"));
  std::vector<ChatRequest> step1;
  std::vector<TwoStepPrompts> builders;
  for (const auto& q : queries) {
    builders.push_back(BuildInvDTwoStep(q.dictionary->labels, fewshot_, q.code));
    step1.push_back(Request(builders.back().step1, recovery_tokens));
  }
  auto recovered = CompleteAll(provider_, step1, max_parallel_);

  std::vector<std::size_t> index;  // queries that reach step 2
  std::vector<ChatRequest> step2;
  std::vector<std::string> recovered_code(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!recovered[i].response) continue;
    recovered_code[i] = NormalizeRecovered(recovered[i].response->text);
    if (recovered_code[i].empty()) continue;
    index.push_back(i);
    step2.push_back(Request(builders[i].step2(recovered_code[i]), max_tokens));
  }
  auto answers = CompleteAll(provider_, step2, max_parallel_);

  std::vector<EvalRecord> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CallOutcome failed;
    failed.error = recovered[i].response ? "empty recovery" : recovered[i].error;
    out[i] = Judge(queries[i], "invd_two_step", kind, failed, step1[i].Fingerprint());
  }
  for (std::size_t j = 0; j < index.size(); ++j) {
    std::size_t i = index[j];
    out[i] = Judge(queries[i], "invd_two_step", kind, answers[j], step2[j].Fingerprint());
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out[i].recovered_code = recovered_code[i];
    out[i].outcome = ClassifyTwoStep(queries[i].snippet->tokens, recovered_code[i], out[i].correct);
  }
  return out;
}

ExperimentResult Experiment::Run() {
  Prepare();

  std::vector<Query> clean_s;
  for (const auto& s : eval_) clean_s.push_back({&s, &dictionaries_.at(s.id), RenderTokens(s), ""});

  std::vector<EvalRecord> records = Pass("baseline", InputKind::kClean, clean_s);
  const auto sm = ComputeSM(records);

  std::vector<const CodeSnippet*> sm_snippets, missing;
  for (const auto& s : eval_) {
    if (!sm.count(s.id)) continue;
    sm_snippets.push_back(&s);
    if (!attack_code_.count(s.id)) missing.push_back(&s);
  }
  GenerateMissingAttacks(missing);

  std::vector<Query> clean_sm, adv_sm;
  for (const auto* s : sm_snippets) {
    clean_sm.push_back({s, &dictionaries_.at(s->id), RenderTokens(*s), ""});
    Query q{s, &dictionaries_.at(s->id), "", ""};
    q.code = AdversarialCode(*s, &q.adv_source);
    adv_sm.push_back(std::move(q));
  }
  auto append = [&](std::vector<EvalRecord> more) {
    records.insert(records.end(), std::make_move_iterator(more.begin()),
                   std::make_move_iterator(more.end()));
  };
  append(Pass("baseline", InputKind::kAdversarial, adv_sm));

  for (const auto& v : KnownVariants()) {
    if (v == "baseline" || std::find(variants_.begin(), variants_.end(), v) == variants_.end()) {
      continue;
    }
    const bool abstain = IsAbstainVariant(v);
    const auto& clean = abstain ? clean_s : clean_sm;
    if (v == "invd_two_step") {
      append(TwoStepPass(InputKind::kClean, clean));
      append(TwoStepPass(InputKind::kAdversarial, adv_sm));
    } else {
      append(Pass(v, InputKind::kClean, clean));
      append(Pass(v, InputKind::kAdversarial, adv_sm));
    }
  }

  std::stable_sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    auto ra = VariantRank(a.variant), rb = VariantRank(b.variant);
    if (ra != rb) return ra < rb;
    if (a.input != b.input) return a.input < b.input;
    return a.origin_id < b.origin_id;
  });
  ExperimentResult result;
  result.report = BuildReport(cfg_.Get("model_id"), records);
  result.records = std::move(records);
  return result;
}

}  // namespace

ExperimentResult RunExperiment(const Config& config, ChatProvider& provider,
                               std::shared_ptr<const SurrogateModel> surrogate) {
  return Experiment(config, provider, std::move(surrogate)).Run();
}

}  // namespace advsum
