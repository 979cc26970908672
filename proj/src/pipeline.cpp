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


#include "advsum/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "advsum/attack.hpp"
#include "advsum/corpus.hpp"
#include "advsum/error.hpp"
#include "advsum/harness.hpp"
#include "advsum/prompts.hpp"
#include "advsum/surrogate.hpp"
#include "advsum/util.hpp"

namespace advsum {
namespace {

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const std::string& Require(const Config& cfg, std::string_view key) {
  const auto& v = cfg.Get(key);
  if (v.empty()) throw InvalidArgument("config key '" + std::string(key) + "' is required");
  return v;
}

void Begin(const Config& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  WriteFile(out_dir / "effective_config.txt", cfg.Dump());
}

std::vector<CodeSnippet> LoadCorpus(const Config& cfg) {
  auto corpus = LoadDataset(Require(cfg, "corpus"));
  if (corpus.empty()) throw InvalidArgument("corpus is empty");
  return corpus;
}

}  // namespace

std::string RenderSummary(const Summary& summary) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : summary) parts.push_back(k + "=" + v);
  return Join(parts, " ");
}

std::shared_ptr<const SurrogateModel> LoadSurrogate(const Config& cfg) {
  const auto& dir = cfg.Get("model_checkpoint");
  if (dir.empty()) return nullptr;
  return std::make_shared<const SurrogateModel>(SurrogateModel::Load(dir));
}

std::shared_ptr<ChatProvider> MakeProvider(const Config& cfg,
                                           std::shared_ptr<const SurrogateModel> surrogate) {
  const auto& name = cfg.Get("provider");
  std::shared_ptr<ChatProvider> provider;
  if (name == "mock") {
    std::map<std::string, std::string> script;
    if (!cfg.Get("provider.script").empty()) {
      script = MockProvider::LoadScript(cfg.Get("provider.script"));
    }
    Fallback fallback;
    if (surrogate) fallback = SurrogateFallback(surrogate);
    provider = std::make_shared<MockProvider>(std::move(script), std::move(fallback));
  } else if (name == "surrogate") {
    if (!surrogate) throw InvalidArgument("provider 'surrogate' needs model_checkpoint");
    provider = std::make_shared<MockProvider>(std::map<std::string, std::string>{},
                                              SurrogateFallback(surrogate));
  } else if (name == "http") {
    ProviderConfig pc;
    pc.endpoint = Require(cfg, "provider.endpoint");
    pc.auth_env_var = cfg.Get("provider.auth_env");
    pc.max_retries = static_cast<int>(cfg.GetInt("provider.max_retries"));
    pc.backoff_base = std::chrono::milliseconds(cfg.GetInt("provider.backoff_ms"));
    pc.max_parallel = static_cast<int>(cfg.GetInt("provider.max_parallel"));
    pc.timeout = std::chrono::milliseconds(cfg.GetInt("provider.timeout_ms"));
    pc.Validate();
    provider = std::make_shared<HttpProvider>(pc);
  } else {
    throw InvalidArgument("unknown provider '" + name + "' (mock, surrogate or http)");
  }
  if (!cfg.Get("cache").empty()) {
    provider = std::make_shared<CachingProvider>(provider, cfg.Get("cache"));
  }
  return provider;
}

Summary PrepareData(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  auto corpus = LoadDataset(Require(cfg, "data.input"));
  std::set<std::string> ids;
  for (const auto& s : corpus) {
    if (!ids.insert(s.id).second) throw InvalidArgument("duplicate snippet id '" + s.id + "'");
  }
  const auto limit = cfg.GetUint("data.limit");
  if (limit > 0 && corpus.size() > limit) corpus.resize(limit);
  if (corpus.empty()) throw InvalidArgument("no snippets in " + cfg.Get("data.input"));
  auto vocab = BuildVocab(corpus, {});
  auto labels = CollectLabels(corpus);
  WriteFile(out_dir / "corpus.jsonl", SerializeDataset(corpus));
  WriteFile(out_dir / "vocab.jsonl", vocab.Serialize());
  WriteFile(out_dir / "labels.jsonl", labels.Serialize());
  return {{"snippets", std::to_string(corpus.size())},
          {"labels", std::to_string(labels.size())},
          {"vocab", std::to_string(vocab.token_count())},
          {"corpus", (out_dir / "corpus.jsonl").string()}};
}

Summary TrainSurrogate(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  auto corpus = LoadCorpus(cfg);
  TrainConfig tc;
  tc.embed_dim = cfg.GetUint("train.embed_dim");
  tc.hidden_dim = cfg.GetUint("train.hidden_dim");
  tc.epochs = cfg.GetUint("train.epochs");
  tc.batch_size = cfg.GetUint("train.batch_size");
  tc.learning_rate = cfg.GetDouble("train.learning_rate");
  tc.seed = cfg.GetUint("seed");
  if (tc.embed_dim == 0 || tc.hidden_dim == 0 || tc.batch_size == 0) {
    throw InvalidArgument("train dimensions and batch size must be positive");
  }
  SurrogateModel model;
  model.vocab = BuildVocab(corpus, {});
  model.labels = CollectLabels(corpus);
  auto result = Train(corpus, model.vocab, model.labels, tc);
  model.params = std::move(result.params);
  const double acc = Accuracy(model.params, corpus, model.vocab, model.labels);
  model.Save(out_dir);
  return {{"snippets", std::to_string(corpus.size())},
          {"epochs", std::to_string(tc.epochs)},
          {"final_loss",
           result.epoch_loss.empty() ? "-" : Fixed(result.epoch_loss.back(), 6)},
          {"train_accuracy", Fixed(100.0 * acc, 2)},
          {"checkpoint", out_dir.string()}};
}

Summary GenerateAttacks(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  auto model = LoadSurrogate(cfg);
  if (!model) throw InvalidArgument("config key 'model_checkpoint' is required");
  auto corpus = LoadCorpus(cfg);
  std::vector<CodeSnippet> correct;
  for (const auto& s : corpus) {
    auto label = model->labels.Find(s.label);
    if (label && model->Classify(s.tokens) == *label) correct.push_back(s);
  }
  auto results = AttackCorpus(*model, correct, AttackSettings(cfg));
  std::size_t successes = 0, failed = 0;
  for (const auto& r : results) {
    if (r.error) ++failed;
    else if (r.success) ++successes;
  }
  WriteFile(out_dir / "attacks.jsonl", SerializeAttackResults(results));
  const std::string asr =
      correct.empty() ? "-" : Percentage{successes, correct.size()}.Render();
  return {{"snippets", std::to_string(corpus.size())},
          {"attacked", std::to_string(correct.size())},
          {"successes", std::to_string(successes)},
          {"errors", std::to_string(failed)},
          {"asr", asr},
          {"attack_file", (out_dir / "attacks.jsonl").string()}};
}

Summary Evaluate(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  auto surrogate = LoadSurrogate(cfg);
  auto provider = MakeProvider(cfg, surrogate);
  auto result = RunExperiment(cfg, *provider, surrogate);
  WriteFile(out_dir / "records.jsonl", SerializeRecords(result.records));
  WriteFile(out_dir / "report.txt", RenderReport(result.report, ReportFormat::kText));
  WriteFile(out_dir / "report.tsv", RenderReport(result.report, ReportFormat::kTsv));
  std::size_t malformed = 0;
  for (const auto& r : result.records) {
    malformed += r.answer.kind == ParsedAnswer::Kind::kMalformed;
  }
  Summary s = {{"records", std::to_string(result.records.size())},
               {"s", std::to_string(result.report.s_size)},
               {"s_m", std::to_string(result.report.sm_size)},
               {"malformed", std::to_string(malformed)}};
  if (auto* cache = dynamic_cast<CachingProvider*>(provider.get())) {
    s.push_back({"cache_hits", std::to_string(cache->hits())});
    s.push_back({"cache_misses", std::to_string(cache->misses())});
  }
  s.push_back({"report", (out_dir / "report.txt").string()});
  return s;
}

Summary MetaPrompt(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  const auto count = cfg.GetUint("meta.examples");
  std::vector<std::pair<std::string, std::string>> pairs;
  if (count > 0) {
    auto corpus = LoadCorpus(cfg);
    std::map<std::string, const CodeSnippet*> by_id;
    for (const auto& s : corpus) by_id[s.id] = &s;
    for (const auto& rec : LoadAttackFile(Require(cfg, "attack_file"))) {
      if (pairs.size() == count) break;
      auto it = by_id.find(rec.origin_id);
      if (it == by_id.end() || rec.plan.assignments.empty()) continue;
      pairs.emplace_back(RenderTokens(*it->second), rec.perturbed_code);
    }
    if (pairs.empty()) throw InvalidArgument("attack file has no usable examples");
  }
  auto surrogate = LoadSurrogate(cfg);
  auto provider = MakeProvider(cfg, surrogate);
  Summary s;
  const std::vector<std::pair<std::string, ChatPrompt>> requests = {
      {"ebmp", BuildMetaEbmp(pairs)}, {"pamp", BuildMetaPamp()}};
  for (const auto& [name, prompt] : requests) {
    ChatRequest req;
    req.model_id = cfg.Get("model_id");
    req.messages = prompt;
    req.temperature = cfg.GetDouble("temperature");
    req.max_tokens = static_cast<int>(cfg.GetInt("max_tokens.recovery"));
    WriteFile(out_dir / (name + "_request.json"), req.ToJson());
    auto reply = provider->Complete(req);
    WriteFile(out_dir / (name + "_prompt.txt"), std::string(Trim(reply.text)) + "\n");
    s.push_back({name + "_prompt", (out_dir / (name + "_prompt.txt")).string()});
  }
  s.insert(s.begin(), {"examples", std::to_string(pairs.size())});
  return s;
}

Summary Report(const Config& cfg, const std::filesystem::path& out_dir) {
  Begin(cfg, out_dir);
  auto records = LoadRecords(Require(cfg, "records"));
  auto report = BuildReport(cfg.Get("model_id"), records);
  WriteFile(out_dir / "report.txt", RenderReport(report, ReportFormat::kText));
  WriteFile(out_dir / "report.tsv", RenderReport(report, ReportFormat::kTsv));
  return {{"records", std::to_string(records.size())},
          {"s", std::to_string(report.s_size)},
          {"s_m", std::to_string(report.sm_size)},
          {"report", (out_dir / "report.txt").string()}};
}

}  // namespace advsum
