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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "advsum/error.hpp"
#include "advsum/prompts.hpp"
#include "test_support.hpp"

namespace advsum {
namespace {

using testing::DataPath;
using testing::GntpInit;
using testing::ReadData;

EvalRecord Rec(std::string id, std::string variant, InputKind input, ParsedAnswer::Kind kind,
               bool correct) {
  EvalRecord r;
  r.origin_id = std::move(id);
  r.variant = std::move(variant);
  r.input = input;
  r.answer.kind = kind;
  r.answer.value = kind == ParsedAnswer::Kind::kLabel ? "x" : "";
  r.correct = correct;
  r.abstained = kind == ParsedAnswer::Kind::kAbstain;
  return r;
}

std::vector<EvalRecord> Counts(const std::string& variant, InputKind input, int correct,
                               int wrong, int abstain, int malformed) {
  std::vector<EvalRecord> out;
  int i = 0;
  auto add = [&](int n, ParsedAnswer::Kind kind, bool ok) {
    for (int j = 0; j < n; ++j) {
      out.push_back(Rec("s" + std::to_string(i++), variant, input, kind, ok));
    }
  };
  add(correct, ParsedAnswer::Kind::kLabel, true);
  add(wrong, ParsedAnswer::Kind::kLabel, false);
  add(abstain, ParsedAnswer::Kind::kAbstain, false);
  add(malformed, ParsedAnswer::Kind::kMalformed, false);
  return out;
}

// Reference rendering through long double rounding.
std::string OraclePct(long double num, long double den) {
  long double v = std::floor(num * 10000.0L / den + 0.5L);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2Lf", v / 100.0L);
  return buf;
}

TEST(PercentageTest, TableValues) {
  EXPECT_EQ((Percentage{607, 1000}.Render()), "60.70");
  EXPECT_EQ((Percentage{179, 607}.Render()), "29.49");
  EXPECT_EQ((Percentage{670, 1000}.Render()), "67.00");
  EXPECT_EQ((Percentage{141, 670}.Render()), "21.04");
  EXPECT_EQ((Percentage{596, 1000}.Render()), "59.60");
  EXPECT_EQ((Percentage{137, 596}.Render()), "22.99");
  EXPECT_EQ((Percentage{505, 607}.Render()), "83.20");
  EXPECT_EQ((Percentage{39, 607}.Render()), "6.43");
}

TEST(PercentageTest, MatchesOracle) {
  for (std::uint64_t den = 1; den <= 700; den += 7) {
    for (std::uint64_t num = 0; num <= den; ++num) {
      ASSERT_EQ((Percentage{num, den}.Render()), OraclePct(num, den)) << num << "/" << den;
    }
  }
}

TEST(PercentageTest, HalfUp) {
  EXPECT_EQ((Percentage{1, 8}.basis_points()), 1250u);
  EXPECT_EQ((Percentage{1, 80000}.basis_points()), 0u);  // 0.125 bp
  EXPECT_EQ((Percentage{1, 40000}.basis_points()), 0u);  // 0.25 bp
  EXPECT_EQ((Percentage{1, 20000}.basis_points()), 1u);  // exactly 0.5 bp
}

TEST(MetricsTest, ZeroDenominatorsThrow) {
  EXPECT_THROW(AccuracyOf({}), Error);
  EXPECT_THROW(AsrOf({}, 0), Error);
  EXPECT_THROW(AbstainRateOf({}, 0), Error);
  EXPECT_THROW((Percentage{1, 0}.Render()), Error);
}

TEST(MetricsTest, AsrCountsMalformedButNotAbstain) {
  auto adv = Counts("baseline", InputKind::kAdversarial, 5, 2, 3, 1);
  EXPECT_EQ(AsrOf(adv, 11).num, 3u);
  EXPECT_EQ(AbstainRateOf(adv, 11).num, 3u);
  EXPECT_EQ(AccuracyOf(adv).num, 5u);
  EXPECT_EQ(AccuracyOf(adv).den, 11u);
}

TEST(MetricsTest, ComputeSM) {
  auto clean = Counts("baseline", InputKind::kClean, 2, 1, 0, 1);
  auto sm = ComputeSM(clean);
  EXPECT_EQ(sm, (std::set<std::string>{"s0", "s1"}));
  clean.push_back(clean.front());
  EXPECT_THROW(ComputeSM(clean), Error);
}

TEST(TwoStepTest, RecoveredResponsesMatchPublishedOutcomes) {
  const auto original = GntpInit();
  // The first response keeps an inserted statement, so recovery fails.
  EXPECT_EQ(ClassifyTwoStep(original.tokens, ReadData("listing3_response.txt"), true),
            TwoStepOutcome::kFailure);
  // The second restores the original exactly.
  EXPECT_EQ(ClassifyTwoStep(original.tokens, ReadData("listing4_response.txt"), true),
            TwoStepOutcome::kFullSuccess);
  EXPECT_EQ(ClassifyTwoStep(original.tokens, ReadData("listing4_response.txt"), false),
            TwoStepOutcome::kPartialSuccess);
}

TEST(TwoStepTest, NormalizeRecovered) {
  EXPECT_EQ(NormalizeRecovered("  code:  a   b\n c "), "a b c");
  EXPECT_EQ(NormalizeRecovered("a b"), "a b");
  EXPECT_EQ(NormalizeRecovered(""), "");
}

TEST(RecordsTest, RoundTrip) {
  auto records = Counts("abstain", InputKind::kAdversarial, 1, 1, 1, 1);
  records[0].fingerprint = "abc";
  records[1].adv_source = "surrogate";
  records[3].error = "HTTP 500";
  auto two = Rec("t", "invd_two_step", InputKind::kClean, ParsedAnswer::Kind::kLabel, true);
  two.outcome = TwoStepOutcome::kPartialSuccess;
  two.recovered_code = "a b";
  records.push_back(two);
  auto path = std::filesystem::temp_directory_path() / "advsum_records_test.jsonl";
  WriteFile(path, SerializeRecords(records));
  EXPECT_EQ(LoadRecords(path), records);
  WriteFile(path, "{\"origin_id\": 1}\n");
  EXPECT_THROW(LoadRecords(path), Error);
  std::filesystem::remove(path);
}

TEST(ReportTest, CellsAndSizes) {
  std::vector<EvalRecord> records = Counts("baseline", InputKind::kClean, 6, 3, 0, 1);
  auto adv = Counts("baseline", InputKind::kAdversarial, 4, 1, 0, 1);
  records.insert(records.end(), adv.begin(), adv.end());
  auto rep = BuildReport("m", records);
  EXPECT_EQ(rep.s_size, 10u);
  EXPECT_EQ(rep.sm_size, 6u);
  ASSERT_NE(rep.Cell("baseline", InputKind::kAdversarial), nullptr);
  EXPECT_EQ(rep.Cell("baseline", InputKind::kAdversarial)->malformed, 1u);
  EXPECT_EQ(rep.Cell("fsd", InputKind::kClean), nullptr);
  records.push_back(Rec("z", "bogus", InputKind::kClean, ParsedAnswer::Kind::kLabel, true));
  EXPECT_THROW(BuildReport("m", records), Error);
}

TEST(ReportTest, TsvGolden) {
  std::vector<EvalRecord> records;
  auto add = [&](std::vector<EvalRecord> more) {
    records.insert(records.end(), more.begin(), more.end());
  };
  add(Counts("baseline", InputKind::kClean, 8, 2, 0, 0));
  add(Counts("baseline", InputKind::kAdversarial, 5, 3, 0, 0));
  add(Counts("fsd", InputKind::kClean, 7, 1, 0, 0));
  add(Counts("abstain", InputKind::kClean, 5, 1, 4, 0));
  add(Counts("abstain", InputKind::kAdversarial, 2, 1, 5, 0));
  const std::string expected =
      "Model\tAcc on S (Correct(S)/|S|)\tASR (Wrong(S_M^adv)/|S_M|)\t"
      "fsd Acc on S_M (Correct(S_M)/|S_M|)\tfsd ASR (Wrong(S_M^adv)/|S_M|)\t"
      "abstain Abs on S (Abstain(S)/|S|)\tabstain Acc on S (Correct(S)/|S|)\t"
      "abstain Abs on S_M^adv (Abstain(S_M^adv)/|S_M|)\tabstain ASR (Wrong(S_M^adv)/|S_M|)\n"
      "m\t80.00\t37.50\t87.50\t-\t40.00\t50.00\t62.50\t12.50\n"
      "\n|S|=10 |S_M|=8\n\n"
      "variant\tinput\tcorrect\twrong\tabstain\tmalformed\ttotal\n"
      "baseline\tclean\t8\t2\t0\t0\t10\n"
      "baseline\tadversarial\t5\t3\t0\t0\t8\n"
      "fsd\tclean\t7\t1\t0\t0\t8\n"
      "abstain\tclean\t5\t1\t4\t0\t10\n"
      "abstain\tadversarial\t2\t1\t5\t0\t8\n";
  EXPECT_EQ(RenderReport(BuildReport("m", records), ReportFormat::kTsv), expected);
}

TEST(ReportTest, TextIsAligned) {
  auto records = Counts("baseline", InputKind::kClean, 1, 1, 0, 0);
  auto text = RenderReport(BuildReport("model", records), ReportFormat::kText);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[0].find("Acc on S"), lines[1].find("50.00"));
  EXPECT_NE(lines[1].find("  -"), std::string::npos);  // no adversarial pass
}

// A provider that answers by looking the prompt's code up in a table.
class TableProvider : public ChatProvider {
 public:
  explicit TableProvider(std::map<std::string, std::string> answers)
      : answers_(std::move(answers)) {}
  ChatResponse Complete(const ChatRequest& request) override {
    ++calls_;
    auto info = InspectPrompt(request.messages);
    if (info.kind == QueryInfo::Kind::kRecover) {
      return {"code: " + info.code, {}, 1};
    }
    auto it = answers_.find(info.code);
    if (it == answers_.end()) throw ProviderError("no answer", 500, 1);
    return {it->second, {}, 1};
  }
  int calls() const { return calls_; }

 private:
  std::map<std::string, std::string> answers_;
  int calls_ = 0;
};

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / "advsum_harness_test";
    std::filesystem::create_directories(dir_);
    std::vector<CodeSnippet> corpus = {
        MakeSnippet("a", "def f ( x ) : return x + 1", "add_one"),
        MakeSnippet("b", "def f ( x ) : return x * 2", "double"),
        MakeSnippet("c", "def f ( x ) : return - x", "negate"),
        MakeSnippet("d", "def f ( x ) : return x", "identity"),
    };
    WriteFile(dir_ / "corpus.jsonl", SerializeDataset(corpus));
    WriteFile(dir_ / "attacks.jsonl",
              "{\"origin_id\":\"a\",\"perturbed_code\":\"ADV_A\"}\n"
              "{\"origin_id\":\"b\",\"perturbed_code\":\"ADV_B\"}\n");
    cfg_.Set("corpus", (dir_ / "corpus.jsonl").string());
    cfg_.Set("attack_file", (dir_ / "attacks.jsonl").string());
    cfg_.Set("fewshot.count", "0");
    cfg_.Set("dictionary.size", "4");
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
  Config cfg_;
};

TEST_F(ExperimentTest, BaselineAndAbstain) {
  cfg_.Set("variants", "baseline,abstain");
  TableProvider provider({
      {"def f ( x ) : return x + 1", "add_one"},
      {"def f ( x ) : return x * 2", "double"},
      {"def f ( x ) : return - x", "identity"},
      {"def f ( x ) : return x", "I don't know"},
      {"ADV_A", "negate"},
      {"ADV_B", "I don't know"},
  });
  auto result = RunExperiment(cfg_, provider, nullptr);
  const auto& rep = result.report;
  EXPECT_EQ(rep.s_size, 4u);
  EXPECT_EQ(rep.sm_size, 2u);
  // baseline: 4 clean + 2 adversarial; abstain: 4 clean + 2 adversarial.
  EXPECT_EQ(provider.calls(), 12);
  EXPECT_EQ(result.records.size(), 12u);
  EXPECT_EQ(rep.Cell("baseline", InputKind::kAdversarial)->wrong, 1u);
  EXPECT_EQ(rep.Cell("baseline", InputKind::kAdversarial)->abstain, 1u);
  EXPECT_EQ(rep.Cell("abstain", InputKind::kClean)->abstain, 1u);
  for (const auto& r : result.records) {
    if (r.input == InputKind::kAdversarial) EXPECT_EQ(r.adv_source, "attack_file");
  }
  auto tsv = RenderReport(rep, ReportFormat::kTsv);
  EXPECT_NE(tsv.find("\nsurrogate\t50.00\t50.00\t"), std::string::npos) << tsv;
}

TEST_F(ExperimentTest, TwoStepOutcomes) {
  cfg_.Set("variants", "baseline,invd_two_step");
  TableProvider provider({
      {"def f ( x ) : return x + 1", "add_one"},
      {"def f ( x ) : return x * 2", "double"},
      {"def f ( x ) : return - x", "identity"},
      {"def f ( x ) : return x", "identity"},
      {"ADV_A", "negate"},
      {"ADV_B", "double"},
  });
  auto result = RunExperiment(cfg_, provider, nullptr);
  std::size_t full = 0, failure = 0;
  for (const auto& r : result.records) {
    if (r.variant != "invd_two_step") continue;
    ASSERT_TRUE(r.outcome.has_value());
    if (r.input == InputKind::kClean) EXPECT_EQ(*r.outcome, TwoStepOutcome::kFullSuccess);
    full += *r.outcome == TwoStepOutcome::kFullSuccess;
    failure += *r.outcome == TwoStepOutcome::kFailure;
  }
  // The echoing provider returns the perturbed code unchanged on adversarial inputs.
  EXPECT_EQ(full, 4u);  // clean a, b, d plus unattacked d
  EXPECT_EQ(failure, 2u);
}

TEST_F(ExperimentTest, ProviderFailuresBecomeMalformed) {
  cfg_.Set("variants", "baseline");
  TableProvider provider(std::map<std::string, std::string>{{"def f ( x ) : return x + 1", "add_one"}});
  auto result = RunExperiment(cfg_, provider, nullptr);
  EXPECT_EQ(result.report.Cell("baseline", InputKind::kClean)->malformed, 3u);
  EXPECT_EQ(result.report.sm_size, 1u);
}

TEST_F(ExperimentTest, RejectsBadConfig) {
  TableProvider provider(std::map<std::string, std::string>{});
  Config cfg = cfg_;
  cfg.Set("variants", "baseline,nonsense");
  EXPECT_THROW(RunExperiment(cfg, provider, nullptr), Error);
  cfg = cfg_;
  cfg.Set("attack_file", "");
  EXPECT_THROW(RunExperiment(cfg, provider, nullptr), Error);
  cfg = cfg_;
  cfg.Set("variants", "baseline,fsd");
  EXPECT_THROW(RunExperiment(cfg, provider, nullptr), Error);  // no few-shot examples
  EXPECT_EQ(provider.calls(), 0);
}

TEST_F(ExperimentTest, Deterministic) {
  cfg_.Set("variants", "baseline,invd,abstain_invd");
  std::map<std::string, std::string> table = {
      {"def f ( x ) : return x + 1", "add_one"}, {"def f ( x ) : return x * 2", "double"},
      {"def f ( x ) : return - x", "negate"},    {"def f ( x ) : return x", "identity"},
      {"ADV_A", "negate"},                       {"ADV_B", "double"},
  };
  TableProvider p1(table), p2(table);
  auto r1 = RunExperiment(cfg_, p1, nullptr);
  auto r2 = RunExperiment(cfg_, p2, nullptr);
  EXPECT_EQ(SerializeRecords(r1.records), SerializeRecords(r2.records));
  // c and d have no attack, so their adversarial input is the clean code.
  std::size_t clean_fallback = 0;
  for (const auto& r : r1.records) clean_fallback += r.adv_source == "clean";
  EXPECT_EQ(clean_fallback, 2u * 3u);
}

}  // namespace
}  // namespace advsum
