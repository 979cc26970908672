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

#include "advsum/llmclient.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <thread>

#include "advsum/surrogate.hpp"
#include "advsum/util.hpp"
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "test_support.hpp"

namespace advsum {
namespace {

ChatRequest SimpleRequest(const std::string& code = "( a ) : return a") {
  ChatRequest r;
  r.model_id = "test-model";
  r.messages = BuildBaseline({"get", "set"}, {}, code);
  return r;
}

std::string OkBody(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}
      .dump();
}

// Replays a fixed sequence of replies and records the sleeps.
struct FaultScript {
  std::deque<HttpReply> replies;
  std::vector<std::chrono::milliseconds> sleeps;
  int calls = 0;
  Headers last_headers;
  std::string last_body;

  Transport transport() {
    return [this](const std::string&, const std::string& body, const Headers& h) {
      ++calls;
      last_headers = h;
      last_body = body;
      HttpReply r = replies.front();
      if (replies.size() > 1) replies.pop_front();
      return r;
    };
  }
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
  }
};

ProviderConfig Config(int retries = 3) {
  ProviderConfig c;
  c.endpoint = "http://localhost/v1/chat/completions";
  c.max_retries = retries;
  c.backoff_base = std::chrono::milliseconds(100);
  return c;
}

TEST(HttpProviderTest, RateLimitedTwiceThenSuccess) {
  FaultScript f;
  f.replies = {{429, "slow down", ""}, {429, "slow down", ""}, {200, OkBody("get"), ""}};
  HttpProvider p(Config(3), f.transport(), f.sleeper());
  auto r = p.Complete(SimpleRequest());
  EXPECT_EQ(r.text, "get");
  EXPECT_EQ(r.attempt_count, 3);
  ASSERT_EQ(f.sleeps.size(), 2u);
  EXPECT_EQ(f.sleeps[0].count(), 100);
  EXPECT_EQ(f.sleeps[1].count(), 200);
}

TEST(HttpProviderTest, TimeoutsAndServerErrorsAreRetried) {
  FaultScript f;
  f.replies = {{0, "", "timeout"}, {503, "", ""}, {200, OkBody("set"), ""}};
  HttpProvider p(Config(2), f.transport(), f.sleeper());
  EXPECT_EQ(p.Complete(SimpleRequest()).attempt_count, 3);
}

TEST(HttpProviderTest, RetriesExhaustedCarriesLastStatus) {
  FaultScript f;
  f.replies = {{429, "", ""}};
  HttpProvider p(Config(2), f.transport(), f.sleeper());
  try {
    p.Complete(SimpleRequest());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.status(), 429);
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.code(), ErrorCode::kProvider);
  }
  EXPECT_EQ(f.calls, 3);
}

TEST(HttpProviderTest, AuthFailureIsTerminal) {
  FaultScript f;
  f.replies = {{401, "bad key", ""}};
  HttpProvider p(Config(5), f.transport(), f.sleeper());
  try {
    p.Complete(SimpleRequest());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_TRUE(f.sleeps.empty());
}

TEST(HttpProviderTest, ClientErrorAndMalformedPayloadAreTerminal) {
  FaultScript f;
  f.replies = {{400, "bad request", ""}};
  HttpProvider p(Config(5), f.transport(), f.sleeper());
  EXPECT_THROW(p.Complete(SimpleRequest()), ProviderError);
  EXPECT_EQ(f.calls, 1);

  FaultScript g;
  g.replies = {{200, "{\"choices\": []}", ""}};
  HttpProvider q(Config(5), g.transport(), g.sleeper());
  EXPECT_THROW(q.Complete(SimpleRequest()), ProviderError);
  EXPECT_EQ(g.calls, 1);
}

TEST(HttpProviderTest, AuthHeaderFromEnvironment) {
  ::setenv("ADVSUM_TEST_KEY", "sekrit", 1);
  FaultScript f;
  f.replies = {{200, OkBody("get"), ""}};
  auto cfg = Config();
  cfg.auth_env_var = "ADVSUM_TEST_KEY";
  HttpProvider p(cfg, f.transport(), f.sleeper());
  p.Complete(SimpleRequest());
  bool found = false;
  for (const auto& [k, v] : f.last_headers) found |= k == "Authorization" && v == "Bearer sekrit";
  EXPECT_TRUE(found);
  auto body = nlohmann::json::parse(f.last_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["messages"][0]["role"], "system");

  cfg.auth_env_var = "ADVSUM_TEST_KEY_UNSET";
  HttpProvider missing(cfg, f.transport(), f.sleeper());
  int before = f.calls;
  EXPECT_THROW(missing.Complete(SimpleRequest()), ProviderError);
  EXPECT_EQ(f.calls, before);
}

TEST(HttpProviderTest, LocalServerRoundTrip) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    res.set_content(OkBody(body["messages"].back()["content"].get<std::string>() == "q" ? "get"
                                                                                        : "?"),
                    "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  ProviderConfig cfg = Config(2);
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(5000);
  HttpProvider p(cfg);
  auto r = p.Complete(SimpleRequest("q"));
  server.stop();
  t.join();
  EXPECT_EQ(r.text, "get");
  EXPECT_EQ(r.attempt_count, 2);
}

TEST(MockProviderTest, ScriptThenFallback) {
  auto req = SimpleRequest();
  MockProvider scripted({{req.Fingerprint(), "set"}});
  EXPECT_EQ(scripted.Complete(req).text, "set");
  EXPECT_THROW(scripted.Complete(SimpleRequest("other")), ProviderError);

  MockProvider fb({}, [](const ChatRequest&) { return std::string("get"); });
  EXPECT_EQ(fb.Complete(req).text, "get");
  EXPECT_EQ(fb.Complete(req).text, fb.Complete(req).text);
}

TEST(MockProviderTest, FingerprintCoversEveryField) {
  auto a = SimpleRequest();
  auto b = a;
  b.max_tokens = 17;
  auto c = a;
  c.temperature = 0.5;
  auto d = a;
  d.model_id = "other";
  EXPECT_NE(a.Fingerprint(), b.Fingerprint());
  EXPECT_NE(a.Fingerprint(), c.Fingerprint());
  EXPECT_NE(a.Fingerprint(), d.Fingerprint());
  EXPECT_EQ(a.Fingerprint(), SimpleRequest().Fingerprint());
}

TEST(CachingProviderTest, ReplaysAndPersists) {
  auto path = std::filesystem::temp_directory_path() / "advsum_cache_test.jsonl";
  std::filesystem::remove(path);
  std::atomic<int> calls{0};
  auto inner = std::make_shared<MockProvider>(std::map<std::string, std::string>{},
                                              [&](const ChatRequest&) {
                                                ++calls;
                                                return std::string("get");
                                              });
  {
    CachingProvider cache(inner, path);
    cache.Complete(SimpleRequest());
    cache.Complete(SimpleRequest());
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(cache.misses(), 1u);
  }
  CachingProvider reopened(inner, path);
  EXPECT_EQ(reopened.Complete(SimpleRequest()).text, "get");
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(MockProvider::LoadScript(path).size(), 1u);
  std::filesystem::remove(path);
}

TEST(CompleteAllTest, OutcomesFollowRequestOrder) {
  MockProvider slow({}, [](const ChatRequest& r) {
    const auto& code = r.messages.messages.back().content;
    // Later requests finish first.
    std::this_thread::sleep_for(std::chrono::milliseconds(40 - 4 * (code.size() % 10)));
    return code;
  });
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 8; ++i) reqs.push_back(SimpleRequest(std::string(i + 1, 'x')));
  reqs.push_back(SimpleRequest());
  reqs.back().max_tokens = 0;  // invalid: recorded as an error, batch continues
  auto out = CompleteAll(slow, reqs, 4);
  ASSERT_EQ(out.size(), 9u);
  for (int i = 0; i < 8; ++i) {
    ASSERT_TRUE(out[i].response.has_value());
    EXPECT_EQ(out[i].response->text, std::string(i + 1, 'x'));
  }
  EXPECT_FALSE(out[8].response.has_value());
  EXPECT_FALSE(out[8].error.empty());
}

const std::vector<std::string> kDict = {"init", "get_name", "close"};

TEST(ParseAnswerTest, Strict) {
  EXPECT_EQ(ParseAnswer("init", kDict), ParsedAnswer::Label("init"));
  EXPECT_EQ(ParseAnswer("\"init\"", kDict), ParsedAnswer::Label("init"));
  EXPECT_EQ(ParseAnswer("  Get_Name.\n", kDict), ParsedAnswer::Label("get_name"));
  EXPECT_EQ(ParseAnswer("I don't know", kDict), ParsedAnswer::Abstain());
  EXPECT_EQ(ParseAnswer("I don’t know.", kDict), ParsedAnswer::Abstain());
  EXPECT_EQ(ParseAnswer("i DON'T know", kDict), ParsedAnswer::Abstain());
  EXPECT_EQ(ParseAnswer("The function is init.", kDict).kind, ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseAnswer("", kDict).kind, ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseAnswer("open", kDict).kind, ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseAnswer("__init__", {"__init__"}), ParsedAnswer::Label("__init__"));
}

TEST(ParseAnswerTest, Lenient) {
  EXPECT_EQ(ParseAnswer("The function is best described as init, since it sets fields.",
                        kDict, true),
            ParsedAnswer::Label("init"));
  EXPECT_EQ(ParseAnswer("either init or close", kDict, true).kind,
            ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseAnswer("initialize everything", kDict, true).kind,
            ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseAnswer("Honestly, I don't know.", kDict, true), ParsedAnswer::Abstain());
}

TEST(ParseAnswerTest, LabelsStayInDictionaryAndRoundTrip) {
  for (const auto& w : kDict) {
    auto a = ParseAnswer(w, kDict);
    ASSERT_EQ(a.kind, ParsedAnswer::Kind::kLabel);
    EXPECT_EQ(ParseAnswer(a.value, kDict), a);
  }
  for (const char* t : {"INIT", "init!", "'close'", "get_name get_name"}) {
    auto a = ParseAnswer(t, kDict, true);
    if (a.kind == ParsedAnswer::Kind::kLabel) {
      EXPECT_NE(std::find(kDict.begin(), kDict.end(), a.value), kDict.end());
    }
  }
}

TEST(ParseConfidenceTest, WordAndProbability) {
  auto c = ParseConfidence("init (0.85).", kDict);
  EXPECT_EQ(c.answer, ParsedAnswer::Label("init"));
  ASSERT_TRUE(c.confidence.has_value());
  EXPECT_DOUBLE_EQ(*c.confidence, 0.85);
  EXPECT_EQ(ParseConfidence("init (1.5)", kDict).answer.kind, ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseConfidence("init", kDict).answer.kind, ParsedAnswer::Kind::kMalformed);
  EXPECT_EQ(ParseConfidence("nope (0.3)", kDict).answer.kind, ParsedAnswer::Kind::kMalformed);
}

TEST(SurrogateFallbackTest, AnswersEveryQueryKind) {
  auto corpus = LoadDataset(testing::DataPath("fixture_corpus.jsonl"));
  auto model = std::make_shared<SurrogateModel>();
  model->vocab = BuildVocab(corpus, {});
  model->labels = CollectLabels(corpus);
  TrainConfig tc;
  tc.epochs = 30;
  model->params = Train(corpus, model->vocab, model->labels, tc).params;
  MockProvider p({}, SurrogateFallback(model));

  std::vector<std::string> dict = {corpus[0].label, corpus[10].label, corpus[20].label};
  for (const auto& s : corpus) {
    ChatRequest r;
    r.messages = BuildBaseline(dict, {}, RenderTokens(s));
    auto a = ParseAnswer(p.Complete(r).text, dict);
    EXPECT_EQ(a.kind, ParsedAnswer::Kind::kLabel);
  }
  ChatRequest conf;
  conf.messages = BuildConfidence(dict, RenderTokens(corpus[0]));
  EXPECT_TRUE(ParseConfidence(p.Complete(conf).text, dict).confidence.has_value());

  ChatRequest rec;
  rec.messages = BuildInvDTwoStep(dict, {}, testing::ReadData("listing2.txt")).step1;
  EXPECT_EQ(p.Complete(rec).text, testing::ReadData("listing1.txt"));

  ChatRequest meta;
  meta.messages = BuildMetaPamp();
  EXPECT_EQ(p.Complete(meta).text, kPampGeneratedPrompt);
}

TEST(RemoveTemplatesTest, StripsOnlyTemplates) {
  EXPECT_EQ(RemoveInsertedTemplates("a = 1 if false : x = 1 print ( y ) return a"),
            "a = 1 return a");
  EXPECT_EQ(RemoveInsertedTemplates("print ( self . x )"), "print ( self . x )");
}

}  // namespace
}  // namespace advsum
