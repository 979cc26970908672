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

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "advsum/surrogate.hpp"
#include "advsum/transforms.hpp"
#include "advsum/util.hpp"
#include "json.hpp"

namespace advsum {
namespace {

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds Since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
}

bool Retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::string ExtractContent(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::runtime_error("response is not JSON");
  const auto& choices = j.at("choices");
  if (!choices.is_array() || choices.empty()) throw std::runtime_error("no choices");
  const auto& content = choices.at(0).at("message").at("content");
  if (!content.is_string()) throw std::runtime_error("content is not a string");
  return content.get<std::string>();
}

bool IsWordChar(unsigned char c) { return std::isalnum(c) || c == '_'; }

// Strips whitespace, sentence punctuation and quotes (ASCII and curly) from
// both ends. Underscores are kept: they are part of identifiers.
std::string_view TrimReply(std::string_view s) {
  static const std::string_view kCurly[] = {"“", "”", "‘", "’"};
  static const std::string_view kAscii = " \t\r\n.,;:!?\"'`()[]{}<>*";
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    if (kAscii.find(s.front()) != std::string_view::npos) {
      s.remove_prefix(1);
      changed = true;
      continue;
    }
    if (kAscii.find(s.back()) != std::string_view::npos) {
      s.remove_suffix(1);
      changed = true;
      continue;
    }
    for (auto q : kCurly) {
      if (s.starts_with(q)) { s.remove_prefix(q.size()); changed = true; }
      if (s.ends_with(q)) { s.remove_suffix(q.size()); changed = true; }
    }
  }
  return s;
}

std::string NormalizeApostrophes(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.substr(i, 3) == "’" || s.substr(i, 3) == "‘") {
      out += '\'';
      i += 3;
    } else {
      out += s[i++];
    }
  }
  return out;
}

bool IsAbstainText(std::string_view trimmed) {
  return ToLower(NormalizeApostrophes(trimmed)) == "i don't know";
}

bool ContainsWholeWord(const std::string& haystack, const std::string& word) {
  for (auto pos = haystack.find(word); pos != std::string::npos;
       pos = haystack.find(word, pos + 1)) {
    bool left = pos == 0 || !IsWordChar(haystack[pos - 1]);
    std::size_t end = pos + word.size();
    bool right = end == haystack.size() || !IsWordChar(haystack[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace

void ChatRequest::Validate() const {
  if (temperature < 0.0) throw InvalidArgument("temperature must be >= 0");
  if (max_tokens <= 0) throw InvalidArgument("max_tokens must be positive");
  messages.Validate();
}

std::string ChatRequest::ToJson() const {
  nlohmann::ordered_json j;
  j["model"] = model_id;
  auto msgs = nlohmann::ordered_json::array();
  for (const auto& m : messages.messages) {
    msgs.push_back({{"role", RoleName(m.role)}, {"content", m.content}});
  }
  j["messages"] = std::move(msgs);
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  return j.dump();
}

std::string ChatRequest::Fingerprint() const { return Sha256Hex(ToJson()); }

void ProviderConfig::Validate() const {
  if (max_parallel < 1) throw InvalidArgument("max_parallel must be >= 1");
  if (max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
  if (backoff_base.count() < 0) throw InvalidArgument("backoff must be >= 0");
}

HttpProvider::HttpProvider(ProviderConfig config, Transport transport, Sleeper sleep)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : MakeHttpTransport(config_.timeout)),
      sleep_(sleep ? std::move(sleep)
                   : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
  config_.Validate();
  if (config_.endpoint.empty()) throw InvalidArgument("provider endpoint is empty");
}

ChatResponse HttpProvider::Complete(const ChatRequest& request) {
  request.Validate();
  Headers headers = {{"Content-Type", "application/json"}};
  if (!config_.auth_env_var.empty()) {
    const char* key = std::getenv(config_.auth_env_var.c_str());
    if (key == nullptr || *key == '\0') {
      throw ProviderError("auth failure: environment variable " + config_.auth_env_var +
                              " is not set",
                          0, 0);
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = request.ToJson();
  const auto start = Clock::now();
  HttpReply reply;
  int attempt = 0;
  while (true) {
    ++attempt;
    reply = transport_(config_.endpoint, body, headers);
    if (reply.status >= 200 && reply.status < 300) {
      try {
        return {ExtractContent(reply.body), Since(start), attempt};
      } catch (const std::exception& e) {
        throw ProviderError(std::string("malformed provider payload: ") + e.what(),
                            reply.status, attempt);
      }
    }
    if (reply.status == 401 || reply.status == 403) {
      throw ProviderError("auth failure: HTTP " + std::to_string(reply.status), reply.status,
                          attempt);
    }
    if (!Retryable(reply.status)) {
      throw ProviderError("request rejected: HTTP " + std::to_string(reply.status) + " " +
                              reply.body.substr(0, 200),
                          reply.status, attempt);
    }
    if (attempt > config_.max_retries) break;
    sleep_(config_.backoff_base * (1LL << std::min(attempt - 1, 20)));
  }
  std::string last = reply.status == 0 ? "no response (" + reply.error + ")"
                                       : "HTTP " + std::to_string(reply.status);
  throw ProviderError("retries exhausted after " + std::to_string(attempt) +
                          " attempts; last: " + last,
                      reply.status, attempt);
}

MockProvider::MockProvider(std::map<std::string, std::string> script, Fallback fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

ChatResponse MockProvider::Complete(const ChatRequest& request) {
  request.Validate();
  auto it = script_.find(request.Fingerprint());
  if (it != script_.end()) return {it->second, {}, 1};
  if (!fallback_) {
    throw ProviderError("no scripted response for " + request.Fingerprint(), 0, 1);
  }
  return {fallback_(request), {}, 1};
}

std::map<std::string, std::string> MockProvider::LoadScript(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  ForEachLine(path, [&](std::string_view line, std::size_t lineno) {
    if (Trim(line).empty()) return;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("fingerprint").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

std::string RemoveInsertedTemplates(std::string_view code) {
  auto t = SplitWhitespace(code);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < t.size();) {
    if (i + 5 < t.size() && t[i] == "if" && t[i + 1] == "false" && t[i + 2] == ":" &&
        IsIdentifierToken(t[i + 3]) && t[i + 4] == "=" && t[i + 5] == "1") {
      i += 6;
    } else if (i + 3 < t.size() && t[i] == "print" && t[i + 1] == "(" &&
               IsIdentifierToken(t[i + 2]) && t[i + 3] == ")") {
      i += 4;
    } else {
      out.push_back(t[i++]);
    }
  }
  return Join(out, " ");
}

Fallback SurrogateFallback(std::shared_ptr<const SurrogateModel> model, double abstain_below) {
  return [model, abstain_below](const ChatRequest& request) -> std::string {
    QueryInfo q = InspectPrompt(request.messages);
    switch (q.kind) {
      case QueryInfo::Kind::kRecover:
        return RemoveInsertedTemplates(q.code);
      case QueryInfo::Kind::kMeta:
        return std::string(q.perturbation_aware ? kPampGeneratedPrompt : kEbmpGeneratedPrompt);
      case QueryInfo::Kind::kUnknown:
        return "";
      case QueryInfo::Kind::kClassify:
      case QueryInfo::Kind::kConfidence:
        break;
    }
    if (q.dictionary.empty()) return "";
    auto probs = model->Probabilities(SplitWhitespace(q.code));
    std::string best = q.dictionary.front();
    double best_p = -1.0;
    for (const auto& word : q.dictionary) {
      auto idx = model->labels.Find(word);
      if (idx && probs[*idx] > best_p) {
        best_p = probs[*idx];
        best = word;
      }
    }
    if (q.kind == QueryInfo::Kind::kConfidence) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " (%.2f)", std::max(best_p, 0.0));
      return best + buf;
    }
    if (q.abstain_allowed && best_p < abstain_below) return "I don't know";
    return best;
  };
}

CachingProvider::CachingProvider(std::shared_ptr<ChatProvider> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (std::filesystem::exists(path_)) cache_ = MockProvider::LoadScript(path_);
}

ChatResponse CachingProvider::Complete(const ChatRequest& request) {
  const std::string fp = request.Fingerprint();
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(fp);
    if (it != cache_.end()) {
      ++hits_;
      return {it->second, {}, 1};
    }
  }
  ChatResponse r = inner_->Complete(request);
  std::lock_guard<std::mutex> lock(mu_);
  ++misses_;
  if (cache_.emplace(fp, r.text).second) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to cache " + path_.string());
    nlohmann::ordered_json rec;
    rec["fingerprint"] = fp;
    rec["text"] = r.text;
    out << rec.dump() << '\n';
  }
  return r;
}

std::size_t CachingProvider::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::size_t CachingProvider::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

std::vector<CallOutcome> CompleteAll(ChatProvider& provider,
                                     const std::vector<ChatRequest>& requests,
                                     int max_parallel) {
  std::vector<CallOutcome> out(requests.size());
  auto run = [&](std::size_t i) {
    try {
      out[i].response = provider.Complete(requests[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  };
  std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_parallel)), requests.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) run(i);
      });
    }
  }
  return out;
}

std::string_view AnswerKindName(ParsedAnswer::Kind kind) {
  switch (kind) {
    case ParsedAnswer::Kind::kLabel: return "label";
    case ParsedAnswer::Kind::kAbstain: return "abstain";
    case ParsedAnswer::Kind::kMalformed: return "malformed";
  }
  return "malformed";
}

ParsedAnswer ParseAnswer(std::string_view text, const std::vector<std::string>& dictionary,
                         bool lenient) {
  std::string_view trimmed = TrimReply(text);
  std::string lowered = ToLower(trimmed);
  for (const auto& word : dictionary) {
    if (ToLower(word) == lowered) return ParsedAnswer::Label(word);
  }
  if (IsAbstainText(trimmed)) return ParsedAnswer::Abstain();
  if (lenient) {
    std::string hay = ToLower(NormalizeApostrophes(text));
    std::set<std::string> hits;
    for (const auto& word : dictionary) {
      if (ContainsWholeWord(hay, ToLower(word))) hits.insert(word);
    }
    if (hits.size() == 1) return ParsedAnswer::Label(*hits.begin());
    if (hits.empty() && hay.find("i don't know") != std::string::npos) {
      return ParsedAnswer::Abstain();
    }
  }
  return ParsedAnswer::Malformed(std::string(text));
}

ConfidenceAnswer ParseConfidence(std::string_view text,
                                 const std::vector<std::string>& dictionary) {
  ConfidenceAnswer out{ParsedAnswer::Malformed(std::string(text)), std::nullopt};
  std::string_view s = Trim(text);
  while (!s.empty() && (s.back() == '.' || s.back() == '"')) s.remove_suffix(1);
  if (s.empty() || s.back() != ')') return out;
  auto open = s.rfind('(');
  if (open == std::string_view::npos) return out;
  std::string number(Trim(s.substr(open + 1, s.size() - open - 2)));
  if (number.empty()) return out;
  char* end = nullptr;
  double value = std::strtod(number.c_str(), &end);
  if (end != number.c_str() + number.size() || !(value >= 0.0 && value <= 1.0)) return out;
  ParsedAnswer word = ParseAnswer(s.substr(0, open), dictionary, false);
  if (word.kind == ParsedAnswer::Kind::kMalformed) return out;
  return {word, value};
}

}  // namespace advsum
