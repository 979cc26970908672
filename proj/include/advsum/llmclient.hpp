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

// Chat-completion providers (HTTP, scripted mock, response cache) and reply
// parsing.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advsum/error.hpp"
#include "advsum/prompts.hpp"

namespace advsum {

struct SurrogateModel;

struct ChatRequest {
  std::string model_id;
  ChatPrompt messages;
  double temperature = 0.0;
  int max_tokens = 16;

  void Validate() const;
  /// Wire body: {"model", "messages": [{role, content}], "temperature",
  /// "max_tokens"}.
  std::string ToJson() const;
  /// SHA-256 of ToJson(); keys the mock script and the response cache.
  std::string Fingerprint() const;
};

struct ChatResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

/// Terminal provider failure. `status` is the last HTTP status, or 0 when no
/// response was received.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& msg, int status, int attempts)
      : Error(ErrorCode::kProvider, msg), status_(status), attempts_(attempts) {}
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  int attempts_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Safe to call from several threads at once.
  virtual ChatResponse Complete(const ChatRequest& request) = 0;
};

struct ProviderConfig {
  std::string endpoint;
  /// Name of the environment variable that holds the API key; empty means
  /// no Authorization header.
  std::string auth_env_var;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  int max_parallel = 1;
  std::chrono::milliseconds timeout{60000};

  void Validate() const;
};

struct HttpReply {
  int status = 0;  // 0: no response (timeout, connection failure)
  std::string body;
  std::string error;
};

using Headers = std::vector<std::pair<std::string, std::string>>;
using Transport =
    std::function<HttpReply(const std::string& url, const std::string& body, const Headers&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// POSTs JSON with cpp-httplib (http and https).
Transport MakeHttpTransport(std::chrono::milliseconds timeout);

/// OpenAI-style chat-completions client. Retries timeouts, 429 and 5xx with
/// exponential backoff (backoff_base * 2^attempt); 401/403, other 4xx and
/// unreadable payloads are terminal.
class HttpProvider : public ChatProvider {
 public:
  explicit HttpProvider(ProviderConfig config, Transport transport = {}, Sleeper sleep = {});
  ChatResponse Complete(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  Transport transport_;
  Sleeper sleep_;
};

using Fallback = std::function<std::string(const ChatRequest&)>;

/// Answers from a fingerprint -> text script, else from `fallback`. Without
/// a fallback, unscripted requests raise ProviderError.
class MockProvider : public ChatProvider {
 public:
  explicit MockProvider(std::map<std::string, std::string> script, Fallback fallback = {});
  ChatResponse Complete(const ChatRequest& request) override;

  /// Reads {"fingerprint", "text"} lines (the response-cache format).
  static std::map<std::string, std::string> LoadScript(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> script_;
  Fallback fallback_;
};

/// Offline stand-in for a chat model. Classification queries get the
/// surrogate's most likely dictionary word (or the abstain reply when allowed
/// and the surrogate is unsure), confidence queries "word (p)", recovery
/// queries the code with dead-code and print templates removed, and
/// meta-prompting requests the stored generated prompts.
Fallback SurrogateFallback(std::shared_ptr<const SurrogateModel> model,
                           double abstain_below = 0.5);

/// Replays responses from a newline-delimited {"fingerprint", "text"} file
/// and appends every fresh response to it.
class CachingProvider : public ChatProvider {
 public:
  CachingProvider(std::shared_ptr<ChatProvider> inner, std::filesystem::path path);
  ChatResponse Complete(const ChatRequest& request) override;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

struct CallOutcome {
  std::optional<ChatResponse> response;
  std::string error;  // set when response is empty
};

/// Runs `requests` with up to `max_parallel` in flight. outcome[i] belongs to
/// requests[i] regardless of completion order.
std::vector<CallOutcome> CompleteAll(ChatProvider& provider,
                                     const std::vector<ChatRequest>& requests,
                                     int max_parallel);

struct ParsedAnswer {
  enum class Kind { kLabel, kAbstain, kMalformed };
  Kind kind = Kind::kMalformed;
  /// Dictionary word for kLabel, raw reply for kMalformed.
  std::string value;

  static ParsedAnswer Label(std::string name) { return {Kind::kLabel, std::move(name)}; }
  static ParsedAnswer Abstain() { return {Kind::kAbstain, {}}; }
  static ParsedAnswer Malformed(std::string raw) { return {Kind::kMalformed, std::move(raw)}; }
  bool operator==(const ParsedAnswer&) const = default;
};

std::string_view AnswerKindName(ParsedAnswer::Kind kind);

/// Strict: the trimmed reply (whitespace, punctuation, quotes) must equal a
/// dictionary word or "i don't know", case-insensitively. Lenient also
/// accepts a reply that contains exactly one dictionary word as a whole word.
ParsedAnswer ParseAnswer(std::string_view text, const std::vector<std::string>& dictionary,
                         bool lenient = false);

struct ConfidenceAnswer {
  ParsedAnswer answer;
  std::optional<double> confidence;
};

/// "word (0.85)" form. A missing or out-of-range confidence gives Malformed.
ConfidenceAnswer ParseConfidence(std::string_view text,
                                 const std::vector<std::string>& dictionary);

/// Drops "if false : X = 1" and "print ( X )" templates from a token stream.
std::string RemoveInsertedTemplates(std::string_view code);

}  // namespace advsum
