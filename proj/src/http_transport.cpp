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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "advsum/llmclient.hpp"

namespace advsum {

Transport MakeHttpTransport(std::chrono::milliseconds timeout) {
  return [timeout](const std::string& url, const std::string& body,
                   const Headers& headers) -> HttpReply {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw InvalidArgument("endpoint lacks a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    std::string base = url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : url.substr(slash);

    httplib::Client client(base);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") content_type = v;
      else h.emplace(k, v);
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  };
}

}  // namespace advsum
