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

#pragma once

#include <stdexcept>
#include <string>

namespace advsum {

/// Coarse error categories. They map one-to-one onto the status codes of the
/// C API, so keep the two lists in sync.
enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kProvider = 4,
  kMismatch = 5,
  kBudget = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error InvalidArgument(const std::string& msg) {
  return Error(ErrorCode::kInvalidArgument, msg);
}
inline Error IoError(const std::string& msg) { return Error(ErrorCode::kIo, msg); }
inline Error ParseError(const std::string& msg) {
  return Error(ErrorCode::kParse, msg);
}

}  // namespace advsum
