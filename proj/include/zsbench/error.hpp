/*
 * Copyright 2026 The zsbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zsbench {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kCycle,
  kDanglingEdge,
  kDuplicate,
  kUnknownId,
  kDisconnected,
  kDimensionMismatch,
  kInfeasible,
  kSingular,
  kDivergence,
  kUndefined,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kDanglingEdge: return "dangling edge";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kUnknownId: return "unknown id";
    case ErrorCode::kDisconnected: return "disconnected";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kSingular: return "singular system";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kUndefined: return "undefined";
  }
  return "unknown";
}

// All library failures surface as this exception; `code()` lets callers and
// tests distinguish them without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// Parse failures carry "<source>:<line>" context.
[[noreturn]] inline void fail_at(std::string_view source, std::size_t line,
                                 const std::string& message) {
  throw Error(ErrorCode::kParse,
              std::string(source) + ":" + std::to_string(line) + ": " + message);
}

}  // namespace zsbench
