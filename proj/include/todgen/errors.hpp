// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace todgen {

enum class ErrorCode {
  IoError,
  ParseError,
  SchemaError,
  ConfigError,
  TerminalNode,
  GlobalMassExceedsOne,
  InvalidGraph,
  EmptyInput,
  MissingVariable,
  UnknownTemplate,
  AuthError,
  RateLimited,
  Timeout,
  MalformedResponse,
  BackendError,
  PromptError,
  DuplicateId,
  EmptyCorpus,
  TargetNotInCorpus,
  InvalidExample,
  FormatError,
  StateJsonError,
  LengthMismatch,
  UnknownLabel,
  TooFewUtterances,
  UnparseableJudgment,
  EmptyRatings,
  EmptyDataset,
  EmbedderError,
};

const char* to_string(ErrorCode code);

/// Single exception type for the whole library; the code identifies the
/// contract violation, the message carries the specifics.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string("[") + to_string(code) + "] " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace todgen
