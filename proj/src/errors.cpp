// SPDX-License-Identifier: Apache-2.0
#include "todgen/errors.hpp"

namespace todgen {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TerminalNode: return "TerminalNode";
    case ErrorCode::GlobalMassExceedsOne: return "GlobalMassExceedsOne";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::PromptError: return "PromptError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::TargetNotInCorpus: return "TargetNotInCorpus";
    case ErrorCode::InvalidExample: return "InvalidExample";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::StateJsonError: return "StateJsonError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::TooFewUtterances: return "TooFewUtterances";
    case ErrorCode::UnparseableJudgment: return "UnparseableJudgment";
    case ErrorCode::EmptyRatings: return "EmptyRatings";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmbedderError: return "EmbedderError";
  }
  return "Error";
}

}  // namespace todgen
