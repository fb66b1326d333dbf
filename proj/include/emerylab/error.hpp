#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emerylab {

enum class ErrorCode {
  NonPositiveProbability,
  ProbabilitySumViolation,
  RaggedDepth,
  InvalidTree,
  UnknownNode,
  LevelOutOfRange,
  SizeMismatch,
  PredictabilityViolation,
  NotSupermartingale,
  InitialValueTooLarge,
  GridStepInvalid,
  WindowTooShort,
  NonPositiveSwitchTarget,
  AlphaOutOfRange,
  ZeroGeneratorValue,
  InvalidGenerator,
  DegenerateReturns,
  Na1Fails,
  DegenerateNode,
  DualInfeasible,
  GapTooLarge,
  InvalidArgument,
  ParseError,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveProbability: return "NonPositiveProbability";
    case ErrorCode::ProbabilitySumViolation: return "ProbabilitySumViolation";
    case ErrorCode::RaggedDepth: return "RaggedDepth";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::PredictabilityViolation: return "PredictabilityViolation";
    case ErrorCode::NotSupermartingale: return "NotSupermartingale";
    case ErrorCode::InitialValueTooLarge: return "InitialValueTooLarge";
    case ErrorCode::GridStepInvalid: return "GridStepInvalid";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::NonPositiveSwitchTarget: return "NonPositiveSwitchTarget";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::ZeroGeneratorValue: return "ZeroGeneratorValue";
    case ErrorCode::InvalidGenerator: return "InvalidGenerator";
    case ErrorCode::DegenerateReturns: return "DegenerateReturns";
    case ErrorCode::Na1Fails: return "Na1Fails";
    case ErrorCode::DegenerateNode: return "DegenerateNode";
    case ErrorCode::DualInfeasible: return "DualInfeasible";
    case ErrorCode::GapTooLarge: return "GapTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace emerylab
