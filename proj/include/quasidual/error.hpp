#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quasidual {

enum class ErrorCode {
  // prob_core
  NonPositiveProbability,
  ProbabilitySumMismatch,
  DuplicateLabel,
  LengthMismatch,
  OverlappingBlocks,
  UncoveredIndex,
  EmptyBlock,
  IndexOutOfRange,
  SpaceMismatch,
  DimensionMismatch,
  NotMeasurable,
  EmptyAtom,
  NonFiniteInput,
  NegativeDensity,
  // maps
  DomainViolation,
  WeightAllZero,
  NotGMeasurablePartition,
  InvalidParameter,
  UnsupportedOrientation,
  // dual engine
  BracketExhausted,
  SolverDiverged,
  NotCashInvariant,
  QNullAtom,
  // oracle
  AtomTooLarge,
  EmptyFeasibleGrid,
  TooManyAtoms,
  // cli
  ParseError,
  ValidationError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace quasidual
