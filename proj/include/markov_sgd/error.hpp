#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace markov_sgd {

/// Failure categories raised by the library. The CLI prints the name verbatim.
enum class ErrorCode {
  InvalidArgument,
  NonStochasticRow,
  Reducible,
  Periodic,
  NoConvergence,
  DimensionMismatch,
  HorizonExceeded,
  InvalidState,
  DegenerateSpectrum,
  RankInfeasible,
  ConvexityNotBroken,
  NonFiniteInput,
  OptSetUnavailable,
  OptSetUnbounded,
  NotFound,
  DeltaOutOfRange,
  DeltaDegenerate,
  EmptyRange,
  DivergenceDetected,
  RadiusExceeded,
  PremiseViolated,
  MissingIterates,
  GridMismatch,
  NonPositiveMetric,
  RegimeMismatch,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace markov_sgd
