#include "markov_sgd/error.hpp"

namespace markov_sgd {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::Periodic: return "Periodic";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::RankInfeasible: return "RankInfeasible";
    case ErrorCode::ConvexityNotBroken: return "ConvexityNotBroken";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::OptSetUnavailable: return "OptSetUnavailable";
    case ErrorCode::OptSetUnbounded: return "OptSetUnbounded";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::DeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorCode::DeltaDegenerate: return "DeltaDegenerate";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::RadiusExceeded: return "RadiusExceeded";
    case ErrorCode::PremiseViolated: return "PremiseViolated";
    case ErrorCode::MissingIterates: return "MissingIterates";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonPositiveMetric: return "NonPositiveMetric";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace markov_sgd
