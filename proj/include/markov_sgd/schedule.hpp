#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "markov_sgd/objectives.hpp"

namespace markov_sgd {

enum class KstarMode { Conservative, PaperLiteral };

std::string_view to_string(KstarMode mode) noexcept;
KstarMode parse_kstar_mode(std::string_view name);

struct ScheduleParams {
  Regime regime = Regime::StronglyConvex;
  std::optional<double> alpha0;  ///< regime default when absent
  double sigma = 0.0;            ///< unused for Nonconvex
  double smoothness = 0.0;
  double growth = 0.0;
  double mixing_constant = 0.0;
  std::size_t horizon = 0;       ///< T, Nonconvex only
  KstarMode kstar_mode = KstarMode::Conservative;
};

struct WindowSum {
  double value = 0.0;
  bool clamped = false;  ///< some index k - tau fell below 1
};

/// Diminishing step sizes for one regime, with mixing windows, K*, delta and
/// the stopping distribution P_R.
///
///   StronglyConvex  alpha_k = 4/(sigma k)
///   ErrorBound      alpha_k = alpha0/k,      alpha0 = min{1/(2L), 2L/sigma}
///   Nonconvex       alpha_k = alpha0/sqrt(k), k <= T
///
/// Immutable; K* is searched once on construction.
class StepSchedule {
 public:
  explicit StepSchedule(const ScheduleParams& params);

  Regime regime() const noexcept { return params_.regime; }
  KstarMode kstar_mode() const noexcept { return params_.kstar_mode; }
  double alpha0() const noexcept { return alpha0_; }
  double sigma() const noexcept { return params_.sigma; }
  double smoothness() const noexcept { return params_.smoothness; }
  double growth() const noexcept { return params_.growth; }
  double mixing_constant() const noexcept { return params_.mixing_constant; }
  std::size_t horizon() const noexcept { return params_.horizon; }

  /// HorizonExceeded for Nonconvex with k > T.
  double alpha(std::size_t k) const;
  std::size_t tau(std::size_t k) const;
  WindowSum alpha_window(std::size_t k) const;

  /// tau(alpha_k) alpha_{k - tau(alpha_k)}, the quantity the K* conditions bound.
  double tau_alpha_lag(std::size_t k) const;

  bool has_kstar() const noexcept { return kstar_.has_value(); }
  /// NotFound when no K* exists within the scan horizon.
  std::size_t kstar() const;

  /// True when every defining inequality of K* holds at k.
  bool kstar_condition(std::size_t k) const;

  /// max_{k in [1,T]} (sqrt(k) + M alpha0)/sqrt(k+1). DeltaOutOfRange if >= 1.
  double delta() const;
  /// Same quantity without the range check.
  double delta_raw() const;

  /// Upper limit for alpha0 in the Nonconvex regime under the current mode.
  double alpha0_cap() const;

  /// P_R over k = K*..T. EmptyRange when T < K*.
  std::vector<double> stopping_distribution() const;

  /// sigma alpha0 / L >= 2 for ErrorBound; alpha0 within the cap and delta < 1
  /// for Nonconvex; always true for StronglyConvex.
  bool premises_hold() const;

 private:
  ScheduleParams params_;
  double alpha0_ = 0.0;
  double delta_raw_ = 0.0;
  std::optional<std::size_t> kstar_;
};

/// Builds the schedule parameters from the paired objective and chain constants.
ScheduleParams schedule_params_for(const SampledObjective& objective, double mixing_constant,
                                   KstarMode mode = KstarMode::Conservative,
                                   std::optional<double> alpha0 = std::nullopt, std::size_t horizon = 0);

inline constexpr std::size_t kKstarScanHorizon = 10'000'000;
inline constexpr std::size_t kKstarRun = 1'000;

}  // namespace markov_sgd
