#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markov_sgd/engine.hpp"
#include "markov_sgd/schedule.hpp"

namespace markov_sgd {

enum class Metric { DistSq, FGap, GradSq };

std::string_view to_string(Metric metric) noexcept;
Metric parse_metric(std::string_view name);
double metric_value(const Record& record, Metric metric);

struct CurvePoint {
  std::size_t k = 0;
  double mean = 0.0;
  std::optional<double> half_width;  ///< 1.96 s / sqrt(n); absent for n = 1
};
using MeanCurve = std::vector<CurvePoint>;

/// Pointwise mean over trajectories. Values are sorted before summation, so
/// the result does not depend on the order of the input.
/// GridMismatch unless every trajectory has the same checkpoints.
MeanCurve mean_curve(const std::vector<Trajectory>& trajectories, Metric metric);

/// Trajectories that neither failed nor diverged.
std::vector<Trajectory> usable(const std::vector<Trajectory>& trajectories);

struct RateFit {
  Metric metric = Metric::DistSq;
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares of ln(mean) on ln(k) over k in [k_lo, k_hi]. Needs at least
/// 10 points (InvalidArgument); NonPositiveMetric if a mean is <= 0.
RateFit fit_rate(const MeanCurve& curve, std::size_t k_lo, std::size_t k_hi, Metric metric = Metric::DistSq);

/// max(K*, 100), the start of every fit window.
std::size_t fit_window_start(std::size_t kstar);

struct SamplingComparison {
  std::vector<std::size_t> k;
  std::vector<double> ratio;  ///< mean_markov / mean_iid
  double max_ratio = 0.0;     ///< over k >= kstar
  std::size_t argmax_k = 0;
};

SamplingComparison compare_sampling(const MeanCurve& markov, const MeanCurve& iid, std::size_t kstar);

enum class Verdict { Satisfied, Violated, PremiseSkipped };
std::string_view to_string(Verdict verdict) noexcept;

struct BoundCheck {
  std::size_t k = 0;  ///< checkpoint of the measured mean (or T)
  double lhs = 0.0;
  double rhs = 0.0;
};

struct BoundReport {
  Regime regime = Regime::StronglyConvex;
  std::size_t k = 0;    ///< checkpoint with the largest lhs/rhs ratio
  double lhs = 0.0;
  double rhs = 0.0;
  bool premises_hold = false;
  Verdict verdict = Verdict::PremiseSkipped;
  std::map<std::string, double> constants;
  std::vector<BoundCheck> checks;
  std::string note;
};

/// Compares the ensemble against the regime's theorem bound.
///
/// StronglyConvex / ErrorBound: mean ||x_j - x^_j||^2 at every checkpoint j with
/// j - 1 >= K* against the bound at k = j - 1. Nonconvex: mean ||grad f(x_R)||^2
/// against the bound at T. `start` (default: the first recorded iterate) fixes
/// the slice radius 10 (1 + ||proj(start)||) used for an affine X*.
BoundReport check_bounds(const SampledObjective& objective, const StepSchedule& schedule,
                         const std::vector<Trajectory>& trajectories, const Vector* start = nullptr);

}  // namespace markov_sgd
