#include "markov_sgd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "markov_sgd/error.hpp"

namespace markov_sgd {

std::string_view to_string(KstarMode mode) noexcept {
  return mode == KstarMode::Conservative ? "conservative" : "paper_literal";
}

KstarMode parse_kstar_mode(std::string_view name) {
  if (name == "conservative") return KstarMode::Conservative;
  if (name == "paper_literal") return KstarMode::PaperLiteral;
  throw Error(ErrorCode::ConfigError, "unknown kstar_mode '" + std::string(name) + "'");
}

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

double pick(KstarMode mode, double a, double b) {
  return mode == KstarMode::Conservative ? std::min(a, b) : std::max(a, b);
}

}  // namespace

StepSchedule::StepSchedule(const ScheduleParams& params) : params_(params) {
  if (!positive_finite(params_.growth)) throw Error(ErrorCode::InvalidArgument, "M must be positive");
  if (!positive_finite(params_.smoothness)) throw Error(ErrorCode::InvalidArgument, "L must be positive");
  if (!(std::isfinite(params_.mixing_constant) && params_.mixing_constant >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "C must be non-negative");
  }
  switch (params_.regime) {
    case Regime::StronglyConvex:
      if (!positive_finite(params_.sigma)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
      alpha0_ = params_.alpha0.value_or(4.0 / params_.sigma);
      break;
    case Regime::ErrorBound:
      if (!positive_finite(params_.sigma)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
      alpha0_ = params_.alpha0.value_or(
          std::min(1.0 / (2.0 * params_.smoothness), 2.0 * params_.smoothness / params_.sigma));
      break;
    case Regime::Nonconvex:
      if (params_.horizon < 1) throw Error(ErrorCode::InvalidArgument, "nonconvex schedule needs T >= 1");
      alpha0_ = params_.alpha0.value_or(alpha0_cap());
      break;
  }
  if (!positive_finite(alpha0_)) throw Error(ErrorCode::InvalidArgument, "alpha0 must be positive");
  if (params_.regime == Regime::Nonconvex) {
    const double shift = params_.growth * alpha0_;
    for (std::size_t k = 1; k <= params_.horizon; ++k) {
      const auto kd = static_cast<double>(k);
      delta_raw_ = std::max(delta_raw_, (std::sqrt(kd) + shift) / std::sqrt(kd + 1.0));
    }
  }

  const std::size_t limit =
      params_.regime == Regime::Nonconvex ? params_.horizon : kKstarScanHorizon + kKstarRun;
  std::size_t run = 0;
  for (std::size_t k = 1; k <= limit; ++k) {
    run = kstar_condition(k) ? run + 1 : 0;
    if (run == kKstarRun + 1) {
      kstar_ = k - kKstarRun;
      break;
    }
  }
  // A nonconvex run is finite: the tail up to T is all that must hold.
  if (!kstar_ && params_.regime == Regime::Nonconvex && run > 0) kstar_ = params_.horizon - run + 1;
}

double StepSchedule::alpha(std::size_t k) const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "step index starts at 1");
  const auto kd = static_cast<double>(k);
  if (params_.regime == Regime::Nonconvex) {
    if (k > params_.horizon) throw Error(ErrorCode::HorizonExceeded, "k beyond T");
    return alpha0_ / std::sqrt(kd);
  }
  return alpha0_ / kd;
}

std::size_t StepSchedule::tau(std::size_t k) const {
  return geometric_mixing_time(params_.mixing_constant, alpha(k));
}

WindowSum StepSchedule::alpha_window(std::size_t k) const {
  const std::size_t t = tau(k);
  WindowSum out;
  std::size_t first = 1;
  if (t >= k) {
    out.clamped = true;
  } else {
    first = k - t;
  }
  for (std::size_t u = first; u < k; ++u) out.value += alpha(u);
  return out;
}

double StepSchedule::tau_alpha_lag(std::size_t k) const {
  const std::size_t t = tau(k);
  if (t == 0) return 0.0;
  const std::size_t lag = t >= k ? 1 : k - t;
  return static_cast<double>(t) * alpha(lag);
}

bool StepSchedule::kstar_condition(std::size_t k) const {
  const std::size_t t = tau(k);
  if (k <= t) return false;
  const double lag = tau_alpha_lag(k);
  const double m = params_.growth;
  const double l = params_.smoothness;
  const double s = params_.sigma;
  const auto kd = static_cast<double>(k);
  const double log2_over_m = std::numbers::ln2 / m;
  switch (params_.regime) {
    case Regime::StronglyConvex:
      return lag <= pick(params_.kstar_mode, log2_over_m, s / (8.0 * (25.0 * m * m + 1.0))) &&
             std::log(s * kd / 4.0) <= kd / 2.0;
    case Regime::ErrorBound:
      return lag <= pick(params_.kstar_mode, log2_over_m, s / (l * s + 4.0 * m + 104.0 * m * m * l)) &&
             std::log(kd / alpha0_) <= kd / 2.0;
    case Regime::Nonconvex:
      if (lag > log2_over_m) return false;
      if (params_.kstar_mode == KstarMode::Conservative) {
        return static_cast<double>(t) <= std::sqrt(kd);
      }
      return std::log(std::sqrt(kd) / alpha0_) <=
             std::min(std::pow(delta_raw(), kd / 2.0), alpha0_ / std::sqrt(kd));
  }
  return false;
}

std::size_t StepSchedule::kstar() const {
  if (!kstar_) throw Error(ErrorCode::NotFound, "no K* within the scan horizon");
  return *kstar_;
}

double StepSchedule::delta_raw() const {
  if (params_.regime != Regime::Nonconvex) throw Error(ErrorCode::InvalidArgument, "delta is defined for Nonconvex only");
  return delta_raw_;
}

double StepSchedule::delta() const {
  const double d = delta_raw();
  if (!(d < 1.0)) throw Error(ErrorCode::DeltaOutOfRange, "delta >= 1; alpha0 too large for T");
  return d;
}

double StepSchedule::alpha0_cap() const {
  // (sqrt(k+1) - sqrt(k))/(2M) is largest at k = 1.
  const double gap_term = (std::numbers::sqrt2 - 1.0) / (2.0 * params_.growth);
  return pick(params_.kstar_mode, gap_term, 1.0 / params_.smoothness);
}

std::vector<double> StepSchedule::stopping_distribution() const {
  if (params_.regime != Regime::Nonconvex) {
    throw Error(ErrorCode::InvalidArgument, "stopping distribution is defined for Nonconvex only");
  }
  const std::size_t first = kstar();
  if (params_.horizon < first) throw Error(ErrorCode::EmptyRange, "T < K*");
  std::vector<double> weights;
  weights.reserve(params_.horizon - first + 1);
  double total = 0.0;
  for (std::size_t k = first; k <= params_.horizon; ++k) {
    const double a = alpha(k);
    const double w = 2.0 * a - params_.smoothness * a * a;
    if (!(w > 0.0)) throw Error(ErrorCode::PremiseViolated, "L alpha_k >= 2 inside the stopping range");
    weights.push_back(w);
    total += w;
  }
  for (auto& w : weights) w /= total;
  return weights;
}

bool StepSchedule::premises_hold() const {
  switch (params_.regime) {
    case Regime::StronglyConvex:
      return true;
    case Regime::ErrorBound:
      return params_.sigma * alpha0_ / params_.smoothness >= 2.0 * (1.0 - 1e-12);
    case Regime::Nonconvex:
      return alpha0_ <= alpha0_cap() * (1.0 + 1e-12) && delta_raw() < 1.0;
  }
  return false;
}

ScheduleParams schedule_params_for(const SampledObjective& objective, double mixing_constant, KstarMode mode,
                                   std::optional<double> alpha0, std::size_t horizon) {
  ScheduleParams p;
  p.regime = objective.regime();
  p.alpha0 = alpha0;
  p.sigma = objective.sigma().value_or(0.0);
  p.smoothness = objective.smoothness();
  p.growth = objective.growth_constant();
  p.mixing_constant = mixing_constant;
  p.horizon = horizon;
  p.kstar_mode = mode;
  return p;
}

}  // namespace markov_sgd
