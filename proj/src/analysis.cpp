#include "markov_sgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "markov_sgd/error.hpp"
#include "markov_sgd/verify.hpp"

namespace markov_sgd {

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::DistSq: return "dist_sq";
    case Metric::FGap: return "f_gap";
    case Metric::GradSq: return "grad_sq";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "dist_sq") return Metric::DistSq;
  if (name == "f_gap") return Metric::FGap;
  if (name == "grad_sq") return Metric::GradSq;
  throw Error(ErrorCode::ConfigError, "unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::Satisfied: return "Satisfied";
    case Verdict::Violated: return "Violated";
    case Verdict::PremiseSkipped: return "PremiseSkipped";
  }
  return "unknown";
}

double metric_value(const Record& record, Metric metric) {
  switch (metric) {
    case Metric::DistSq: return record.dist_sq;
    case Metric::FGap: return record.f_gap;
    case Metric::GradSq: return record.grad_sq;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

}  // namespace

MeanCurve mean_curve(const std::vector<Trajectory>& trajectories, Metric metric) {
  if (trajectories.empty()) throw Error(ErrorCode::InvalidArgument, "no trajectories to aggregate");
  const auto& ref = trajectories.front().records;
  for (const auto& t : trajectories) {
    if (t.records.size() != ref.size()) throw Error(ErrorCode::GridMismatch, "trajectories have different grids");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (t.records[i].k != ref[i].k) throw Error(ErrorCode::GridMismatch, "trajectories have different grids");
    }
  }
  const auto n = static_cast<double>(trajectories.size());
  MeanCurve curve;
  curve.reserve(ref.size());
  std::vector<double> values(trajectories.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t s = 0; s < trajectories.size(); ++s) values[s] = metric_value(trajectories[s].records[i], metric);
    CurvePoint p;
    p.k = ref[i].k;
    p.mean = sorted_sum(values) / n;
    if (trajectories.size() > 1) {
      std::vector<double> dev(values.size());
      for (std::size_t s = 0; s < values.size(); ++s) dev[s] = (values[s] - p.mean) * (values[s] - p.mean);
      const double var = sorted_sum(dev) / (n - 1.0);
      p.half_width = 1.96 * std::sqrt(var / n);
    }
    curve.push_back(p);
  }
  return curve;
}

std::vector<Trajectory> usable(const std::vector<Trajectory>& trajectories) {
  std::vector<Trajectory> out;
  for (const auto& t : trajectories) {
    if (t.error.empty() && !t.diverged) out.push_back(t);
  }
  return out;
}

std::size_t fit_window_start(std::size_t kstar) { return std::max<std::size_t>(kstar, 100); }

RateFit fit_rate(const MeanCurve& curve, std::size_t k_lo, std::size_t k_hi, Metric metric) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : curve) {
    if (p.k < k_lo || p.k > k_hi) continue;
    if (!(p.mean > 0.0)) throw Error(ErrorCode::NonPositiveMetric, "mean at k=" + std::to_string(p.k) + " is not positive");
    xs.push_back(std::log(static_cast<double>(p.k)));
    ys.push_back(std::log(p.mean));
  }
  if (xs.size() < 10) throw Error(ErrorCode::InvalidArgument, "fit needs at least 10 checkpoints in range");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  RateFit fit;
  fit.metric = metric;
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  fit.points = xs.size();
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += r * r;
  }
  // A flat curve leaves only rounding noise in syy; call that a perfect fit.
  const double noise = 1e-24 * n * std::max(1.0, my * my);
  fit.r2 = syy > noise ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return fit;
}

SamplingComparison compare_sampling(const MeanCurve& markov, const MeanCurve& iid, std::size_t kstar) {
  if (markov.size() != iid.size()) throw Error(ErrorCode::GridMismatch, "curves have different grids");
  SamplingComparison out;
  out.max_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < markov.size(); ++i) {
    if (markov[i].k != iid[i].k) throw Error(ErrorCode::GridMismatch, "curves have different grids");
    const double r = markov[i].mean == iid[i].mean ? 1.0 : markov[i].mean / iid[i].mean;
    out.k.push_back(markov[i].k);
    out.ratio.push_back(r);
    if (markov[i].k >= kstar && r > out.max_ratio) {
      out.max_ratio = r;
      out.argmax_k = markov[i].k;
    }
  }
  return out;
}

namespace {

void record_checks(BoundReport& report) {
  bool violated = false;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : report.checks) {
    const double ratio = c.lhs / c.rhs;
    if (c.lhs > c.rhs) violated = true;
    if (ratio > worst) {
      worst = ratio;
      report.k = c.k;
      report.lhs = c.lhs;
      report.rhs = c.rhs;
    }
  }
  if (!report.premises_hold) {
    report.verdict = Verdict::PremiseSkipped;
  } else if (report.checks.empty()) {
    report.verdict = Verdict::PremiseSkipped;
    if (report.note.empty()) report.note = "no checkpoint beyond K*";
  } else {
    report.verdict = violated ? Verdict::Violated : Verdict::Satisfied;
  }
}

const CurvePoint* at(const MeanCurve& curve, std::size_t k) {
  for (const auto& p : curve) {
    if (p.k == k) return &p;
  }
  return nullptr;
}

}  // namespace

BoundReport check_bounds(const SampledObjective& objective, const StepSchedule& schedule,
                         const std::vector<Trajectory>& trajectories, const Vector* start) {
  BoundReport report;
  report.regime = schedule.regime();
  report.premises_hold = schedule.premises_hold();
  const double m = objective.growth_constant();
  const double l = objective.smoothness();
  report.constants["M"] = m;
  report.constants["L"] = l;
  if (objective.sigma()) report.constants["sigma"] = *objective.sigma();
  report.constants["C"] = schedule.mixing_constant();
  report.constants["alpha0"] = schedule.alpha0();
  if (!schedule.has_kstar()) {
    report.premises_hold = false;
    report.verdict = Verdict::PremiseSkipped;
    report.note = "K* not found";
    return report;
  }
  const std::size_t kstar = schedule.kstar();
  report.constants["kstar"] = static_cast<double>(kstar);

  const auto runs = usable(trajectories);
  if (runs.empty()) {
    report.premises_hold = false;
    report.verdict = Verdict::PremiseSkipped;
    report.note = "no usable trajectories";
    return report;
  }

  if (schedule.regime() == Regime::Nonconvex) {
    const double delta = schedule.delta_raw();
    report.constants["delta"] = delta;
    report.k = schedule.horizon();
    std::vector<double> stops;
    for (const auto& t : runs) {
      if (t.stop) stops.push_back(t.stop->grad_sq);
    }
    if (stops.size() != runs.size()) {
      report.premises_hold = false;
      report.verdict = Verdict::PremiseSkipped;
      report.note = "stopping index not reached in every run";
      return report;
    }
    report.lhs = sorted_sum(stops) / static_cast<double>(stops.size());
    if (!(delta < 1.0 - 1e-9)) {
      report.premises_hold = false;
      report.verdict = Verdict::PremiseSkipped;
      report.note = "DeltaDegenerate";
      return report;
    }
    const auto c = thm3_constants(m, schedule.alpha0(), delta);
    report.constants["D3"] = c.d3;
    report.constants["D4"] = c.d4;
    bool f_gap_form = false;
    Metric metric = Metric::DistSq;
    if (objective.opt_set_kind() == OptSetKind::Unavailable) {
      if (!objective.f_star()) {
        report.premises_hold = false;
        report.verdict = Verdict::PremiseSkipped;
        report.note = "OptSetUnavailable";
        return report;
      }
      f_gap_form = true;
      metric = Metric::FGap;
    }
    const auto curve = mean_curve(runs, metric);
    const auto* p = at(curve, kstar);
    if (p == nullptr) {
      report.premises_hold = false;
      report.verdict = Verdict::PremiseSkipped;
      report.note = "K* not recorded";
      return report;
    }
    report.constants["kstar_stat"] = p->mean;
    report.rhs = bound_thm3({kstar, p->mean}, l, m, schedule.alpha0(), delta, schedule.horizon(), f_gap_form);
    report.checks.push_back({schedule.horizon(), report.lhs, report.rhs});
    if (f_gap_form) report.note = "f-gap form";
    record_checks(report);
    return report;
  }

  const auto curve = mean_curve(runs, Metric::DistSq);
  const auto* p = at(curve, kstar);
  if (p == nullptr) {
    report.premises_hold = false;
    report.verdict = Verdict::PremiseSkipped;
    report.note = "horizon below K*";
    return report;
  }
  const KstarStats stats{kstar, p->mean};
  report.constants["kstar_stat"] = p->mean;
  const double sigma = *objective.sigma();

  if (schedule.regime() == Regime::StronglyConvex) {
    for (const auto& q : curve) {
      if (q.k < kstar + 1) continue;
      const std::size_t k = q.k - 1;
      if (!(sigma * static_cast<double>(k) / 4.0 > 1.0)) continue;
      report.checks.push_back({q.k, q.mean, bound_thm1(stats, m, sigma, k)});
    }
  } else {
    const Vector& x_first = start != nullptr ? *start : runs.front().records.front().x;
    const double radius = 10.0 * (1.0 + objective.project_opt(x_first).norm());
    const double max_norm_sq = objective.opt_max_norm_sq(radius);
    const auto c = thm2_constants(m, l, max_norm_sq);
    report.constants["D1"] = c.d1;
    report.constants["D2"] = c.d2;
    report.constants["opt_radius"] = radius;
    report.constants["opt_max_norm_sq"] = max_norm_sq;
    for (const auto& q : curve) {
      if (q.k < kstar + 1) continue;
      report.checks.push_back({q.k, q.mean, bound_thm2(stats, l, sigma, schedule.alpha0(), c.d1, c.d2, q.k - 1)});
    }
    if (!report.premises_hold) report.note = "sigma alpha0 / L < 2";
  }
  record_checks(report);
  return report;
}

}  // namespace markov_sgd
