#include "markov_sgd/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "markov_sgd/error.hpp"

namespace markov_sgd {

namespace fs = std::filesystem;

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << value;
  return os.str();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_record_fields(std::ostringstream& os, const Record& r) {
  os << format_number(r.dist_sq) << ',' << format_number(r.f_gap) << ',' << format_number(r.grad_sq) << ','
     << format_number(r.x_norm);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s) {
  if (s.empty()) return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw Error(ErrorCode::ConfigError, "bad number '" + s + "' in CSV");
  return v;
}

Metric headline_metric(Regime regime) { return regime == Regime::Nonconvex ? Metric::GradSq : Metric::DistSq; }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

fs::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

std::size_t kstar_or_zero(const StepSchedule& schedule) { return schedule.has_kstar() ? schedule.kstar() : 0; }

}  // namespace

std::string trajectories_csv(const std::vector<Trajectory>& trajectories) {
  std::ostringstream os;
  os << "k,seed,dist_sq,f_gap,grad_sq,x_norm\n";
  for (const auto& t : trajectories) {
    for (const auto& r : t.records) {
      os << r.k << ',' << t.seed << ',';
      write_record_fields(os, r);
      os << '\n';
    }
  }
  return os.str();
}

std::string stops_csv(const std::vector<Trajectory>& trajectories) {
  std::ostringstream os;
  os << "seed,R,dist_sq,f_gap,grad_sq,x_norm\n";
  for (const auto& t : trajectories) {
    if (!t.stop) continue;
    os << t.seed << ',' << t.stop->k << ',';
    write_record_fields(os, *t.stop);
    os << '\n';
  }
  return os.str();
}

std::string mean_curves_csv(const std::vector<Trajectory>& trajectories) {
  std::ostringstream os;
  os << "metric,k,mean,half_width\n";
  const auto runs = usable(trajectories);
  if (runs.empty()) return os.str();
  for (Metric metric : {Metric::DistSq, Metric::FGap, Metric::GradSq}) {
    const auto curve = mean_curve(runs, metric);
    for (const auto& p : curve) {
      if (std::isnan(p.mean)) continue;
      os << to_string(metric) << ',' << p.k << ',' << format_number(p.mean) << ','
         << (p.half_width ? format_number(*p.half_width) : std::string()) << '\n';
    }
  }
  return os.str();
}

std::string iterates_jsonl(const std::vector<Trajectory>& trajectories) {
  std::ostringstream os;
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.iterates.size(); ++i) {
      Json row;
      row["seed"] = t.seed;
      row["k"] = i + 1;
      row["xi"] = i < t.states.size() ? t.states[i] : 0;
      std::vector<double> x(t.iterates[i].data(), t.iterates[i].data() + t.iterates[i].size());
      row["x"] = x;
      os << row.dump() << '\n';
    }
  }
  return os.str();
}

std::vector<Trajectory> trajectories_from_csv(const std::string& trajectories, const std::string& stops) {
  std::map<std::uint64_t, Trajectory> by_seed;
  std::istringstream in(trajectories);
  std::string line;
  std::getline(in, line);
  if (line != "k,seed,dist_sq,f_gap,grad_sq,x_norm") throw Error(ErrorCode::ConfigError, "unexpected trajectory header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw Error(ErrorCode::ConfigError, "malformed trajectory row");
    const auto seed = std::stoull(f[1]);
    auto& t = by_seed[seed];
    t.seed = seed;
    Record r;
    r.k = std::stoull(f[0]);
    r.dist_sq = parse_number(f[2]);
    r.f_gap = parse_number(f[3]);
    r.grad_sq = parse_number(f[4]);
    r.x_norm = parse_number(f[5]);
    t.records.push_back(std::move(r));
  }
  std::istringstream sin(stops);
  if (std::getline(sin, line)) {
    while (std::getline(sin, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != 6) throw Error(ErrorCode::ConfigError, "malformed stop row");
      const auto seed = std::stoull(f[0]);
      Record r;
      r.k = std::stoull(f[1]);
      r.dist_sq = parse_number(f[2]);
      r.f_gap = parse_number(f[3]);
      r.grad_sq = parse_number(f[4]);
      r.x_norm = parse_number(f[5]);
      by_seed[seed].seed = seed;
      by_seed[seed].stop = std::move(r);
    }
  }
  std::vector<Trajectory> out;
  for (auto& [seed, t] : by_seed) out.push_back(std::move(t));
  return out;
}

Json to_json(const BoundReport& report) {
  Json j;
  j["regime"] = std::string(to_string(report.regime));
  j["k"] = report.k;
  j["lhs"] = report.lhs;
  j["rhs"] = report.rhs;
  j["premises_hold"] = report.premises_hold;
  j["verdict"] = std::string(to_string(report.verdict));
  j["constants"] = Json::object();
  for (const auto& [name, value] : report.constants) j["constants"][name] = value;
  j["checks"] = Json::array();
  for (const auto& c : report.checks) j["checks"].push_back({{"k", c.k}, {"lhs", c.lhs}, {"rhs", c.rhs}});
  j["note"] = report.note;
  return j;
}

Json to_json(const RateFit& fit) {
  return Json{{"metric", std::string(to_string(fit.metric))},
              {"k_range", {fit.k_lo, fit.k_hi}},
              {"slope", fit.slope},
              {"intercept", fit.intercept},
              {"r2", fit.r2},
              {"points", fit.points}};
}

Json to_json(const SamplingComparison& comparison) {
  Json ratios = Json::array();
  for (std::size_t i = 0; i < comparison.k.size(); ++i) {
    ratios.push_back({{"k", comparison.k[i]}, {"ratio", comparison.ratio[i]}});
  }
  return Json{{"max_ratio", comparison.max_ratio}, {"argmax_k", comparison.argmax_k}, {"ratios", ratios}};
}

std::optional<RateFit> headline_fit(const Experiment& experiment, const std::vector<Trajectory>& trajectories,
                                    std::string* why) {
  try {
    const auto runs = usable(trajectories);
    if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "no usable trajectories");
    const Metric metric = headline_metric(experiment.objective.regime());
    const auto curve = mean_curve(runs, metric);
    return fit_rate(curve, fit_window_start(kstar_or_zero(experiment.schedule)), experiment.run.horizon, metric);
  } catch (const std::exception& e) {
    if (why != nullptr) *why = e.what();
    return std::nullopt;
  }
}

Json resolve_config(Json config, const CommandOptions& options) {
  for (const auto& kv : options.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects KEY=VALUE, got '" + kv + "'");
    apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (options.seeds) config["engine"]["n_seeds"] = *options.seeds;
  if (options.seed) config["engine"]["seed"] = *options.seed;
  if (options.mode) config["engine"]["sampling"] = *options.mode;
  if (options.out) config["output_dir"] = *options.out;
  if (options.kstar_mode) config["schedule"]["kstar_mode"] = *options.kstar_mode;
  return config;
}

namespace {

struct Built {
  std::optional<Experiment> experiment;
  int status = 0;
};

Built build_or_report(const Json& config, std::ostream& err) {
  Built b;
  try {
    b.experiment.emplace(build_experiment(config));
  } catch (const Error& e) {
    err << e.what() << '\n';
    b.status = 1;
  } catch (const std::exception& e) {
    err << "ConfigError: " << e.what() << '\n';
    b.status = 1;
  }
  return b;
}

Json run_summary(const Experiment& exp, const std::vector<Trajectory>& trajs) {
  std::size_t diverged = 0;
  std::size_t failed = 0;
  for (const auto& t : trajs) {
    diverged += t.diverged ? 1 : 0;
    failed += t.error.empty() ? 0 : 1;
  }
  return Json{{"n_seeds", trajs.size()},
              {"diverged", diverged},
              {"failed", failed},
              {"sampling", std::string(to_string(exp.run.sampling))},
              {"horizon", exp.run.horizon},
              {"fit_window_start", fit_window_start(kstar_or_zero(exp.schedule))},
              {"config_digest", config_digest(exp.config)}};
}

void write_analysis(const Experiment& exp, const std::vector<Trajectory>& trajs, const fs::path& dir,
                    const Vector& start, std::ostream& out) {
  auto report = check_bounds(exp.objective, exp.schedule, trajs, &start);
  Json report_json = to_json(report);
  report_json["run"] = run_summary(exp, trajs);
  write_file(dir / "bound_report.json", report_json.dump(2) + "\n");

  std::string why;
  const auto fit = headline_fit(exp, trajs, &why);
  Json fit_json = fit ? to_json(*fit) : Json{{"error", why}};
  write_file(dir / "rate_fit.json", fit_json.dump(2) + "\n");
  write_file(dir / "mean_curve.csv", mean_curves_csv(trajs));

  out << "bound: " << to_string(report.verdict) << " (lhs " << format_number(report.lhs) << ", rhs "
      << format_number(report.rhs) << " at k=" << report.k << ")";
  if (!report.note.empty()) out << " [" << report.note << "]";
  out << '\n';
  if (fit) {
    out << "fit: slope " << format_number(fit->slope) << ", r2 " << format_number(fit->r2) << " over k in ["
        << fit->k_lo << ", " << fit->k_hi << "]\n";
  } else {
    out << "fit: unavailable (" << why << ")\n";
  }
}

Vector resolved_start(const Experiment& exp) {
  return exp.run.x0 ? *exp.run.x0 : default_x0(exp.objective, exp.run.seed);
}

}  // namespace

int cmd_validate(const Json& config, std::ostream& out, std::ostream& err) {
  auto built = build_or_report(config, err);
  if (!built.experiment) return built.status;
  const auto& exp = *built.experiment;
  const auto& obj = exp.objective;
  const auto& sched = exp.schedule;
  out << "chain: states " << exp.chain.n_states() << ", slem " << format_number(exp.chain.slem()) << ", C "
      << format_number(exp.chain.mixing_constant()) << '\n';
  out << "objective: " << to_string(obj.regime()) << ", dim " << obj.dim() << ", M "
      << format_number(obj.growth_constant()) << ", L " << format_number(obj.smoothness());
  if (obj.sigma()) out << ", sigma " << format_number(*obj.sigma());
  if (obj.f_star()) out << ", f* " << format_number(*obj.f_star());
  out << '\n';
  out << "schedule: alpha0 " << format_number(sched.alpha0()) << ", kstar_mode " << to_string(sched.kstar_mode());
  if (sched.has_kstar()) out << ", K* " << sched.kstar();
  if (sched.regime() == Regime::Nonconvex) out << ", T " << sched.horizon() << ", delta " << format_number(sched.delta_raw());
  out << ", premises " << (sched.premises_hold() ? "hold" : "fail") << '\n';

  std::uint64_t probe_seed = 0;
  if (exp.config.at("objective").contains("seed")) probe_seed = exp.config.at("objective").at("seed").get<std::uint64_t>();
  const auto suite = check_assumptions(obj, probe_seed, 1000, 100.0);
  for (const auto& t : suite.tallies) {
    out << "check " << t.name << ": " << t.checked - t.violations << "/" << t.checked << '\n';
  }
  if (const auto* bad = suite.first_failure()) {
    err << "AssumptionViolated: " << bad->name << '\n';
    return 1;
  }
  if (!sched.has_kstar()) {
    err << "NotFound: no K* within the scan horizon\n";
    return 1;
  }
  if (sched.regime() == Regime::Nonconvex && !(sched.delta_raw() < 1.0)) {
    err << "DeltaOutOfRange: delta = " << format_number(sched.delta_raw()) << '\n';
    return 1;
  }
  out << "ok\n";
  return 0;
}

int cmd_run(const Json& config, std::ostream& out, std::ostream& err) {
  auto built = build_or_report(config, err);
  if (!built.experiment) return built.status;
  const auto& exp = *built.experiment;
  fs::path dir;
  try {
    dir = prepare_output_dir(exp.output_dir);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  }
  try {
    RunConfig cfg = exp.run;
    cfg.record_full = cfg.record_full || exp.dump_iterates;
    const Vector start = resolved_start(exp);
    cfg.x0 = start;
    const auto trajs = run_ensemble(exp.chain, exp.objective, exp.schedule, cfg, exp.n_seeds);
    write_file(dir / "trajectories.csv", trajectories_csv(trajs));
    if (exp.objective.regime() == Regime::Nonconvex) write_file(dir / "stops.csv", stops_csv(trajs));
    if (exp.dump_iterates) write_file(dir / "iterates.jsonl", iterates_jsonl(trajs));
    write_analysis(exp, trajs, dir, start, out);

    std::size_t diverged = 0;
    for (const auto& t : trajs) {
      if (!t.error.empty()) err << "seed " << t.seed << ": " << t.error << '\n';
      diverged += t.diverged ? 1 : 0;
    }
    out << "wrote " << dir.string() << '\n';
    if (10 * diverged > trajs.size()) {
      err << "DivergenceDetected: " << diverged << " of " << trajs.size() << " seeds diverged\n";
      return 2;
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return e.code() == ErrorCode::IoError ? 1 : 2;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_compare(const Json& config, std::ostream& out, std::ostream& err) {
  auto built = build_or_report(config, err);
  if (!built.experiment) return built.status;
  const auto& exp = *built.experiment;
  fs::path dir;
  try {
    dir = prepare_output_dir(exp.output_dir);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  }
  try {
    RunConfig cfg = exp.run;
    cfg.x0 = resolved_start(exp);
    const Metric metric = headline_metric(exp.objective.regime());
    std::map<Sampling, std::vector<Trajectory>> runs;
    std::size_t diverged = 0;
    std::size_t total = 0;
    for (Sampling mode : {Sampling::Markov, Sampling::IID}) {
      cfg.sampling = mode;
      runs[mode] = run_ensemble(exp.chain, exp.objective, exp.schedule, cfg, exp.n_seeds);
      for (const auto& t : runs[mode]) diverged += t.diverged ? 1 : 0;
      total += runs[mode].size();
    }
    const auto markov = mean_curve(usable(runs[Sampling::Markov]), metric);
    const auto iid = mean_curve(usable(runs[Sampling::IID]), metric);
    const std::size_t kstar = kstar_or_zero(exp.schedule);
    const auto cmp = compare_sampling(markov, iid, kstar);

    Json report = to_json(cmp);
    report["metric"] = std::string(to_string(metric));
    report["kstar"] = kstar;
    report["n_seeds"] = exp.n_seeds;
    report["config_digest"] = config_digest(exp.config);
    for (Sampling mode : {Sampling::Markov, Sampling::IID}) {
      std::string why;
      const auto fit = headline_fit(exp, runs[mode], &why);
      report[std::string(to_string(mode)) + "_fit"] = fit ? to_json(*fit) : Json{{"error", why}};
    }
    write_file(dir / "compare.json", report.dump(2) + "\n");

    std::ostringstream curves;
    curves << "mode,k,mean,half_width\n";
    for (const auto& [mode, curve] : {std::pair{Sampling::Markov, &markov}, std::pair{Sampling::IID, &iid}}) {
      for (const auto& p : *curve) {
        curves << to_string(mode) << ',' << p.k << ',' << format_number(p.mean) << ','
               << (p.half_width ? format_number(*p.half_width) : std::string()) << '\n';
      }
    }
    write_file(dir / "compare_curves.csv", curves.str());
    out << "max ratio " << format_number(cmp.max_ratio) << " at k=" << cmp.argmax_k << " (k >= " << kstar << ")\n";
    out << "wrote " << dir.string() << '\n';
    if (10 * diverged > total) {
      err << "DivergenceDetected: " << diverged << " of " << total << " runs diverged\n";
      return 2;
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return e.code() == ErrorCode::IoError ? 1 : 2;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_report(const Json& config, std::ostream& out, std::ostream& err) {
  auto built = build_or_report(config, err);
  if (!built.experiment) return built.status;
  const auto& exp = *built.experiment;
  try {
    const fs::path dir(exp.output_dir);
    std::ifstream tin(dir / "trajectories.csv", std::ios::binary);
    if (!tin) throw Error(ErrorCode::IoError, "no trajectories.csv in '" + dir.string() + "'");
    std::ostringstream tbuf;
    tbuf << tin.rdbuf();
    std::string stops;
    if (std::ifstream sin(dir / "stops.csv", std::ios::binary); sin) {
      std::ostringstream sbuf;
      sbuf << sin.rdbuf();
      stops = sbuf.str();
    }
    const auto trajs = trajectories_from_csv(tbuf.str(), stops);
    write_analysis(exp, trajs, dir, resolved_start(exp), out);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return e.code() == ErrorCode::IoError ? 1 : 2;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace markov_sgd
