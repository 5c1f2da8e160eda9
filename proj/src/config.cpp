#include "markov_sgd/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "markov_sgd/error.hpp"

namespace markov_sgd {

namespace {

void require_keys(const Json& section, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!section.is_object()) throw Error(ErrorCode::ConfigError, std::string(where) + " must be an object");
  for (const auto& item : section.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw Error(ErrorCode::ConfigError, "unknown key '" + item.key() + "' in " + std::string(where));
  }
}

template <class T>
T get_or(const Json& section, const char* key, T fallback) {
  if (!section.contains(key)) return fallback;
  try {
    return section.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_required(const Json& section, const char* key, std::string_view where) {
  if (!section.contains(key)) {
    throw Error(ErrorCode::ConfigError, std::string("missing '") + key + "' in " + std::string(where));
  }
  return get_or<T>(section, key, T{});
}

Vector to_vector(const Json& j, std::string_view what) {
  if (!j.is_array()) throw Error(ErrorCode::ConfigError, std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::ConfigError, std::string(what) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const Json& j, std::string_view what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::ConfigError, std::string(what) + " must be a non-empty 2-D array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw Error(ErrorCode::ConfigError, std::string(what) + " rows must have equal length");
    }
    m.row(static_cast<Eigen::Index>(r)) = to_vector(j[r], what).transpose();
  }
  return m;
}

}  // namespace

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "malformed JSON in '" + path + "': " + e.what());
  }
}

void apply_override(Json& config, std::string_view dotted_key, std::string_view value) {
  if (dotted_key.empty()) throw Error(ErrorCode::ConfigError, "empty override key");
  Json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (part.empty()) throw Error(ErrorCode::ConfigError, "malformed override key '" + std::string(dotted_key) + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw Error(ErrorCode::ConfigError, "override path crosses a non-object");
      *node = Json::object();
    }
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  Json parsed = Json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? Json(std::string(value)) : parsed;
}

MarkovChain chain_from_json(const Json& section) {
  require_keys(section, "chain", {"P"});
  if (!section.contains("P")) throw Error(ErrorCode::ConfigError, "missing 'P' in chain");
  return validate_chain(to_matrix(section.at("P"), "chain.P"));
}

SampledObjective objective_from_json(const Json& section, const Vector& mu) {
  if (!section.is_object()) throw Error(ErrorCode::ConfigError, "objective must be an object");
  const Regime regime = parse_regime(get_required<std::string>(section, "regime", "objective"));
  const auto n_states = static_cast<std::size_t>(mu.size());
  switch (regime) {
    case Regime::StronglyConvex: {
      require_keys(section, "objective",
                   {"regime", "dim", "seed", "A", "b", "eig_lo", "eig_hi", "heterogeneity", "b_scale",
                    "b_heterogeneity"});
      if (section.contains("A")) {
        std::vector<Matrix> a;
        std::vector<Vector> b;
        for (const auto& m : section.at("A")) a.push_back(to_matrix(m, "objective.A"));
        for (const auto& v : get_required<Json>(section, "b", "objective")) b.push_back(to_vector(v, "objective.b"));
        return strongly_convex_from(std::move(a), std::move(b), mu);
      }
      StronglyConvexOptions o;
      o.eig_lo = get_or(section, "eig_lo", o.eig_lo);
      o.eig_hi = get_or(section, "eig_hi", o.eig_hi);
      o.heterogeneity = get_or(section, "heterogeneity", o.heterogeneity);
      o.b_scale = get_or(section, "b_scale", o.b_scale);
      o.b_heterogeneity = get_or(section, "b_heterogeneity", o.b_heterogeneity);
      return build_strongly_convex(get_required<std::size_t>(section, "dim", "objective"), n_states, mu,
                                   get_or<std::uint64_t>(section, "seed", 0), o);
    }
    case Regime::ErrorBound: {
      require_keys(section, "objective",
                   {"regime", "dim", "rank", "seed", "A", "b", "row_state", "eig_lo", "eig_hi", "heterogeneity",
                    "solution_scale"});
      if (section.contains("A")) {
        const Matrix a = to_matrix(section.at("A"), "objective.A");
        const Vector b = to_vector(get_required<Json>(section, "b", "objective"), "objective.b");
        std::vector<State> rows(static_cast<std::size_t>(a.rows()), 0);
        if (section.contains("row_state")) rows = section.at("row_state").get<std::vector<State>>();
        return error_bound_from(a, b, rows, mu);
      }
      ErrorBoundOptions o;
      o.eig_lo = get_or(section, "eig_lo", o.eig_lo);
      o.eig_hi = get_or(section, "eig_hi", o.eig_hi);
      o.heterogeneity = get_or(section, "heterogeneity", o.heterogeneity);
      o.solution_scale = get_or(section, "solution_scale", o.solution_scale);
      return build_error_bound(get_required<std::size_t>(section, "dim", "objective"),
                               get_required<std::size_t>(section, "rank", "objective"), n_states, mu,
                               get_or<std::uint64_t>(section, "seed", 0), o);
    }
    case Regime::Nonconvex: {
      require_keys(section, "objective",
                   {"regime", "dim", "seed", "a", "terms", "c_scale", "v_scale", "heterogeneity"});
      const double a = get_required<double>(section, "a", "objective");
      if (section.contains("terms")) {
        std::vector<CosineTerm> terms;
        for (const auto& t : section.at("terms")) {
          require_keys(t, "objective.terms[]", {"c", "v", "phi"});
          CosineTerm term;
          term.c = get_required<double>(t, "c", "objective.terms[]");
          term.v = to_vector(get_required<Json>(t, "v", "objective.terms[]"), "objective.terms[].v");
          term.phi = get_or(t, "phi", 0.0);
          terms.push_back(std::move(term));
        }
        return nonconvex_from(a, std::move(terms), mu);
      }
      NonconvexOptions o;
      o.c_scale = get_or(section, "c_scale", o.c_scale);
      o.v_scale = get_or(section, "v_scale", o.v_scale);
      o.heterogeneity = get_or(section, "heterogeneity", o.heterogeneity);
      return build_nonconvex(get_required<std::size_t>(section, "dim", "objective"), n_states, mu, a,
                             get_or<std::uint64_t>(section, "seed", 0), o);
    }
  }
  throw Error(ErrorCode::ConfigError, "unreachable regime");
}

StepSchedule schedule_from_json(const Json& section, const SampledObjective& objective, const MarkovChain& chain) {
  require_keys(section, "schedule", {"regime", "alpha0", "kstar_mode", "T"});
  const Regime regime = parse_regime(get_required<std::string>(section, "regime", "schedule"));
  if (regime != objective.regime()) {
    throw Error(ErrorCode::RegimeMismatch, "schedule regime '" + std::string(to_string(regime)) +
                                               "' does not match objective regime '" +
                                               std::string(to_string(objective.regime())) + "'");
  }
  std::optional<double> alpha0;
  if (section.contains("alpha0") && !section.at("alpha0").is_null()) alpha0 = get_or(section, "alpha0", 0.0);
  const KstarMode mode = parse_kstar_mode(get_or<std::string>(section, "kstar_mode", "conservative"));
  const auto horizon = get_or<std::size_t>(section, "T", 0);
  return StepSchedule(schedule_params_for(objective, chain.mixing_constant(), mode, alpha0, horizon));
}

RunConfig run_config_from_json(const Json& section) {
  require_keys(section, "engine",
               {"x0", "xi0", "horizon", "sampling", "seed", "record_every", "record_full", "n_seeds",
                "dump_iterates"});
  RunConfig cfg;
  if (section.contains("x0") && !section.at("x0").is_null()) cfg.x0 = to_vector(section.at("x0"), "engine.x0");
  cfg.xi0 = get_or<State>(section, "xi0", 0);
  cfg.horizon = get_required<std::size_t>(section, "horizon", "engine");
  cfg.sampling = parse_sampling(get_or<std::string>(section, "sampling", "markov"));
  cfg.seed = get_or<std::uint64_t>(section, "seed", 0);
  cfg.record_every = get_or<std::size_t>(section, "record_every", 1);
  cfg.record_full = get_or(section, "record_full", false);
  if (cfg.record_every < 1) throw Error(ErrorCode::ConfigError, "engine.record_every must be >= 1");
  return cfg;
}

Experiment build_experiment(const Json& config) {
  require_keys(config, "config", {"chain", "objective", "schedule", "engine", "output_dir"});
  for (const char* key : {"chain", "objective", "schedule", "engine"}) {
    if (!config.contains(key)) throw Error(ErrorCode::ConfigError, std::string("missing section '") + key + "'");
  }
  MarkovChain chain = chain_from_json(config.at("chain"));
  SampledObjective objective = objective_from_json(config.at("objective"), chain.stationary());
  StepSchedule schedule = schedule_from_json(config.at("schedule"), objective, chain);
  RunConfig run = run_config_from_json(config.at("engine"));
  const Json& engine = config.at("engine");
  const auto n_seeds = get_or<std::size_t>(engine, "n_seeds", 1);
  if (n_seeds < 1) throw Error(ErrorCode::ConfigError, "engine.n_seeds must be >= 1");
  if (run.xi0 >= chain.n_states()) throw Error(ErrorCode::InvalidState, "engine.xi0 out of range");
  return Experiment{config,
                    std::move(chain),
                    std::move(objective),
                    std::move(schedule),
                    std::move(run),
                    n_seeds,
                    get_or(engine, "dump_iterates", false),
                    get_or<std::string>(config, "output_dir", "out")};
}

std::uint64_t config_digest(const Json& config) {
  Json content = config;
  content.erase("output_dir");
  const std::string text = content.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace markov_sgd
