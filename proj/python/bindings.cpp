#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "markov_sgd/analysis.hpp"
#include "markov_sgd/chain.hpp"
#include "markov_sgd/engine.hpp"
#include "markov_sgd/error.hpp"
#include "markov_sgd/experiment.hpp"
#include "markov_sgd/objectives.hpp"
#include "markov_sgd/schedule.hpp"
#include "markov_sgd/verify.hpp"

namespace py = pybind11;
using namespace markov_sgd;

namespace {

py::tuple command(int (*fn)(const Json&, std::ostream&, std::ostream&), const std::string& config) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = fn(Json::parse(config), out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SGD driven by Markov-chain gradient samples";

  static py::exception<Error> error(m, "MarkovSgdError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<Regime>(m, "Regime")
      .value("StronglyConvex", Regime::StronglyConvex)
      .value("ErrorBound", Regime::ErrorBound)
      .value("Nonconvex", Regime::Nonconvex);
  py::enum_<KstarMode>(m, "KstarMode")
      .value("Conservative", KstarMode::Conservative)
      .value("PaperLiteral", KstarMode::PaperLiteral);
  py::enum_<Sampling>(m, "Sampling").value("Markov", Sampling::Markov).value("IID", Sampling::IID);
  py::enum_<Metric>(m, "Metric")
      .value("DistSq", Metric::DistSq)
      .value("FGap", Metric::FGap)
      .value("GradSq", Metric::GradSq);
  py::enum_<OptSetKind>(m, "OptSetKind")
      .value("Point", OptSetKind::Point)
      .value("Affine", OptSetKind::Affine)
      .value("NumericLowerBound", OptSetKind::NumericLowerBound)
      .value("Unavailable", OptSetKind::Unavailable);

  py::class_<MarkovChain>(m, "MarkovChain")
      .def_property_readonly("n_states", &MarkovChain::n_states)
      .def_property_readonly("P", &MarkovChain::transition)
      .def_property_readonly("mu", &MarkovChain::stationary)
      .def_property_readonly("slem", &MarkovChain::slem)
      .def_property_readonly("C", &MarkovChain::mixing_constant);

  m.def("validate_chain", &validate_chain, py::arg("P"));
  m.def("tv_distance", &tv_distance);
  m.def("mixing_time", [](const MarkovChain& c, double alpha) {
    const auto t = mixing_time(c, alpha);
    return py::make_tuple(t.measured, t.closed_form);
  });
  m.def("sample_path", &sample_path, py::arg("chain"), py::arg("xi0"), py::arg("length"), py::arg("seed"));
  m.def("sample_iid", &sample_iid, py::arg("chain"), py::arg("length"), py::arg("seed"));

  py::class_<SampledObjective>(m, "SampledObjective")
      .def_property_readonly("regime", &SampledObjective::regime)
      .def_property_readonly("dim", &SampledObjective::dim)
      .def_property_readonly("M", &SampledObjective::growth_constant)
      .def_property_readonly("L", &SampledObjective::smoothness)
      .def_property_readonly("sigma", &SampledObjective::sigma)
      .def_property_readonly("f_star", &SampledObjective::f_star)
      .def_property_readonly("opt_set_kind", &SampledObjective::opt_set_kind)
      .def("grad_sample", &SampledObjective::grad_sample)
      .def("mean_gradient", &SampledObjective::mean_gradient)
      .def("f_value", &SampledObjective::f_value)
      .def("project_opt", &SampledObjective::project_opt);

  m.def("build_strongly_convex",
        [](std::size_t dim, const Vector& mu, std::uint64_t seed, double eig_lo, double eig_hi, double heterogeneity,
           double b_scale, double b_heterogeneity) {
          return build_strongly_convex(dim, static_cast<std::size_t>(mu.size()), mu, seed,
                                       {eig_lo, eig_hi, heterogeneity, b_scale, b_heterogeneity});
        },
        py::arg("dim"), py::arg("mu"), py::arg("seed"), py::arg("eig_lo") = 0.9, py::arg("eig_hi") = 1.0,
        py::arg("heterogeneity") = 0.02, py::arg("b_scale") = 0.5, py::arg("b_heterogeneity") = 0.1);
  m.def("build_error_bound",
        [](std::size_t dim, std::size_t rank, const Vector& mu, std::uint64_t seed, double eig_lo, double eig_hi,
           double heterogeneity, double solution_scale) {
          return build_error_bound(dim, rank, static_cast<std::size_t>(mu.size()), mu, seed,
                                   {eig_lo, eig_hi, heterogeneity, solution_scale});
        },
        py::arg("dim"), py::arg("rank"), py::arg("mu"), py::arg("seed"), py::arg("eig_lo") = 4.0,
        py::arg("eig_hi") = 8.0, py::arg("heterogeneity") = 0.01, py::arg("solution_scale") = 1.0);
  m.def("build_nonconvex",
        [](std::size_t dim, const Vector& mu, double a, std::uint64_t seed, double c_scale, double v_scale,
           double heterogeneity) {
          return build_nonconvex(dim, static_cast<std::size_t>(mu.size()), mu, a, seed,
                                 {c_scale, v_scale, heterogeneity});
        },
        py::arg("dim"), py::arg("mu"), py::arg("a"), py::arg("seed"), py::arg("c_scale") = 1.0,
        py::arg("v_scale") = 1.0, py::arg("heterogeneity") = 0.1);

  py::class_<StepSchedule>(m, "StepSchedule")
      .def(py::init([](const SampledObjective& obj, double c, KstarMode mode, std::optional<double> alpha0,
                       std::size_t horizon) {
             return StepSchedule(schedule_params_for(obj, c, mode, alpha0, horizon));
           }),
           py::arg("objective"), py::arg("C"), py::arg("kstar_mode") = KstarMode::Conservative,
           py::arg("alpha0") = py::none(), py::arg("T") = 0)
      .def_property_readonly("alpha0", &StepSchedule::alpha0)
      .def_property_readonly("kstar", &StepSchedule::kstar)
      .def("alpha", &StepSchedule::alpha)
      .def("tau", &StepSchedule::tau)
      .def("alpha_window", [](const StepSchedule& s, std::size_t k) { return s.alpha_window(k).value; })
      .def("delta", &StepSchedule::delta)
      .def("stopping_distribution", &StepSchedule::stopping_distribution)
      .def("premises_hold", &StepSchedule::premises_hold);

  py::class_<Record>(m, "Record")
      .def_readonly("k", &Record::k)
      .def_readonly("xi", &Record::xi)
      .def_readonly("x", &Record::x)
      .def_readonly("dist_sq", &Record::dist_sq)
      .def_readonly("f_gap", &Record::f_gap)
      .def_readonly("grad_sq", &Record::grad_sq)
      .def_readonly("x_norm", &Record::x_norm);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("seed", &Trajectory::seed)
      .def_readonly("records", &Trajectory::records)
      .def_readonly("diverged", &Trajectory::diverged)
      .def_readonly("stop", &Trajectory::stop)
      .def("hash", &Trajectory::hash);

  auto make_config = [](std::optional<Vector> x0, State xi0, std::size_t horizon, Sampling sampling,
                        std::uint64_t seed, std::size_t record_every) {
    RunConfig cfg;
    cfg.x0 = std::move(x0);
    cfg.xi0 = xi0;
    cfg.horizon = horizon;
    cfg.sampling = sampling;
    cfg.seed = seed;
    cfg.record_every = record_every;
    return cfg;
  };
  m.def("run",
        [make_config](const MarkovChain& c, const SampledObjective& o, const StepSchedule& s, std::size_t horizon,
                      std::uint64_t seed, Sampling sampling, std::optional<Vector> x0, State xi0,
                      std::size_t record_every) {
          py::gil_scoped_release release;
          return run(c, o, s, make_config(std::move(x0), xi0, horizon, sampling, seed, record_every));
        },
        py::arg("chain"), py::arg("objective"), py::arg("schedule"), py::arg("horizon"), py::arg("seed") = 0,
        py::arg("sampling") = Sampling::Markov, py::arg("x0") = py::none(), py::arg("xi0") = 0,
        py::arg("record_every") = 1);
  m.def("run_ensemble",
        [make_config](const MarkovChain& c, const SampledObjective& o, const StepSchedule& s, std::size_t horizon,
                      std::size_t n_seeds, std::uint64_t seed, Sampling sampling, std::optional<Vector> x0) {
          py::gil_scoped_release release;
          return run_ensemble(c, o, s, make_config(std::move(x0), 0, horizon, sampling, seed, 1), n_seeds);
        },
        py::arg("chain"), py::arg("objective"), py::arg("schedule"), py::arg("horizon"), py::arg("n_seeds"),
        py::arg("seed") = 0, py::arg("sampling") = Sampling::Markov, py::arg("x0") = py::none());

  m.def("mean_curve", [](const std::vector<Trajectory>& t, Metric metric) {
    std::vector<py::tuple> out;
    for (const auto& p : mean_curve(t, metric)) out.push_back(py::make_tuple(p.k, p.mean, p.half_width));
    return out;
  });
  m.def("fit_rate", [](const std::vector<std::size_t>& k, const std::vector<double>& mean, std::size_t lo,
                       std::size_t hi) {
    MeanCurve curve;
    for (std::size_t i = 0; i < k.size() && i < mean.size(); ++i) curve.push_back({k[i], mean[i], std::nullopt});
    const auto f = fit_rate(curve, lo, hi);
    return py::dict(py::arg("slope") = f.slope, py::arg("intercept") = f.intercept, py::arg("r2") = f.r2,
                    py::arg("points") = f.points);
  });

  m.def("conditional_bias", &conditional_bias, py::arg("chain"), py::arg("objective"), py::arg("x"),
        py::arg("xi0"), py::arg("k"), py::arg("radius") = kBiasTestRadius);
  m.def("finite_diff_grad", &finite_diff_grad);
  m.def("bound_thm1", [](std::size_t kstar, double stat, double mm, double sigma, std::size_t k) {
    return bound_thm1({kstar, stat}, mm, sigma, k);
  });
  m.def("bound_thm2", [](std::size_t kstar, double stat, double l, double sigma, double a0, double d1, double d2,
                         std::size_t k) { return bound_thm2({kstar, stat}, l, sigma, a0, d1, d2, k); });
  m.def("bound_thm3", [](std::size_t kstar, double stat, double l, double mm, double a0, double delta,
                         std::size_t horizon) { return bound_thm3({kstar, stat}, l, mm, a0, delta, horizon); });

  m.def("cmd_validate", [](const std::string& c) { return command(&cmd_validate, c); },
        "Returns (exit_code, stdout, stderr) for a JSON config string.");
  m.def("cmd_run", [](const std::string& c) { return command(&cmd_run, c); });
  m.def("cmd_compare", [](const std::string& c) { return command(&cmd_compare, c); });
}
