#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mftg/cli.hpp"
#include "mftg/recursion.hpp"
#include "mftg/scenario.hpp"
#include "mftg/simulate.hpp"
#include "mftg/verify.hpp"

namespace py = pybind11;

namespace {

py::dict table_dict(const mftg::Solution& sol) {
  py::dict d;
  d["alpha_bar"] = sol.table.alpha_bar;
  d["alpha"] = sol.table.alpha;
  d["gamma_bar"] = sol.table.gamma_bar;
  d["mean_gain"] = sol.gains.mean_gain;
  d["dev_gain"] = sol.gains.dev_gain;
  d["closed_loop_mean"] = sol.gains.closed_loop_mean;
  d["closed_loop_dev"] = sol.gains.closed_loop_dev;
  return d;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = mftg::cli::run(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field-type games with higher-order costs: solver, simulator and checks.";

  py::register_exception<mftg::Error>(m, "Error");
  py::register_exception<mftg::ParseError>(m, "ParseError", m.attr("Error"));
  py::register_exception<mftg::SchemaError>(m, "SchemaError", m.attr("Error"));
  py::register_exception<mftg::ValidationError>(m, "ValidationError", m.attr("Error"));
  py::register_exception<mftg::SingularityError>(m, "SingularityError", m.attr("Error"));
  py::register_exception<mftg::OverflowError>(m, "NumericOverflowError", m.attr("Error"));
  py::register_exception<mftg::DomainError>(m, "DomainError", m.attr("Error"));
  py::register_exception<mftg::ResourceError>(m, "ResourceError", m.attr("Error"));
  py::register_exception<mftg::PreconditionError>(m, "PreconditionError", m.attr("Error"));

  py::class_<mftg::Scenario>(m, "Scenario")
      .def_property_readonly("family",
                             [](const mftg::Scenario& s) { return std::string(to_string(s.family)); })
      .def_readonly("agents", &mftg::Scenario::agents)
      .def_readonly("horizon", &mftg::Scenario::horizon)
      .def_readonly("p", &mftg::Scenario::p)
      .def_readonly("o", &mftg::Scenario::o)
      .def("to_json", [](const mftg::Scenario& s) { return mftg::serialize(s); });

  m.def("load_scenario", [](const std::string& text) { return mftg::load_scenario(text); },
        py::arg("text"));
  m.def("load_scenario_file", &mftg::load_scenario_file, py::arg("path"));
  m.def("solve", [](const mftg::Scenario& s) { return table_dict(mftg::solve(s)); },
        py::arg("scenario"));

  m.def(
      "mean_path",
      [](const mftg::Scenario& s) {
        const auto path = mftg::propagate_mean(s, mftg::solve(s).gains);
        return py::make_tuple(path.x_bar, path.u_bar);
      },
      py::arg("scenario"));

  m.def(
      "simulate",
      [](const mftg::Scenario& s, std::uint64_t paths, std::uint64_t seed, unsigned threads) {
        const auto sol = mftg::solve(s);
        mftg::EnsembleOptions options;
        options.paths = paths;
        options.seed = seed;
        options.threads = threads;
        options.keep_trajectories = false;
        const auto e = mftg::run_ensemble(s, sol.gains, options);
        py::list costs;
        for (const auto& c : mftg::evaluate_cost(s, e, sol.table)) {
          py::dict d;
          d["total"] = c.total;
          d["predicted"] = c.predicted;
          d["standard_error"] = c.standard_error;
          costs.append(d);
        }
        py::dict d;
        d["empirical_mean"] = e.empirical_mean;
        d["empirical_variance"] = e.empirical_variance;
        d["model_mean"] = e.mean_path.x_bar;
        d["costs"] = costs;
        return d;
      },
      py::arg("scenario"), py::arg("paths"), py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "verify",
      [](const mftg::Scenario& s, std::uint64_t paths) {
        mftg::VerifyOptions options;
        options.deviation.paths = paths;
        const auto report = mftg::verify_solution(s, mftg::solve(s), options);
        py::dict d;
        d["pass"] = report.pass();
        d["failing_criterion"] = report.failing_criterion();
        d["deviation_margin"] = report.deviation_margin;
        d["stationarity"] = report.stationarity;
        d["bellman_max"] = report.bellman_max();
        d["convexity_min"] = report.convexity_min;
        d["positivity"] = report.positivity();
        return d;
      },
      py::arg("scenario"), py::arg("paths") = 2000);

  m.def("run_cli", &run_cli, py::arg("args"),
        "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");
}
