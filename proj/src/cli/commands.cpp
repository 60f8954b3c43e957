#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mftg/cli.hpp"
#include "mftg/recursion.hpp"
#include "mftg/scenario.hpp"
#include "mftg/simulate.hpp"
#include "mftg/verify.hpp"
#include "output.hpp"
#include "plot.hpp"

namespace mftg::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Terminal and summary text; tables keep full precision.
std::string brief(double value) {
  std::ostringstream os;
  os.precision(6);
  os << value;
  return os.str();
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string scenario;
  std::string out;
  std::string format = "csv";
  bool plot = false;
  unsigned threads = 0;
};

struct SimArgs {
  std::uint64_t paths = 0;
  std::uint64_t seed = 0;
  bool paths_set = false;
  bool seed_set = false;
  bool trajectories = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Scenario parse_input(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ParseError("scenario file is empty", 1, 1);
  }
  return load_scenario(text);
}

void check_format(const CommonArgs& args) {
  if (args.format != "csv") throw UsageError("unsupported --format '" + args.format + "' (csv)");
}

Series steps(int count) {
  Series k(count);
  for (int j = 0; j < count; ++j) k[j] = j;
  return k;
}

// ---------------------------------------------------------------------------
// Table writers

std::string coefficients_csv(const Scenario& s, const CoefficientTable& t) {
  CsvTable csv({"k", "agent", "alpha_bar", "alpha", "gamma_bar"});
  for (int k = 0; k <= s.horizon; ++k) {
    for (int i = 0; i < s.agents; ++i) {
      csv.row().add(k).add(i + 1).add(t.alpha_bar[i][k]);
      csv.add(t.alpha.empty() ? std::nullopt : std::optional(t.alpha[i][k]));
      csv.add(t.gamma_bar.empty() ? std::nullopt : std::optional(t.gamma_bar[i][k]));
    }
  }
  return csv.str();
}

std::string gains_csv(const Scenario& s, const GainSchedule& g) {
  CsvTable csv({"k", "agent", "mean_gain", "dev_gain", "c_bar", "c", "closed_loop_mean",
                "closed_loop_dev"});
  const bool dev = !g.dev_gain.empty();
  for (int k = 0; k < s.horizon; ++k) {
    for (int i = 0; i < s.agents; ++i) {
      csv.row().add(k).add(i + 1).add(g.mean_gain[i][k]);
      csv.add(dev ? std::optional(g.dev_gain[i][k]) : std::nullopt);
      csv.add(g.c_bar[i][k]);
      csv.add(dev ? std::optional(g.c_dev[i][k]) : std::nullopt);
      csv.add(g.closed_loop_mean[k]);
      csv.add(dev ? std::optional(g.closed_loop_dev[k]) : std::nullopt);
    }
  }
  return csv.str();
}

std::string meanpath_csv(const Scenario& s, const MeanPath& path) {
  std::vector<std::string> header{"k", "x_bar"};
  for (int i = 0; i < s.agents; ++i) header.push_back("u_bar_" + std::to_string(i + 1));
  CsvTable csv(std::move(header));
  for (int k = 0; k <= s.horizon; ++k) {
    csv.row().add(k).add(path.x_bar[k]);
    for (int i = 0; i < s.agents; ++i) {
      csv.add(k < s.horizon ? std::optional(path.u_bar[i][k]) : std::nullopt);
    }
  }
  return csv.str();
}

std::string ensemble_csv(const Scenario& s, const Ensemble& e) {
  CsvTable csv({"k", "emp_mean", "emp_var", "emp_moment_2o", "model_mean", "dev_moment"});
  for (int k = 0; k <= s.horizon; ++k) {
    csv.row().add(k).add(e.empirical_mean[k]).add(e.empirical_variance[k]);
    csv.add(e.empirical_moment[k]).add(e.mean_path.x_bar[k]).add(e.deviation_moment[k]);
  }
  return csv.str();
}

std::string control_stats_csv(const Scenario& s, const Ensemble& e) {
  CsvTable csv({"k", "agent", "emp_mean", "standard_error", "model_mean", "dev_moment"});
  for (int k = 0; k < s.horizon; ++k) {
    for (int i = 0; i < s.agents; ++i) {
      csv.row().add(k).add(i + 1).add(e.control_mean[i][k]).add(e.control_mean_se[i][k]);
      csv.add(e.mean_path.u_bar[i][k]).add(e.control_deviation_moment[i][k]);
    }
  }
  return csv.str();
}

std::string costs_csv(const std::vector<CostBreakdown>& costs, bool sampled) {
  CsvTable csv({"agent", "state_mean", "state_moment", "control_mean", "control_moment",
                "terminal_mean", "terminal_moment", "total", "predicted", "predicted_mean",
                "standard_error"});
  for (std::size_t i = 0; i < costs.size(); ++i) {
    const CostBreakdown& c = costs[i];
    csv.row().add(static_cast<int>(i + 1)).add(c.state_mean).add(c.state_moment);
    csv.add(c.control_mean).add(c.control_moment).add(c.terminal_mean).add(c.terminal_moment);
    csv.add(c.total).add(c.predicted).add(c.predicted_mean);
    csv.add(sampled ? std::optional(c.standard_error) : std::nullopt);
  }
  return csv.str();
}

std::string trajectories_csv(const Scenario& s, const Ensemble& e) {
  std::vector<std::string> header{"path", "k", "x"};
  for (int i = 0; i < s.agents; ++i) header.push_back("u_" + std::to_string(i + 1));
  CsvTable csv(std::move(header));
  for (std::size_t m = 0; m < e.states.rows; ++m) {
    for (int k = 0; k <= s.horizon; ++k) {
      csv.row().add(static_cast<long long>(m)).add(k).add(e.states(m, k));
      for (int i = 0; i < s.agents; ++i) {
        csv.add(k < s.horizon ? std::optional(e.controls[i](m, k)) : std::nullopt);
      }
    }
  }
  return csv.str();
}

std::string coefficients_plot(const Scenario& s, const CoefficientTable& t) {
  std::vector<PlotSeries> lines;
  const Series k = steps(s.horizon + 1);
  for (int i = 0; i < s.agents; ++i) {
    lines.push_back({"alpha_bar " + std::to_string(i + 1), k, t.alpha_bar[i]});
  }
  for (std::size_t i = 0; i < t.alpha.size(); ++i) {
    lines.push_back({"alpha " + std::to_string(i + 1), k, t.alpha[i]});
  }
  for (std::size_t i = 0; i < t.gamma_bar.size(); ++i) {
    lines.push_back({"gamma_bar " + std::to_string(i + 1), k, t.gamma_bar[i]});
  }
  return line_plot_svg("Cost-to-go coefficients", "k", "coefficient", lines);
}

// ---------------------------------------------------------------------------
// Shared steps

void record_scenario(RunOutput& run, const std::string& command, const std::string& path,
                     const std::string& text) {
  run.set("tool", "mftg");
  run.set("version", MFTG_VERSION);
  run.set("command", command);
  run.set("scenario", path);
  run.set("scenario_sha256", sha256_hex(text));
}

void write_solution(RunOutput& run, const Scenario& s, const Solution& sol, bool plot) {
  run.write("coefficients.csv", coefficients_csv(s, sol.table));
  run.write("gains.csv", gains_csv(s, sol.gains));
  if (plot) run.write("coefficients.svg", coefficients_plot(s, sol.table));
}

struct SimulationOutcome {
  MeanPath mean;
  std::optional<Ensemble> ensemble;
  std::vector<CostBreakdown> costs;
};

SimulationOutcome simulate_into(RunOutput& run, const Scenario& s, const Solution& sol,
                                const SimArgs& sim, const CommonArgs& common, std::ostream& err) {
  SimulationOutcome outcome;
  const std::uint64_t paths = sim.paths_set ? sim.paths : s.mc.paths;
  const std::uint64_t seed = sim.seed_set ? sim.seed : s.mc.seed;
  run.set("seed", std::to_string(seed));

  bool sample = paths > 0;
  if (sample && !s.stochastic()) {
    err << "warning: the deterministic family has no noise; --paths ignored, mean path only\n";
    sample = false;
  }
  if (sample && s.noise->kind == NoiseKind::ExplicitMoments) {
    err << "warning: explicit moment tables cannot be sampled; mean path only\n";
    sample = false;
  }
  run.set("paths", std::to_string(sample ? paths : 0));

  outcome.mean = propagate_mean(s, sol.gains);
  run.write("meanpath.csv", meanpath_csv(s, outcome.mean));
  if (sample) {
    EnsembleOptions eo;
    eo.paths = paths;
    eo.seed = seed;
    eo.threads = common.threads;
    eo.keep_trajectories = sim.trajectories;
    outcome.ensemble = run_ensemble(s, sol.gains, eo);
    const Ensemble& e = *outcome.ensemble;
    run.write("ensemble_stats.csv", ensemble_csv(s, e));
    run.write("control_stats.csv", control_stats_csv(s, e));
    if (sim.trajectories) {
      if (e.stored) {
        run.write("trajectories.csv", trajectories_csv(s, e));
      } else {
        err << "warning: " << paths << " paths exceed the storage cap; trajectories not kept\n";
      }
    }
    outcome.costs = evaluate_cost(s, e, sol.table);
  } else {
    outcome.costs = evaluate_cost(s, outcome.mean, sol.table);
  }
  run.write("costs.csv", costs_csv(outcome.costs, sample));

  if (common.plot) {
    const Series k = steps(s.horizon + 1);
    std::vector<PlotSeries> state{{"mean x_bar", k, outcome.mean.x_bar}};
    if (outcome.ensemble) state.push_back({"empirical mean", k, outcome.ensemble->empirical_mean});
    run.write("state.svg", line_plot_svg("State mean", "k", "x", state));
    std::vector<PlotSeries> controls;
    for (int i = 0; i < s.agents; ++i) {
      controls.push_back({"u_bar " + std::to_string(i + 1), steps(s.horizon), outcome.mean.u_bar[i]});
    }
    run.write("controls.svg", line_plot_svg("Equilibrium mean controls", "k", "u", controls));
    run.write("coefficients.svg", coefficients_plot(s, sol.table));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_solve(const CommonArgs& args, std::ostream& out) {
  check_format(args);
  const std::string text = read_text(args.scenario);
  const Scenario s = parse_input(text);
  const Solution sol = solve(s);
  RunOutput run(args.out);
  record_scenario(run, "solve", args.scenario, text);
  write_solution(run, s, sol, args.plot);
  run.write_manifest();
  out << "solved " << to_string(s.family) << " scenario: " << s.agents << " agents, N = "
      << s.horizon << "; outputs in " << args.out << "\n";
  return kOk;
}

int cmd_simulate(const CommonArgs& args, const SimArgs& sim, std::ostream& out,
                 std::ostream& err) {
  check_format(args);
  const std::string text = read_text(args.scenario);
  const Scenario s = parse_input(text);
  const Solution sol = solve(s);
  RunOutput run(args.out);
  record_scenario(run, "simulate", args.scenario, text);
  const SimulationOutcome outcome = simulate_into(run, s, sol, sim, args, err);
  run.write_manifest();
  for (std::size_t i = 0; i < outcome.costs.size(); ++i) {
    const CostBreakdown& c = outcome.costs[i];
    out << "agent " << i + 1 << ": realized " << brief(c.total) << ", predicted "
        << brief(c.predicted);
    if (outcome.ensemble) out << ", standard error " << brief(c.standard_error);
    out << "\n";
  }
  return kOk;
}

struct GainInjection {
  int agent;  // 0-based
  int step;   // -1 for every step
  double factor;
};

GainInjection parse_injection(const std::string& spec, const Scenario& s) {
  const auto first = spec.find(':');
  const auto second = first == std::string::npos ? first : spec.find(':', first + 1);
  if (second == std::string::npos) {
    throw UsageError("--inject-gain expects AGENT:STEP:FACTOR, got '" + spec + "'");
  }
  GainInjection g{};
  try {
    g.agent = std::stoi(spec.substr(0, first)) - 1;
    const std::string step = spec.substr(first + 1, second - first - 1);
    g.step = step == "*" ? -1 : std::stoi(step);
    g.factor = std::stod(spec.substr(second + 1));
  } catch (const std::exception&) {
    throw UsageError("--inject-gain expects AGENT:STEP:FACTOR, got '" + spec + "'");
  }
  if (g.agent < 0 || g.agent >= s.agents) throw UsageError("--inject-gain agent out of range");
  if (g.step < -1 || g.step >= s.horizon) throw UsageError("--inject-gain step out of range");
  return g;
}

DeviationGrid parse_grid(const std::string& spec) {
  DeviationGrid grid;
  if (spec.empty()) return grid;
  const auto colon = spec.find(':');
  try {
    grid.points = std::stoi(spec.substr(0, colon));
    if (colon != std::string::npos) grid.span = std::stod(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--grid expects POINTS[:SPAN], got '" + spec + "'");
  }
  if (grid.points < 1 || !(grid.span >= 0.0)) {
    throw UsageError("--grid needs POINTS >= 1 and SPAN >= 0");
  }
  return grid;
}

std::string step_label(int step) { return step < 0 ? "all" : std::to_string(step); }

int cmd_verify(const CommonArgs& args, const SimArgs& sim, const std::string& grid_spec,
               int probes, const std::string& injection, std::ostream& out, std::ostream& err) {
  check_format(args);
  if (probes < 1) throw UsageError("--probes must be >= 1");
  const std::string text = read_text(args.scenario);
  const Scenario s = parse_input(text);
  Solution sol = solve(s);

  VerifyOptions options;
  options.deviation.grid = parse_grid(grid_spec);
  options.deviation.paths = sim.paths_set ? sim.paths : (s.mc.paths > 0 ? s.mc.paths : 2000);
  options.deviation.seed = sim.seed_set ? sim.seed : s.mc.seed;
  options.deviation.threads = args.threads;
  options.probes = probes;

  RunOutput run(args.out);
  record_scenario(run, "verify", args.scenario, text);
  run.set("seed", std::to_string(options.deviation.seed));
  run.set("paths", std::to_string(options.deviation.paths));
  run.set("grid", std::to_string(options.deviation.grid.points) + ":" +
                      brief(options.deviation.grid.span));
  if (!injection.empty()) {
    const GainInjection g = parse_injection(injection, s);
    for (int k = 0; k < s.horizon; ++k) {
      if (g.step < 0 || g.step == k) sol.gains.mean_gain[g.agent][k] *= g.factor;
    }
    run.set("inject_gain", injection);
    err << "note: mean gain of agent " << g.agent + 1 << " at step " << step_label(g.step)
        << " scaled by " << brief(g.factor) << "\n";
  }

  const VerificationReport report = verify_solution(s, sol, options);

  CsvTable csv({"criterion", "agent", "step", "channel", "value", "tolerance", "pass", "detail"});
  auto flag = [](bool ok) { return ok ? "true" : "false"; };
  for (const DeviationResult& d : report.deviation) {
    for (const DeviationScan& scan : d.scans) {
      std::ostringstream detail;
      detail << "best_factor=" << format_number(scan.best_factor)
             << " equilibrium_cost=" << format_number(scan.equilibrium_cost);
      if (scan.channel == Channel::Deviation) {
        detail << " standard_error=" << format_number(scan.standard_error);
      }
      csv.row().add("deviation_margin").add(d.agent + 1).add(step_label(scan.step));
      csv.add(to_string(scan.channel)).add(scan.margin).add(scan.tolerance).add(flag(scan.pass));
      csv.add(detail.str());
    }
  }
  csv.row().add("open_loop_jitter").empty().add("all").add("mean").add(report.open_loop_margin);
  csv.add(-options.jitter_tolerance).add(flag(report.open_loop_pass)).add("smallest relative cost change");
  csv.row().add("stationarity").empty().add("all").empty().add(report.stationarity);
  csv.add(report.stationarity_tolerance).add(flag(report.stationarity <= report.stationarity_tolerance)).empty();
  csv.row().add("positivity_alpha_bar").empty().add("all").empty().add(report.alpha_bar_positive ? 1.0 : 0.0);
  csv.empty().add(flag(report.alpha_bar_positive)).empty();
  if (s.stochastic()) {
    csv.row().add("positivity_alpha").empty().add("all").empty().add(report.alpha_positive ? 1.0 : 0.0);
    csv.empty().add(flag(report.alpha_positive)).empty();
  }
  if (s.family == Family::Additive) {
    csv.row().add("nonnegativity_gamma_bar").empty().add("all").empty();
    csv.add(report.gamma_bar_nonnegative ? 1.0 : 0.0).empty().add(flag(report.gamma_bar_nonnegative)).empty();
  }
  csv.row().add("convexity_min").empty().add("all").empty().add(report.convexity_min).add(0.0);
  csv.add(flag(!report.convexity_sampled || report.convexity_min > 0.0));
  csv.add(report.convexity_sampled ? "" : "no step satisfies a != 0 and b != 0");
  for (int k = 0; k < s.horizon; ++k) {
    const double r = report.bellman_residual[k];
    csv.row().add("bellman_residual").empty().add(k).empty().add(r).add(report.bellman_tolerance);
    csv.add(flag(r <= report.bellman_tolerance)).empty();
  }
  if (s.p == 1) {
    const LqReductionResult lq = lq_reduction_check(s);
    csv.row().add("lq_reduction").empty().add("all").add("mean").add(lq.max_discrepancy).add(1e-12);
    csv.add(flag(lq.pass)).add(s.agents == 1 ? "gain and scalar Riccati" : "gain form");
  }
  run.write("report.csv", csv.str());

  std::ostringstream summary;
  summary << "verification of " << args.scenario << " (" << to_string(s.family) << ", "
          << s.agents << " agents, N = " << s.horizon << ", p = " << s.p;
  if (s.family == Family::GeneralMoment) summary << ", o = " << s.o;
  summary << ")\n\n";
  summary << "unilateral deviation (" << options.deviation.grid.points << " points, +/-"
          << brief(options.deviation.grid.span) << ")\n";
  for (const DeviationResult& d : report.deviation) {
    summary << "  agent " << d.agent + 1 << ": largest margin " << brief(d.margin)
            << (d.pass ? "  pass" : "  FAIL") << "\n";
  }
  summary << "open-loop jitter: smallest relative change " << brief(report.open_loop_margin)
          << (report.open_loop_pass ? "  pass" : "  FAIL") << "\n";
  summary << "stationarity: max residual " << brief(report.stationarity) << "\n";
  summary << "positivity: alpha_bar " << flag(report.alpha_bar_positive) << ", alpha "
          << flag(report.alpha_positive) << ", gamma_bar >= 0 " << flag(report.gamma_bar_nonnegative)
          << "\n";
  summary << "convexity: min sampled second derivative " << brief(report.convexity_min)
          << "\n";
  summary << "bellman identity: max residual " << brief(report.bellman_max()) << " over "
          << probes << " probes per step\n";
  for (const std::string& note : report.notes) summary << "note: " << note << "\n";
  summary << "\nresult: " << (report.pass() ? "PASS" : "FAIL (" + report.failing_criterion() + ")")
          << "\n";
  run.write("summary.txt", summary.str());
  run.write_manifest();

  out << summary.str();
  if (!report.pass()) {
    err << "verification failed: " << report.failing_criterion() << "\n";
    return kVerification;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepAxis {
  std::string key;
  std::vector<json> values;
};

std::vector<std::string> split_top_level(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  int depth = 0;
  bool quoted = false;
  for (const char c : text) {
    if (c == '"') quoted = !quoted;
    if (!quoted && (c == '[' || c == '{')) ++depth;
    if (!quoted && (c == ']' || c == '}')) --depth;
    if (c == ',' && depth == 0 && !quoted) {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  return parts;
}

SweepAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("--set expects KEY=V1,V2,..., got '" + spec + "'");
  }
  SweepAxis axis;
  axis.key = spec.substr(0, eq);
  const std::string values = spec.substr(eq + 1);
  if (values.find_first_not_of(" \t") == std::string::npos) {
    throw UsageError("--set " + axis.key + " has an empty value list");
  }
  for (const std::string& v : split_top_level(values)) {
    if (v.find_first_not_of(" \t") == std::string::npos) {
      throw UsageError("--set " + axis.key + " contains an empty value");
    }
    json parsed = json::parse(v, nullptr, false);
    axis.values.push_back(parsed.is_discarded() ? json(v) : parsed);
  }
  return axis;
}

void assign_path(json& doc, const std::string& key, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw UsageError("malformed sweep key '" + key + "'");
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = std::stoul(part);
      } catch (const std::exception&) {
        throw UsageError("sweep key '" + key + "': '" + part + "' is not a list index");
      }
      if (index >= node->size()) throw UsageError("sweep key '" + key + "': index out of range");
      node = &(*node)[index];
    } else if (node->is_object() || node->is_null()) {
      node = &(*node)[part];
    } else {
      throw UsageError("sweep key '" + key + "' descends into a scalar");
    }
    if (last) break;
    start = dot + 1;
  }
  *node = value;
}

int cmd_sweep(const CommonArgs& args, const SimArgs& sim, const std::vector<std::string>& sets,
              std::ostream& out, std::ostream& err) {
  check_format(args);
  if (sets.empty()) throw UsageError("sweep needs at least one --set KEY=V1,V2,...");
  std::vector<SweepAxis> axes;
  for (const std::string& spec : sets) axes.push_back(parse_axis(spec));

  const std::string text = read_text(args.scenario);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ParseError("scenario file is empty", 1, 1);
  }
  parse_input(text);  // the base scenario must be valid on its own
  const json base = json::parse(text, nullptr, true, true);

  std::vector<std::string> header{"run"};
  for (const SweepAxis& a : axes) header.push_back(a.key);
  std::vector<std::string> status_header = header;
  for (const char* h : {"status", "exit_code", "message"}) status_header.push_back(h);
  for (const char* h : {"k", "agent", "alpha_bar", "alpha", "gamma_bar", "mean_gain", "dev_gain",
                        "x_bar", "u_bar"}) {
    header.push_back(h);
  }
  CsvTable combined(header);
  CsvTable status(status_header);
  std::vector<PlotSeries> alpha_bar_lines;

  RunOutput top(args.out);
  record_scenario(top, "sweep", args.scenario, text);

  std::size_t total = 1;
  for (const SweepAxis& a : axes) total *= a.values.size();
  int first_failure = kOk;
  for (std::size_t r = 0; r < total; ++r) {
    std::vector<const json*> choice;
    std::size_t rest = r;
    for (std::size_t a = axes.size(); a-- > 0;) {
      choice.insert(choice.begin(), &axes[a].values[rest % axes[a].values.size()]);
      rest /= axes[a].values.size();
    }
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", r + 1);
    auto key_cells = [&](CsvTable& t) {
      t.row().add(std::string_view(name));
      for (const json* v : choice) t.add(v->is_string() ? v->get<std::string>() : v->dump());
    };

    int code = kOk;
    std::string message;
    try {
      json doc = base;
      for (std::size_t a = 0; a < axes.size(); ++a) assign_path(doc, axes[a].key, *choice[a]);
      const std::string run_text = doc.dump(2) + "\n";
      const Scenario s = load_scenario(run_text);
      const Solution sol = solve(s);
      RunOutput run(fs::path(args.out) / name);
      record_scenario(run, "sweep", args.scenario, run_text);
      for (std::size_t a = 0; a < axes.size(); ++a) run.set("sweep." + axes[a].key, choice[a]->dump());
      run.write("scenario.json", run_text);
      write_solution(run, s, sol, args.plot);
      const SimulationOutcome outcome = simulate_into(run, s, sol, sim, args, err);
      run.write_manifest();

      const auto& t = sol.table;
      const auto& g = sol.gains;
      for (int k = 0; k <= s.horizon; ++k) {
        for (int i = 0; i < s.agents; ++i) {
          key_cells(combined);
          combined.add(k).add(i + 1).add(t.alpha_bar[i][k]);
          combined.add(t.alpha.empty() ? std::nullopt : std::optional(t.alpha[i][k]));
          combined.add(t.gamma_bar.empty() ? std::nullopt : std::optional(t.gamma_bar[i][k]));
          const bool step = k < s.horizon;
          combined.add(step ? std::optional(g.mean_gain[i][k]) : std::nullopt);
          combined.add(step && !g.dev_gain.empty() ? std::optional(g.dev_gain[i][k]) : std::nullopt);
          combined.add(outcome.mean.x_bar[k]);
          combined.add(step ? std::optional(outcome.mean.u_bar[i][k]) : std::nullopt);
        }
      }
      for (int i = 0; i < s.agents; ++i) {
        alpha_bar_lines.push_back({std::string(name) + " agent " + std::to_string(i + 1),
                                   steps(s.horizon + 1), t.alpha_bar[i]});
      }
    } catch (const UsageError&) {
      throw;
    } catch (const ParseError& e) {
      code = kParse, message = e.what();
    } catch (const SchemaError& e) {
      code = kValidation, message = e.what();
    } catch (const ValidationError& e) {
      code = kValidation, message = e.what();
    } catch (const SingularityError& e) {
      code = kNumeric, message = e.what();
    } catch (const OverflowError& e) {
      code = kNumeric, message = e.what();
    } catch (const DomainError& e) {
      code = kNumeric, message = e.what();
    } catch (const ResourceError& e) {
      code = kResource, message = e.what();
    }
    key_cells(status);
    std::string flat = message;
    for (std::size_t pos = 0; (pos = flat.find('\n', pos)) != std::string::npos;) {
      const std::size_t end = flat.find_first_not_of(' ', pos + 1);
      flat.replace(pos, (end == std::string::npos ? flat.size() : end) - pos, " ");
    }
    status.add(code == kOk ? "ok" : "failed").add(code).add(flat);
    if (code != kOk) {
      err << name << " failed: " << message << "\n";
      if (first_failure == kOk) first_failure = code;
    }
  }

  top.write("sweep.csv", combined.str());
  top.write("sweep_status.csv", status.str());
  if (args.plot && !alpha_bar_lines.empty()) {
    top.write("sweep_alpha_bar.svg",
              line_plot_svg("alpha_bar across the sweep", "k", "alpha_bar", alpha_bar_lines));
  }
  top.set("runs", std::to_string(total));
  top.write_manifest();
  out << "sweep: " << total << " runs, " << (first_failure == kOk ? "all succeeded" : "some failed")
      << "; outputs in " << args.out << "\n";
  return first_failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solve, simulate and verify mean-field-type games with higher-order costs", "mftg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MFTG_VERSION);

  CommonArgs common;
  SimArgs sim;
  std::string grid;
  int probes = 16;
  std::string injection;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", common.scenario, "Scenario file (JSON)")->required();
    cmd->add_option("--out", common.out, "Output directory")->required();
    cmd->add_option("--format", common.format, "Table format (csv)");
    cmd->add_flag("--plot", common.plot, "Also write SVG plots");
    cmd->add_option("--threads", common.threads, "Monte Carlo worker threads (0: all cores)");
  };
  std::vector<CLI::Option*> paths_opts;
  std::vector<CLI::Option*> seed_opts;
  auto add_sim = [&](CLI::App* cmd) {
    paths_opts.push_back(cmd->add_option("--paths", sim.paths, "Monte Carlo paths"));
    seed_opts.push_back(cmd->add_option("--seed", sim.seed, "Master seed"));
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "Backward recursion: coefficients and gains");
  add_common(solve_cmd);

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Mean path, Monte Carlo ensemble, costs");
  add_common(simulate_cmd);
  add_sim(simulate_cmd);
  simulate_cmd->add_flag("--trajectories", sim.trajectories, "Write per-path trajectories.csv");

  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the equilibrium checks");
  add_common(verify_cmd);
  add_sim(verify_cmd);
  verify_cmd->add_option("--grid", grid, "Deviation grid POINTS[:SPAN] (default 101:0.2)");
  verify_cmd->add_option("--probes", probes, "Bellman probes per step");
  verify_cmd->add_option("--inject-gain", injection,
                         "Scale a mean gain before verifying, AGENT:STEP:FACTOR (STEP may be *)");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Solve and simulate over parameter values");
  add_common(sweep_cmd);
  add_sim(sweep_cmd);
  sweep_cmd->add_option("--set", sets, "KEY=V1,V2,... with KEY a dotted path into the scenario");

  std::vector<std::string> argv_storage{"mftg"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  for (CLI::Option* o : paths_opts) sim.paths_set = sim.paths_set || o->count() > 0;
  for (CLI::Option* o : seed_opts) sim.seed_set = sim.seed_set || o->count() > 0;

  try {
    if (solve_cmd->parsed()) return cmd_solve(common, out);
    if (simulate_cmd->parsed()) return cmd_simulate(common, sim, out, err);
    if (verify_cmd->parsed()) return cmd_verify(common, sim, grid, probes, injection, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(common, sim, sets, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    err << "validation error:\n";
    for (const Diagnostic& d : e.diagnostics()) {
      err << "  " << d.message << " [" << d.condition << "]\n";
    }
    return kValidation;
  } catch (const SingularityError& e) {
    err << "singular coupling matrix: " << e.what() << "\n";
    return kNumeric;
  } catch (const OverflowError& e) {
    err << "overflow: " << e.what() << "\n";
    return kNumeric;
  } catch (const DomainError& e) {
    err << "numeric domain error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return kResource;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace mftg::cli
