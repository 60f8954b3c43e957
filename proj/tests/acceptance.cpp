#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/cli.hpp"
#include "mftg/recursion.hpp"
#include "mftg/simulate.hpp"
#include "mftg/verify.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mftg;
using mftg::test::Gen;
using mftg::test::relative_gap;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.3g", v);
  return buffer;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("mftg_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  return cli::run(args, out, err);
}

Scenario example(const std::string& name) { return load_scenario_file(test::scenario_path(name)); }

Outcome one_step_game() {
  Outcome o;
  const auto start = Clock::now();
  const Scenario s =
      test::constant_scenario(Family::Deterministic, 2, 1, 2, 1.0, {1.0, 1.0}, 1.0, 1.0);
  const Solution sol = solve(s);
  const OneStepResult oracle = brute_force_one_step(s);
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    o.require(std::abs(sol.gains.mean_gain[i][0] - 1.0 / 3.0) <= 1e-12, "gain differs from 1/3");
    o.require(std::abs(sol.table.alpha_bar[i][0] - 83.0 / 81.0) <= 1e-12,
              "alpha_bar differs from 83/81");
    worst = std::max(worst, std::abs(oracle.mean_gain[i] - sol.gains.mean_gain[i][0]));
  }
  o.require(oracle.converged && worst <= 1e-6, "oracle gap " + fmt(worst));
  const double t = seconds_since(start);
  o.require(t < 1.0, "took " + fmt(t) + " s");
  if (o.pass) o.detail = "oracle gap " + fmt(worst) + ", " + fmt(t) + " s";
  return o;
}

Outcome deterministic_cost_identity() {
  Outcome o;
  const auto start = Clock::now();
  Gen g(1001);
  double worst = 0.0;
  int done = 0;
  while (done < 50) {
    const Scenario s = test::random_scenario(g, Family::Deterministic);
    Solution sol;
    try {
      sol = solve(s);
    } catch (const OverflowError&) {
      continue;
    }
    ++done;
    const auto cost = evaluate_cost(s, propagate_mean(s, sol.gains), sol.table);
    for (int i = 0; i < s.agents; ++i) {
      const double predicted = sol.table.alpha_bar[i][0] * ipow(s.x0.mean, 2 * s.p);
      worst = std::max(worst, std::abs(cost[i].total - predicted) / std::abs(predicted));
    }
  }
  o.require(worst <= 1e-9, "relative gap " + fmt(worst));
  const double t = seconds_since(start);
  o.require(t < 10.0, "took " + fmt(t) + " s");
  if (o.pass) o.detail = "50 scenarios, worst relative gap " + fmt(worst);
  return o;
}

Outcome riccati_reduction() {
  Outcome o;
  Gen g(1002);
  test::RandomLimits lim;
  lim.max_agents = 1;
  lim.max_p = 1;
  lim.max_horizon = 50;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Scenario s = test::random_scenario(g, Family::Deterministic, lim);
    const Solution sol = solve(s);
    const Series p = scalar_riccati(s.a_bar, s.b_bar[0], s.q_bar[0], s.q_bar_terminal[0], s.r_bar[0]);
    for (int k = 0; k <= s.horizon; ++k) {
      worst = std::max(worst, relative_gap(sol.table.alpha_bar[0][k], p[k]));
    }
  }
  o.require(worst <= 1e-12, "gap " + fmt(worst));
  if (o.pass) o.detail = "100 scenarios, worst gap " + fmt(worst);
  return o;
}

Outcome monte_carlo_cost() {
  Outcome o;
  const auto start = Clock::now();
  const Scenario s = example("example_b");
  const Solution sol = solve(s);
  EnsembleOptions options;
  options.paths = 10000;
  options.keep_trajectories = false;
  int covered = 0;
  int runs = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    options.seed = seed;
    const auto cost = evaluate_cost(s, run_ensemble(s, sol.gains, options), sol.table);
    for (const CostBreakdown& c : cost) {
      const double z = std::abs(c.total - c.predicted) / c.standard_error;
      worst = std::max(worst, z);
      ++runs;
      if (z <= 3.0) ++covered;
      if (seed == 1) o.require(z <= 3.0, "seed 1 outside 3 standard errors");
    }
  }
  o.require(covered >= 0.95 * runs, "coverage " + std::to_string(covered) + "/" + std::to_string(runs));
  const double t = seconds_since(start);
  o.require(t < 60.0, "took " + fmt(t) + " s");
  if (o.pass) {
    o.detail = "coverage " + std::to_string(covered) + "/" + std::to_string(runs) +
               ", largest |z| " + fmt(worst);
  }
  return o;
}

Outcome p_invariance() {
  Outcome o;
  const fs::path out = scratch("sweep");
  o.require(cli({"sweep", test::scenario_path("example_b").string(), "--out", out.string(), "--set",
                 "p=2,3,4", "--paths", "100"}) == 0,
            "sweep failed");
  if (!o.pass) return o;
  std::istringstream in(slurp(out / "sweep.csv"));
  std::string line;
  std::getline(in, line);
  // columns: run, p, k, agent, alpha_bar, alpha, gamma_bar, ...
  std::map<std::string, std::vector<std::string>> alpha;
  std::map<std::string, std::vector<std::string>> gamma;
  std::map<std::string, std::vector<std::string>> alpha_bar;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    alpha_bar[cells[1]].push_back(cells[4]);
    alpha[cells[1]].push_back(cells[5]);
    gamma[cells[1]].push_back(cells[6]);
  }
  o.require(alpha.size() == 3, "expected three blocks");
  o.require(alpha["2"] == alpha["3"] && alpha["2"] == alpha["4"], "alpha differs across p");
  o.require(gamma["2"] == gamma["3"] && gamma["2"] == gamma["4"], "gamma_bar differs across p");
  o.require(alpha_bar["2"] != alpha_bar["3"], "alpha_bar unexpectedly identical");
  if (o.pass) o.detail = std::to_string(alpha["2"].size()) + " rows per block, bitwise equal";
  return o;
}

Outcome unilateral_deviation() {
  Outcome o;
  DeviationOptions options;  // 101 points, +/-20%
  options.seed = 2024;
  std::string margins;
  for (const char* name : {"example_a", "example_b", "example_c"}) {
    const Scenario s = example(name);
    const Solution sol = solve(s);
    for (int agent = 0; agent < s.agents; ++agent) {
      const DeviationResult r = unilateral_deviation_test(s, sol, agent, options);
      o.require(r.pass, std::string(name) + " agent " + std::to_string(agent + 1) +
                            " margin " + fmt(r.margin));
    }
    Solution corrupted = sol;
    for (double& gain : corrupted.gains.mean_gain[0]) gain *= 1.2;
    const DeviationResult bad = unilateral_deviation_test(s, corrupted, 0, options);
    o.require(!bad.pass, std::string(name) + " negative control passed");
    margins += std::string(margins.empty() ? "" : ", ") + name + " control margin " + fmt(bad.margin);
  }
  if (o.pass) o.detail = margins;
  return o;
}

Outcome zero_noise_reduction() {
  Outcome o;
  Gen g(1007);
  std::vector<Scenario> cases{example("example_b"), example("example_c")};
  for (int trial = 0; trial < 50; ++trial) cases.push_back(test::random_scenario(g, Family::Additive));
  for (Scenario add : cases) {
    add.family = Family::Additive;
    add.noise->sigma.assign(add.horizon, 0.0);
    Scenario mul = add;
    mul.family = Family::Multiplicative;
    Scenario det = add;
    det.family = Family::Deterministic;
    det.noise.reset();
    det.q_dev.clear();
    det.q_dev_terminal.clear();
    det.r_dev.clear();
    const Solution sa = solve(add);
    const Solution sm = solve(mul);
    const Solution sd = solve(det);
    o.require(sa.table.alpha_bar == sd.table.alpha_bar && sa.gains.mean_gain == sd.gains.mean_gain,
              "additive mean block differs");
    o.require(sm.table.alpha_bar == sd.table.alpha_bar && sm.gains.mean_gain == sd.gains.mean_gain,
              "multiplicative mean block differs");
    o.require(sa.table.alpha == sm.table.alpha, "alpha tables differ");
  }
  if (o.pass) o.detail = std::to_string(cases.size()) + " scenarios, exact equality";
  return o;
}

Outcome convexity() {
  Outcome o;
  Gen g(1008);
  double lowest = INFINITY;
  for (int trial = 0; trial < 1000; ++trial) {
    const int p = g.integer(1, 5);
    const double a = g.nonzero(0.05, 5.0);
    const double b = g.nonzero(0.05, 5.0);
    const double root = -b / a;
    std::vector<double> grid;
    for (const double centre : {0.0, root}) {
      for (const double h : {0.0, 1e-8, 1e-4, 1e-2}) {
        grid.push_back(centre - h);
        grid.push_back(centre + h);
      }
    }
    const double span = 2.0 * std::max(1.0, std::abs(root));
    for (int j = -25; j <= 25; ++j) grid.push_back(span * j / 25.0);
    const double m = convexity_scan(p, a, b, grid);
    lowest = std::min(lowest, m);
    o.require(m > 0.0, "non-positive second derivative");
  }
  if (o.pass) o.detail = "1000 draws, smallest f'' " + fmt(lowest);
  return o;
}

Outcome bellman_arbiter() {
  Outcome o;
  const Scenario s = example("general_moment");
  o.require(s.o == 2 && s.noise->kind == NoiseKind::Gaussian, "arbiter scenario is not o = 2 Gaussian");
  const auto probes = default_probes(32);
  SolveOptions printed;
  printed.moment_form = MomentForm::AsPrinted;
  double shipped = 0.0;
  double other = 0.0;
  const Solution a = solve(s);
  const Solution b = solve(s, printed);
  for (int k = 0; k < s.horizon; ++k) {
    shipped = std::max(shipped, bellman_identity_check(s, a.table, a.gains, k, probes));
    other = std::max(other, bellman_identity_check(s, b.table, b.gains, k, probes));
  }
  o.require(SolveOptions{}.moment_form == MomentForm::ProofConsistent, "default form changed");
  o.require(shipped <= 1e-10, "shipped form residual " + fmt(shipped));
  o.require(other > 1e-10, "both forms satisfy the identity");
  if (o.pass) o.detail = "shipped form " + fmt(shipped) + ", alternative " + fmt(other);
  return o;
}

Outcome determinism() {
  Outcome o;
  std::string reference;
  for (const char* threads : {"1", "2", "8"}) {
    const fs::path out = scratch(std::string("simulate_") + threads);
    o.require(cli({"simulate", test::scenario_path("example_b").string(), "--out", out.string(),
                   "--paths", "10000", "--seed", "42", "--threads", threads}) == 0,
              "simulate failed");
    if (!o.pass) return o;
    const std::string stats = slurp(out / "ensemble_stats.csv") + slurp(out / "control_stats.csv") +
                              slurp(out / "costs.csv");
    if (reference.empty()) reference = stats;
    o.require(stats == reference, std::string("output differs with ") + threads + " threads");
  }
  if (o.pass) o.detail = "byte-identical under 1, 2 and 8 threads";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"one-step quartic game", one_step_game},
      {"deterministic cost-to-go identity", deterministic_cost_identity},
      {"p = 1 Riccati reduction", riccati_reduction},
      {"Monte Carlo cost consistency", monte_carlo_cost},
      {"alpha and gamma_bar invariant in p", p_invariance},
      {"unilateral deviation and negative control", unilateral_deviation},
      {"zero-noise reductions", zero_noise_reduction},
      {"strict convexity", convexity},
      {"Bellman identity arbiter", bellman_arbiter},
      {"thread-count determinism", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  fs::remove_all(fs::temp_directory_path() / ("mftg_acceptance_" + std::to_string(::getpid())));
  std::printf("%d of %zu criteria passed\n", index - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
