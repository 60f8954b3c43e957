#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mftg/scenario.hpp"

namespace mftg::test {

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(MFTG_SCENARIO_DIR) / (name + ".json");
}

inline double relative_gap(double x, double y) {
  return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
}

/// Small random source for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  /// Uniform on [-hi, -lo] ∪ [lo, hi].
  double nonzero(double lo, double hi) {
    const double x = uniform(lo, hi);
    return coin() ? x : -x;
  }

  Series series(int n, double lo, double hi) {
    Series out(n);
    for (double& x : out) x = uniform(lo, hi);
    return out;
  }
  Series nonzero_series(int n, double lo, double hi) {
    Series out(n);
    for (double& x : out) x = nonzero(lo, hi);
    return out;
  }
  AgentSeries agent_series(int agents, int n, double lo, double hi) {
    AgentSeries out(agents);
    for (Series& s : out) s = series(n, lo, hi);
    return out;
  }
  AgentSeries nonzero_agent_series(int agents, int n, double lo, double hi) {
    AgentSeries out(agents);
    for (Series& s : out) s = nonzero_series(n, lo, hi);
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

/// Scenario with constant coefficients; every agent shares the same weights.
inline Scenario constant_scenario(Family family, int agents, int horizon, int p, double a,
                                  const std::vector<double>& b, double q, double r,
                                  double x0 = 1.0) {
  Scenario s;
  s.family = family;
  s.agents = agents;
  s.horizon = horizon;
  s.p = p;
  s.a_bar.assign(horizon, a);
  for (int i = 0; i < agents; ++i) s.b_bar.emplace_back(horizon, b[i]);
  s.q_bar.assign(agents, Series(horizon, q));
  s.q_bar_terminal.assign(agents, q);
  s.r_bar.assign(agents, Series(horizon, r));
  if (family != Family::Deterministic) {
    s.q_dev = s.q_bar;
    s.q_dev_terminal = s.q_bar_terminal;
    s.r_dev = s.r_bar;
    NoiseSpec noise;
    noise.sigma.assign(horizon, 1.0);
    s.noise = noise;
  }
  if (family == Family::GeneralMoment) {
    s.a_dev = s.a_bar;
    s.b_dev = s.b_bar;
  }
  s.x0.mean = x0;
  s.x0.value = x0;
  return s;
}

struct RandomLimits {
  int max_agents = 4;
  int max_horizon = 12;
  int max_p = 4;
  int max_o = 3;
  double weight_lo = 0.5;
  double weight_hi = 5.0;
  double coef_lo = 0.2;
  double coef_hi = 3.0;
  double a_hi = 1.5;
};

/// Random validate-clean scenario of the given family.
inline Scenario random_scenario(Gen& g, Family family, const RandomLimits& lim = {}) {
  Scenario s;
  s.family = family;
  s.agents = g.integer(1, lim.max_agents);
  s.horizon = g.integer(1, lim.max_horizon);
  s.p = g.integer(1, lim.max_p);
  const int n = s.horizon;
  const int I = s.agents;
  s.a_bar = g.nonzero_series(n, 0.2, lim.a_hi);
  s.b_bar = g.nonzero_agent_series(I, n, lim.coef_lo, lim.coef_hi);
  s.q_bar = g.agent_series(I, n, lim.weight_lo, lim.weight_hi);
  s.q_bar_terminal = g.series(I, lim.weight_lo, lim.weight_hi);
  s.r_bar = g.agent_series(I, n, lim.weight_lo, lim.weight_hi);
  s.x0.mean = g.uniform(-3.0, 3.0);
  s.x0.value = s.x0.mean;
  if (family == Family::Deterministic) return s;

  s.q_dev = g.agent_series(I, n, lim.weight_lo, lim.weight_hi);
  s.q_dev_terminal = g.series(I, lim.weight_lo, lim.weight_hi);
  s.r_dev = g.agent_series(I, n, lim.weight_lo, lim.weight_hi);
  NoiseSpec noise;
  noise.kind = static_cast<NoiseKind>(g.integer(0, 2));
  noise.sigma = g.series(n, 0.1, 1.5);
  s.noise = noise;
  if (family == Family::GeneralMoment) {
    s.o = g.integer(1, lim.max_o);
    s.a_dev = g.nonzero_series(n, 0.2, lim.a_hi);
    s.b_dev = g.nonzero_agent_series(I, n, lim.coef_lo, lim.coef_hi);
  }
  s.x0.kind = InitialKind::Gaussian;
  s.x0.variance = g.uniform(0.0, 2.0);
  return s;
}

/// Random one-step instance in the oracle-agreement ranges.
inline Scenario random_one_step(Gen& g, Family family) {
  RandomLimits lim;
  lim.max_agents = 3;
  lim.max_horizon = 1;
  lim.max_p = 3;
  lim.max_o = 3;
  lim.coef_lo = 0.1;
  lim.a_hi = 3.0;
  Scenario s = random_scenario(g, family, lim);
  s.horizon = 1;
  return s;
}

}  // namespace mftg::test
