#include "mftg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mftg/numerics.hpp"

namespace mftg {

namespace {

double relative_gap(double x, double y) {
  const double scale = std::max(std::abs(x), std::abs(y));
  return scale == 0.0 ? 0.0 : std::abs(x - y) / scale;
}

std::string describe(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Unilateral deviation test

std::vector<double> DeviationGrid::factors() const {
  if (points < 1) throw DomainError("deviation grid needs at least one point");
  if (points == 1) return {1.0};
  std::vector<double> out(points);
  for (int j = 0; j < points; ++j) {
    const double t = 2.0 * j / (points - 1) - 1.0;
    out[j] = 1.0 + span * t;
  }
  if (points % 2 == 1) out[points / 2] = 1.0;
  return out;
}

std::string_view to_string(Channel channel) {
  return channel == Channel::Mean ? "mean" : "deviation";
}

double mean_channel_cost(const Scenario& s, const GainSchedule& gains, int i) {
  const int order = s.mean_order();
  double x = s.x0.mean;
  double cost = 0.0;
  for (int k = 0; k < s.horizon; ++k) {
    double next = s.a_bar[k] * x;
    for (int j = 0; j < s.agents; ++j) {
      const double u = -gains.mean_gain[j][k] * s.a_bar[k] * x;
      next += s.b_bar[j][k] * u;
      if (j == i) cost += s.r_bar[i][k] * ipow(u, order);
    }
    cost += s.q_bar[i][k] * ipow(x, order);
    x = next;
  }
  return cost + s.q_bar_terminal[i] * ipow(x, order);
}

namespace {

GainSchedule scaled(const GainSchedule& gains, Channel channel, int agent, int step,
                    double factor) {
  GainSchedule out = gains;
  Series& row = channel == Channel::Mean ? out.mean_gain[agent] : out.dev_gain[agent];
  if (step < 0) {
    for (double& g : row) g *= factor;
  } else {
    row[step] *= factor;
  }
  return out;
}

DeviationScan scan_mean(const Scenario& s, const GainSchedule& gains, int agent, int step,
                        const std::vector<double>& factors, double rel_tol) {
  DeviationScan scan;
  scan.channel = Channel::Mean;
  scan.step = step;
  scan.equilibrium_cost = mean_channel_cost(s, gains, agent);
  scan.best_cost = scan.equilibrium_cost;
  for (const double f : factors) {
    const double c = mean_channel_cost(s, scaled(gains, Channel::Mean, agent, step, f), agent);
    if (c < scan.best_cost) {
      scan.best_cost = c;
      scan.best_factor = f;
    }
  }
  scan.margin = scan.equilibrium_cost - scan.best_cost;
  scan.tolerance = rel_tol * std::abs(scan.equilibrium_cost);
  scan.pass = scan.margin <= scan.tolerance;
  return scan;
}

DeviationScan scan_deviation(const Scenario& s, const GainSchedule& gains, int agent, int step,
                             const std::vector<double>& factors, const DeviationOptions& opt,
                             const Series& equilibrium_paths) {
  EnsembleOptions eo;
  eo.paths = opt.paths;
  eo.seed = opt.seed;
  eo.threads = opt.threads;
  eo.keep_trajectories = false;

  const double count = static_cast<double>(equilibrium_paths.size());
  DeviationScan scan;
  scan.channel = Channel::Deviation;
  scan.step = step;
  double eq = 0.0;
  for (const double c : equilibrium_paths) eq += c;
  eq /= count;
  scan.equilibrium_cost = eq;
  scan.best_cost = eq;

  double best_gain = 0.0;
  for (const double f : factors) {
    if (f == 1.0) continue;
    const Ensemble e = run_ensemble(s, scaled(gains, Channel::Deviation, agent, step, f), eo);
    const Series& perturbed = e.path_cost[agent];
    double mean_diff = 0.0;
    for (std::size_t m = 0; m < perturbed.size(); ++m) {
      mean_diff += equilibrium_paths[m] - perturbed[m];
    }
    mean_diff /= count;
    if (mean_diff > best_gain) {
      best_gain = mean_diff;
      scan.best_factor = f;
      scan.best_cost = eq - mean_diff;
      double ss = 0.0;
      for (std::size_t m = 0; m < perturbed.size(); ++m) {
        const double d = equilibrium_paths[m] - perturbed[m] - mean_diff;
        ss += d * d;
      }
      scan.standard_error = count > 1 ? std::sqrt(ss / (count - 1) / count) : 0.0;
    }
  }
  scan.margin = scan.equilibrium_cost - scan.best_cost;
  scan.tolerance = opt.relative_tolerance * std::abs(eq) + opt.standard_errors * scan.standard_error;
  scan.pass = scan.margin <= scan.tolerance;
  return scan;
}

}  // namespace

DeviationResult unilateral_deviation_test(const Scenario& s, const Solution& solution, int agent,
                                          const DeviationOptions& opt) {
  if (agent < 0 || agent >= s.agents) throw DomainError("agent index out of range");
  const std::vector<double> factors = opt.grid.factors();
  const GainSchedule& gains = solution.gains;

  DeviationResult result;
  result.agent = agent;
  std::vector<int> steps{-1};
  if (opt.grid.per_step) {
    for (int k = 0; k < s.horizon; ++k) steps.push_back(k);
  }

  for (const int step : steps) {
    result.scans.push_back(scan_mean(s, gains, agent, step, factors, opt.relative_tolerance));
  }

  const bool sampled = s.stochastic() && s.noise->kind != NoiseKind::ExplicitMoments;
  if (sampled && opt.paths > 0) {
    EnsembleOptions eo;
    eo.paths = opt.paths;
    eo.seed = opt.seed;
    eo.threads = opt.threads;
    eo.keep_trajectories = false;
    const Ensemble eq = run_ensemble(s, gains, eo);
    for (const int step : steps) {
      result.scans.push_back(
          scan_deviation(s, gains, agent, step, factors, opt, eq.path_cost[agent]));
    }
  }

  for (const DeviationScan& scan : result.scans) {
    result.margin = std::max(result.margin, scan.margin);
    result.pass = result.pass && scan.pass;
  }
  return result;
}

double open_loop_jitter_test(const Scenario& s, const Solution& solution, int agent, int trials,
                             double scale, std::uint64_t seed) {
  const GainSchedule& gains = solution.gains;
  const int order = s.mean_order();
  const int n = s.horizon;

  // Agent i's open-loop sequence; the others react through their feedback laws.
  auto cost_of = [&](const Series& own) {
    double x = s.x0.mean;
    double cost = 0.0;
    for (int k = 0; k < n; ++k) {
      double next = s.a_bar[k] * x;
      for (int j = 0; j < s.agents; ++j) {
        const double u = j == agent ? own[k] : -gains.mean_gain[j][k] * s.a_bar[k] * x;
        next += s.b_bar[j][k] * u;
      }
      cost += s.q_bar[agent][k] * ipow(x, order) + s.r_bar[agent][k] * ipow(own[k], order);
      x = next;
    }
    return cost + s.q_bar_terminal[agent] * ipow(x, order);
  };

  Series equilibrium(n);
  double x = s.x0.mean;
  for (int k = 0; k < n; ++k) {
    double next = s.a_bar[k] * x;
    for (int j = 0; j < s.agents; ++j) {
      const double u = -gains.mean_gain[j][k] * s.a_bar[k] * x;
      if (j == agent) equilibrium[k] = u;
      next += s.b_bar[j][k] * u;
    }
    x = next;
  }
  const double base = cost_of(equilibrium);
  double size = 0.0;
  for (const double u : equilibrium) size = std::max(size, std::abs(u));
  if (size == 0.0) size = 1.0;

  PathStream rng(seed, static_cast<std::uint64_t>(agent));
  std::normal_distribution<double> normal(0.0, 1.0);
  double smallest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    Series own = equilibrium;
    for (double& u : own) u += scale * size * normal(rng);
    const double c = cost_of(own);
    const double change = base == 0.0 ? c : (c - base) / std::abs(base);
    smallest = std::min(smallest, change);
  }
  return smallest;
}

// ---------------------------------------------------------------------------
// Brute-force one-step best response

namespace {

double power_sum(std::span<const PowerTerm> terms, double v) {
  double total = 0.0;
  for (const PowerTerm& t : terms) total += t.weight * ipow(t.intercept + t.slope * v, t.exponent);
  return total;
}

// Sign of F(x1) − F(x2), computed as (x1 − x2) Σ w s Σ_j A1^{n−1−j} A2^j
// so that nearby points compare without cancellation.
double power_sum_difference(std::span<const PowerTerm> terms, double x1, double x2) {
  double slope = 0.0;
  for (const PowerTerm& t : terms) {
    const double a1 = t.intercept + t.slope * x1;
    const double a2 = t.intercept + t.slope * x2;
    double s = 0.0;
    for (int j = 0; j < t.exponent; ++j) s += ipow(a1, t.exponent - 1 - j) * ipow(a2, j);
    slope += t.weight * t.slope * s;
  }
  return (x1 - x2) * slope;
}

}  // namespace

double minimize_power_sum(std::span<const PowerTerm> terms, int grid_points) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const PowerTerm& t : terms) {
    if (t.weight <= 0.0 || t.slope == 0.0) continue;
    const double root = -t.intercept / t.slope;
    lo = std::min(lo, root);
    hi = std::max(hi, root);
  }
  if (!(lo <= hi)) return 0.0;
  if (lo == hi) return lo;

  grid_points = std::max(grid_points, 3);
  const double step = (hi - lo) / (grid_points - 1);
  int best = 0;
  double best_value = power_sum(terms, lo);
  for (int j = 1; j < grid_points; ++j) {
    const double v = power_sum(terms, lo + j * step);
    if (v < best_value) {
      best_value = v;
      best = j;
    }
  }
  double a = lo + std::max(best - 1, 0) * step;
  double b = lo + std::min(best + 1, grid_points - 1) * step;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  const double width_floor = 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)});
  for (int iter = 0; iter < 200 && b - a > width_floor; ++iter) {
    if (power_sum_difference(terms, c, d) < 0.0) {
      b = d;
      d = c;
      c = b - inv_phi * (b - a);
    } else {
      a = c;
      c = d;
      d = a + inv_phi * (b - a);
    }
  }
  return 0.5 * (a + b);
}

namespace {

struct BestResponseRun {
  Series v;  // controls in units of (dynamics coefficient × state)
  int rounds = 0;
  bool converged = false;
};

// Agent i minimizes r_i v_i^n + w_i (1 + Σ_j b_j v_j)^n over v_i.
BestResponseRun best_response(const Series& r, const Series& w, const Series& b, int exponent,
                              const BestResponseOptions& opt) {
  const int agents = static_cast<int>(r.size());
  BestResponseRun run;
  run.v.assign(agents, 0.0);
  Series response(agents);
  for (run.rounds = 1; run.rounds <= opt.max_rounds; ++run.rounds) {
    for (int i = 0; i < agents; ++i) {
      double y = 1.0;
      for (int j = 0; j < agents; ++j) {
        if (j != i) y += b[j] * run.v[j];
      }
      const PowerTerm terms[] = {{r[i], 0.0, 1.0, exponent}, {w[i], y, b[i], exponent}};
      response[i] = minimize_power_sum(terms, opt.grid_points);
    }
    double change = 0.0;
    for (int i = 0; i < agents; ++i) {
      const double next = (1.0 - opt.damping) * run.v[i] + opt.damping * response[i];
      change = std::max(change, std::abs(next - run.v[i]));
      run.v[i] = next;
    }
    if (change <= opt.tolerance) {
      run.converged = true;
      return run;
    }
  }
  run.rounds = opt.max_rounds;
  return run;
}

}  // namespace

OneStepResult brute_force_one_step(const Scenario& s, const BestResponseOptions& opt) {
  if (s.horizon != 1) throw PreconditionError("brute_force_one_step needs a one-step scenario");
  const int agents = s.agents;
  OneStepResult out;

  Series r(agents), w(agents), b(agents);
  for (int i = 0; i < agents; ++i) {
    r[i] = s.r_bar[i][0];
    w[i] = s.q_bar_terminal[i];
    b[i] = s.b_bar[i][0];
  }
  const BestResponseRun mean = best_response(r, w, b, s.mean_order(), opt);
  out.mean_rounds = mean.rounds;
  if (!mean.converged) {
    out.converged = false;
    out.notes.push_back("mean-channel best response did not converge in " +
                        std::to_string(opt.max_rounds) + " rounds");
  }
  const double a_bar = s.a_bar[0];
  out.mean_gain.resize(agents);
  out.mean_value.resize(agents);
  double closing = 1.0;
  for (int j = 0; j < agents; ++j) closing += b[j] * mean.v[j];
  for (int i = 0; i < agents; ++i) {
    out.mean_gain[i] = -mean.v[i];
    out.mean_value[i] = s.q_bar[i][0] + r[i] * ipow(mean.v[i] * a_bar, s.mean_order()) +
                        w[i] * ipow(a_bar * closing, s.mean_order());
  }
  if (!s.stochastic()) return out;

  const int n = s.deviation_order();
  const bool general = s.family == Family::GeneralMoment;
  const double m = general ? noise_even_moment(*s.noise, 0, n) : 1.0;
  const double noise2 = general ? 0.0 : noise_even_moment(*s.noise, 0, 2);
  for (int i = 0; i < agents; ++i) {
    r[i] = s.r_dev[i][0];
    w[i] = s.q_dev_terminal[i] * m;
    b[i] = s.deviation_b(i, 0);
  }
  const BestResponseRun dev = best_response(r, w, b, n, opt);
  out.dev_rounds = dev.rounds;
  if (!dev.converged) {
    out.converged = false;
    out.notes.push_back("deviation-channel best response did not converge in " +
                        std::to_string(opt.max_rounds) + " rounds");
  }
  const double a = s.deviation_a(0);
  closing = 1.0;
  for (int j = 0; j < agents; ++j) closing += b[j] * dev.v[j];
  out.dev_gain.resize(agents);
  out.dev_value.resize(agents);
  out.gamma.assign(agents, 0.0);
  for (int i = 0; i < agents; ++i) {
    out.dev_gain[i] = -dev.v[i];
    double value = s.q_dev[i][0] + r[i] * ipow(dev.v[i] * a, n) + w[i] * ipow(a * closing, n);
    if (s.family == Family::Multiplicative) value += s.q_dev_terminal[i] * noise2;
    if (s.family == Family::Additive) out.gamma[i] = s.q_dev_terminal[i] * noise2;
    out.dev_value[i] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Algebraic reductions and identities

Series scalar_riccati(const Series& a, const Series& b, const Series& q, double q_terminal,
                      const Series& r) {
  const std::size_t n = a.size();
  Series p(n + 1);
  p[n] = q_terminal;
  for (std::size_t k = n; k-- > 0;) {
    const double next = p[k + 1];
    const double cross = a[k] * next * b[k];
    p[k] = q[k] + a[k] * a[k] * next - cross * cross / (r[k] + b[k] * b[k] * next);
  }
  return p;
}

LqReductionResult lq_reduction_check(const Scenario& s, double tolerance) {
  if (s.p != 1) throw PreconditionError("the LQ reduction only applies to p = 1");
  const Solution sol = solve(s);
  LqReductionResult out;
  for (int i = 0; i < s.agents; ++i) {
    for (int k = 0; k < s.horizon; ++k) {
      const double next = sol.table.alpha_bar[i][k + 1];
      const double b = s.b_bar[i][k];
      const double lq = next * b / (s.r_bar[i][k] + next * b * b);
      out.gain_discrepancy = std::max(out.gain_discrepancy, relative_gap(sol.gains.c_bar[i][k], lq));
    }
  }
  if (s.agents == 1) {
    const Series p = scalar_riccati(s.a_bar, s.b_bar[0], s.q_bar[0], s.q_bar_terminal[0], s.r_bar[0]);
    for (int k = 0; k <= s.horizon; ++k) {
      out.riccati_discrepancy =
          std::max(out.riccati_discrepancy, relative_gap(sol.table.alpha_bar[0][k], p[k]));
    }
  }
  out.max_discrepancy = std::max(out.gain_discrepancy, out.riccati_discrepancy);
  out.pass = out.max_discrepancy <= tolerance;
  return out;
}

std::vector<Probe> default_probes(int count) {
  std::vector<Probe> out;
  if (count <= 0) return out;
  out.push_back({0.0, 0.0});
  if (count > 1) out.push_back({1.0, 1.0});
  PathStream rng(0x5eed, 0);
  while (static_cast<int>(out.size()) < count) {
    const double u1 = std::generate_canonical<double, 53>(rng);
    const double u2 = std::generate_canonical<double, 53>(rng);
    out.push_back({-4.0 + 8.0 * u1, 5.0 * u2});
  }
  return out;
}

double bellman_identity_check(const Scenario& s, const CoefficientTable& table,
                              const GainSchedule& gains, int k, std::span<const Probe> probes) {
  const int agents = s.agents;
  const int mp = s.mean_order();
  const int n = s.deviation_order();

  double mean_factor = 1.0;
  for (int j = 0; j < agents; ++j) mean_factor -= gains.mean_gain[j][k] * s.b_bar[j][k];
  mean_factor *= s.a_bar[k];

  // One-step map of the deviation moment M_k -> M_{k+1}.
  double dev_factor = 0.0;
  double push_scale = 0.0;
  double push_shift = 0.0;
  if (s.stochastic()) {
    const double a = s.deviation_a(k);
    dev_factor = 1.0;
    for (int j = 0; j < agents; ++j) dev_factor -= gains.dev_gain[j][k] * s.deviation_b(j, k);
    dev_factor *= a;
    switch (s.family) {
      case Family::Additive:
        push_scale = dev_factor * dev_factor;
        push_shift = noise_even_moment(*s.noise, k, 2);
        break;
      case Family::Multiplicative:
        push_scale = dev_factor * dev_factor + noise_even_moment(*s.noise, k, 2);
        break;
      case Family::GeneralMoment:
        push_scale = ipow(dev_factor, n) * noise_even_moment(*s.noise, k, n);
        break;
      case Family::Deterministic:
        break;
    }
  }

  auto value = [&](int i, int step, double mean, double moment) {
    double f = table.alpha_bar[i][step] * ipow(mean, mp);
    if (s.stochastic()) f += table.alpha[i][step] * moment;
    if (!table.gamma_bar.empty()) f += table.gamma_bar[i][step];
    return f;
  };

  double worst = 0.0;
  for (const Probe& probe : probes) {
    const double mean_next = mean_factor * probe.mean;
    const double moment_next = push_scale * probe.moment + push_shift;
    for (int i = 0; i < agents; ++i) {
      double stage = s.q_bar[i][k] * ipow(probe.mean, mp) +
                     s.r_bar[i][k] * ipow(gains.mean_gain[i][k] * s.a_bar[k] * probe.mean, mp);
      if (s.stochastic()) {
        const double d = gains.dev_gain[i][k] * s.deviation_a(k);
        stage += s.q_dev[i][k] * probe.moment + s.r_dev[i][k] * ipow(d, n) * probe.moment;
      }
      const double now = value(i, k, probe.mean, probe.moment);
      const double later = value(i, k + 1, mean_next, moment_next);
      const double scale = std::max(std::abs(now), std::abs(stage) + std::abs(later));
      if (scale > 0.0) worst = std::max(worst, std::abs(now - stage - later) / scale);
    }
  }
  return worst;
}

namespace {

std::vector<double> convexity_grid(double a, double b, int points) {
  const double root = -b / a;
  const double lo = std::min(0.0, root);
  const double hi = std::max(0.0, root);
  const double pad = std::max(1.0, hi - lo);
  std::vector<double> grid;
  points = std::max(points, 2);
  for (int j = 0; j < points; ++j) {
    grid.push_back(lo - pad + (hi - lo + 2.0 * pad) * j / (points - 1));
  }
  for (const double centre : {0.0, root}) {
    for (const double offset : {0.0, 1e-9, -1e-9, 1e-6, -1e-6, 1e-3, -1e-3}) {
      grid.push_back(centre + offset * std::max(1.0, std::abs(centre)));
    }
  }
  return grid;
}

}  // namespace

double convexity_min(const Scenario& s, const Solution& solution, int grid_points) {
  const auto& gains = solution.gains;
  const auto& table = solution.table;
  double lowest = std::numeric_limits<double>::infinity();

  // Agent i's step-k objective r v^n + α' (y + b v)^n equals r times
  // z^n + (λ b z + λ y)^n with λ = (α'/r)^{1/n}, z = v.
  auto sample = [&](int half, double weight, double r, double b, double y) {
    if (!(weight > 0.0)) return;
    const double lambda = std::pow(weight / r, 1.0 / (2 * half));
    const double sa = lambda * b;
    const double sb = lambda * y;
    if (sa == 0.0 || sb == 0.0) return;
    lowest = std::min(lowest, convexity_scan(half, sa, sb, convexity_grid(sa, sb, grid_points)));
  };

  for (int i = 0; i < s.agents; ++i) {
    for (int k = 0; k < s.horizon; ++k) {
      double y = s.a_bar[k];
      for (int j = 0; j < s.agents; ++j) {
        if (j != i) y -= gains.mean_gain[j][k] * s.b_bar[j][k] * s.a_bar[k];
      }
      sample(s.p, table.alpha_bar[i][k + 1], s.r_bar[i][k], s.b_bar[i][k], y);

      if (!s.stochastic()) continue;
      const double a = s.deviation_a(k);
      double yd = a;
      for (int j = 0; j < s.agents; ++j) {
        if (j != i) yd -= gains.dev_gain[j][k] * s.deviation_b(j, k) * a;
      }
      if (s.family == Family::GeneralMoment) {
        if (s.noise->kind == NoiseKind::ExplicitMoments &&
            !s.noise->moments.contains(s.deviation_order())) {
          continue;
        }
        const double m = noise_even_moment(*s.noise, k, s.deviation_order());
        sample(s.o, table.alpha[i][k + 1] * m, s.r_dev[i][k], s.deviation_b(i, k), yd);
      } else {
        sample(1, table.alpha[i][k + 1], s.r_dev[i][k], s.deviation_b(i, k), yd);
      }
    }
  }
  return lowest;
}

// ---------------------------------------------------------------------------
// Full report

double VerificationReport::bellman_max() const {
  double worst = 0.0;
  for (const double r : bellman_residual) worst = std::max(worst, r);
  return worst;
}

std::string VerificationReport::failing_criterion() const {
  if (!deviation_pass) {
    return "unilateral deviation: margin " + describe(deviation_margin) + " exceeds tolerance";
  }
  if (!open_loop_pass) {
    return "open-loop jitter: cost decreased by " + describe(-open_loop_margin) + " (relative)";
  }
  if (!(stationarity <= stationarity_tolerance)) {
    return "stationarity: residual " + describe(stationarity) + " above " +
           describe(stationarity_tolerance);
  }
  if (!alpha_bar_positive) return "positivity: alpha_bar has a non-positive entry";
  if (!alpha_positive) return "positivity: alpha has a non-positive entry";
  if (!gamma_bar_nonnegative) return "positivity: gamma_bar has a negative entry";
  if (convexity_sampled && !(convexity_min > 0.0)) return "convexity: sampled second derivative " + describe(convexity_min);
  if (!(bellman_max() <= bellman_tolerance)) {
    return "bellman identity: residual " + describe(bellman_max()) + " above " +
           describe(bellman_tolerance);
  }
  return {};
}

VerificationReport verify_solution(const Scenario& s, const Solution& solution,
                                   const VerifyOptions& options) {
  VerificationReport report;
  report.stationarity_tolerance = options.stationarity_tolerance;
  report.bellman_tolerance = options.bellman_tolerance;
  const auto& table = solution.table;

  for (int i = 0; i < s.agents; ++i) {
    DeviationResult r = unilateral_deviation_test(s, solution, i, options.deviation);
    report.deviation_margin = std::max(report.deviation_margin, r.margin);
    report.deviation_pass = report.deviation_pass && r.pass;
    report.deviation.push_back(std::move(r));
  }
  if (s.stochastic() && s.noise->kind == NoiseKind::ExplicitMoments) {
    report.notes.push_back(
        "deviation channel not scanned: explicit moment tables cannot be sampled");
  }

  report.open_loop_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < s.agents; ++i) {
    report.open_loop_margin = std::min(report.open_loop_margin, open_loop_jitter_test(s, solution, i));
  }
  report.open_loop_pass = report.open_loop_margin >= -options.jitter_tolerance;

  for (int i = 0; i < s.agents; ++i) {
    for (int k = 0; k < s.horizon; ++k) {
      report.stationarity =
          std::max(report.stationarity, stationarity_residual(s, table, solution.gains, i, k));
    }
  }

  for (const Series& row : table.alpha_bar) {
    for (const double v : row) report.alpha_bar_positive = report.alpha_bar_positive && v > 0.0;
  }
  for (const Series& row : table.alpha) {
    for (const double v : row) report.alpha_positive = report.alpha_positive && v > 0.0;
  }
  for (const Series& row : table.gamma_bar) {
    for (const double v : row) report.gamma_bar_nonnegative = report.gamma_bar_nonnegative && v >= 0.0;
  }

  report.convexity_min = convexity_min(s, solution);
  if (std::isinf(report.convexity_min)) {
    report.convexity_min = 0.0;
    report.convexity_sampled = false;
    report.notes.push_back("convexity: no step satisfies a != 0 and b != 0; nothing sampled");
  }

  const std::vector<Probe> probes = default_probes(options.probes);
  report.bellman_residual.resize(s.horizon);
  for (int k = 0; k < s.horizon; ++k) {
    report.bellman_residual[k] = bellman_identity_check(s, table, solution.gains, k, probes);
  }
  return report;
}

}  // namespace mftg
