#include "mftg/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mftg {

namespace {

struct CoupledStep {
  Series c;
  SmallMatrix e;
  Series g;
  double closed_loop = 0.0;
};

// Solves E g = c with e_ii = 1, e_ij = c_i b_j and returns the closed-loop
// factor a (1 − Σ_j g_j b_j).
CoupledStep couple(Series c, const Series& b, double a) {
  const int n = static_cast<int>(c.size());
  CoupledStep step;
  step.e = SmallMatrix(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) step.e(i, j) = i == j ? 1.0 : c[i] * b[j];
  }
  step.g = solve_linear(step.e, c);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += step.g[j] * b[j];
  step.closed_loop = a * (1.0 - sum);
  step.c = std::move(c);
  return step;
}

// c_i = s / (1 + s b_i) with s = (α' b_i w / r)^{1/(2n−1)}.
double root_gain(double alpha_next, double b, double weight, double r, int half_order) {
  const double s = signed_root(alpha_next * b * weight / r, 2 * half_order - 1);
  return s / (1.0 + s * b);
}

void guard(double value, double limit, const char* name, int agent, int k) {
  if (!std::isfinite(value) || std::abs(value) > limit) {
    throw OverflowError(std::string(name) + " for agent " + std::to_string(agent + 1) +
                        " at step " + std::to_string(k) +
                        " left the representable range (closed loop too expansive for this "
                        "horizon and order)");
  }
}

Series column(const AgentSeries& s, int k) {
  Series out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i][k];
  return out;
}

void require_family(const Scenario& s, Family family) {
  if (s.family != family) {
    throw PreconditionError("solver for the " + std::string(to_string(family)) +
                            " family called on a " + std::string(to_string(s.family)) +
                            " scenario");
  }
}

AgentSeries table_rows(int agents, int length) {
  return AgentSeries(static_cast<std::size_t>(agents), Series(static_cast<std::size_t>(length)));
}

// The mean channel is the same for every family.
void mean_sweep(const Scenario& s, const SolveOptions& opt, Solution& out) {
  const int n = s.horizon;
  const int agents = s.agents;
  const int p = s.p;
  auto& ab = out.table.alpha_bar;
  auto& g = out.gains;
  ab = table_rows(agents, n + 1);
  g.mean_gain = table_rows(agents, n);
  g.c_bar = table_rows(agents, n);
  g.closed_loop_mean.assign(n, 0.0);
  g.e_bar.assign(n, SmallMatrix());

  for (int i = 0; i < agents; ++i) ab[i][n] = s.q_bar_terminal[i];
  for (int k = n - 1; k >= 0; --k) {
    const Series b = column(s.b_bar, k);
    Series c(agents);
    for (int i = 0; i < agents; ++i) c[i] = root_gain(ab[i][k + 1], b[i], 1.0, s.r_bar[i][k], p);
    CoupledStep step = couple(std::move(c), b, s.a_bar[k]);
    for (int i = 0; i < agents; ++i) {
      ab[i][k] = s.q_bar[i][k] + s.r_bar[i][k] * ipow(step.g[i] * s.a_bar[k], 2 * p) +
                 ab[i][k + 1] * ipow(step.closed_loop, 2 * p);
      guard(ab[i][k], opt.overflow_limit, "alpha_bar", i, k);
      g.mean_gain[i][k] = step.g[i];
      g.c_bar[i][k] = step.c[i];
    }
    g.closed_loop_mean[k] = step.closed_loop;
    g.e_bar[k] = std::move(step.e);
  }
}

// Quadratic deviation channel shared by the additive and multiplicative families.
void variance_sweep(const Scenario& s, const SolveOptions& opt, bool additive, Solution& out) {
  const int n = s.horizon;
  const int agents = s.agents;
  auto& al = out.table.alpha;
  auto& g = out.gains;
  al = table_rows(agents, n + 1);
  if (additive) out.table.gamma_bar = table_rows(agents, n + 1);
  g.dev_gain = table_rows(agents, n);
  g.c_dev = table_rows(agents, n);
  g.closed_loop_dev.assign(n, 0.0);
  g.e_dev.assign(n, SmallMatrix());

  for (int i = 0; i < agents; ++i) {
    al[i][n] = s.q_dev_terminal[i];
    if (additive) out.table.gamma_bar[i][n] = 0.0;
  }
  for (int k = n - 1; k >= 0; --k) {
    const double noise2 = noise_even_moment(*s.noise, k, 2);
    const Series b = column(s.b_bar, k);
    Series c(agents);
    for (int i = 0; i < agents; ++i) {
      c[i] = al[i][k + 1] * b[i] / (s.r_dev[i][k] + al[i][k + 1] * b[i] * b[i]);
    }
    CoupledStep step = couple(std::move(c), b, s.a_bar[k]);
    for (int i = 0; i < agents; ++i) {
      const double gain_term = step.g[i] * s.a_bar[k];
      al[i][k] = s.q_dev[i][k] + s.r_dev[i][k] * gain_term * gain_term +
                 al[i][k + 1] * step.closed_loop * step.closed_loop;
      if (additive) {
        out.table.gamma_bar[i][k] = out.table.gamma_bar[i][k + 1] + al[i][k + 1] * noise2;
        guard(out.table.gamma_bar[i][k], opt.overflow_limit, "gamma_bar", i, k);
      } else {
        al[i][k] += al[i][k + 1] * noise2;
      }
      guard(al[i][k], opt.overflow_limit, "alpha", i, k);
      g.dev_gain[i][k] = step.g[i];
      g.c_dev[i][k] = step.c[i];
    }
    g.closed_loop_dev[k] = step.closed_loop;
    g.e_dev[k] = std::move(step.e);
  }
}

}  // namespace

Solution solve_deterministic(const Scenario& s, const SolveOptions& options) {
  require_family(s, Family::Deterministic);
  Solution out;
  mean_sweep(s, options, out);
  return out;
}

Solution solve_additive(const Scenario& s, const SolveOptions& options) {
  require_family(s, Family::Additive);
  Solution out;
  mean_sweep(s, options, out);
  variance_sweep(s, options, true, out);
  return out;
}

Solution solve_multiplicative(const Scenario& s, const SolveOptions& options) {
  require_family(s, Family::Multiplicative);
  Solution out;
  mean_sweep(s, options, out);
  variance_sweep(s, options, false, out);
  return out;
}

Solution solve_general_moment(const Scenario& s, const SolveOptions& options) {
  require_family(s, Family::GeneralMoment);
  Solution out;
  mean_sweep(s, options, out);

  const int n = s.horizon;
  const int agents = s.agents;
  const int order = 2 * s.o;
  auto& al = out.table.alpha;
  auto& g = out.gains;
  al = table_rows(agents, n + 1);
  g.dev_gain = table_rows(agents, n);
  g.c_dev = table_rows(agents, n);
  g.closed_loop_dev.assign(n, 0.0);
  g.e_dev.assign(n, SmallMatrix());

  for (int i = 0; i < agents; ++i) al[i][n] = s.q_dev_terminal[i];
  for (int k = n - 1; k >= 0; --k) {
    const double m = noise_even_moment(*s.noise, k, order);
    const Series b = column(s.b_dev, k);
    Series c(agents);
    for (int i = 0; i < agents; ++i) c[i] = root_gain(al[i][k + 1], b[i], m, s.r_dev[i][k], s.o);
    CoupledStep step = couple(std::move(c), b, s.a_dev[k]);
    const double transfer = options.moment_form == MomentForm::ProofConsistent ? m : 1.0;
    for (int i = 0; i < agents; ++i) {
      al[i][k] = s.q_dev[i][k] + s.r_dev[i][k] * ipow(step.g[i] * s.a_dev[k], order) +
                 al[i][k + 1] * ipow(step.closed_loop, order) * transfer;
      guard(al[i][k], options.overflow_limit, "alpha", i, k);
      g.dev_gain[i][k] = step.g[i];
      g.c_dev[i][k] = step.c[i];
    }
    g.closed_loop_dev[k] = step.closed_loop;
    g.e_dev[k] = std::move(step.e);
  }
  return out;
}

Solution solve(const Scenario& s, const SolveOptions& options) {
  switch (s.family) {
    case Family::Deterministic: return solve_deterministic(s, options);
    case Family::Additive: return solve_additive(s, options);
    case Family::Multiplicative: return solve_multiplicative(s, options);
    case Family::GeneralMoment: return solve_general_moment(s, options);
  }
  throw PreconditionError("unknown family");
}

namespace {

double normalized(double lhs, double rhs) {
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale == 0.0 ? 0.0 : std::abs(lhs + rhs) / scale;
}

}  // namespace

double stationarity_residual(const Scenario& s, const CoefficientTable& table,
                             const GainSchedule& gains, int i, int k) {
  const int agents = s.agents;

  // Mean channel at x̄ = 1: d/dū [r̄ ū^{2p} + ᾱ' (ā + Σ b̄ ū)^{2p}] = 0.
  const int mp = 2 * s.p - 1;
  const double a = s.a_bar[k];
  double y = a;
  for (int j = 0; j < agents; ++j) y -= s.b_bar[j][k] * gains.mean_gain[j][k] * a;
  const double u = -gains.mean_gain[i][k] * a;
  double residual = normalized(s.r_bar[i][k] * ipow(u, mp),
                               table.alpha_bar[i][k + 1] * s.b_bar[i][k] * ipow(y, mp));
  if (!s.stochastic()) return residual;

  // Deviation channel at x − x̄ = 1.
  const double ad = s.deviation_a(k);
  double yd = ad;
  for (int j = 0; j < agents; ++j) yd -= s.deviation_b(j, k) * gains.dev_gain[j][k] * ad;
  const double d = -gains.dev_gain[i][k] * ad;
  const double bi = s.deviation_b(i, k);
  const double alpha_next = table.alpha[i][k + 1];
  if (s.family == Family::GeneralMoment) {
    const int md = 2 * s.o - 1;
    const double m = noise_even_moment(*s.noise, k, 2 * s.o);
    residual = std::max(residual, normalized(s.r_dev[i][k] * ipow(d, md),
                                             alpha_next * m * bi * ipow(yd, md)));
  } else {
    residual = std::max(residual, normalized(s.r_dev[i][k] * d, alpha_next * bi * yd));
  }
  return residual;
}

}  // namespace mftg
