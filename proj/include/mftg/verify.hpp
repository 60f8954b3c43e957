#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mftg/recursion.hpp"
#include "mftg/scenario.hpp"
#include "mftg/simulate.hpp"

namespace mftg {

// ---------------------------------------------------------------------------
// Unilateral deviation test

/// Multiplicative gain perturbations 1 + span·t with t evenly spaced in
/// [−1, 1]. With an odd point count the factor 1 is on the grid exactly.
struct DeviationGrid {
  int points = 101;
  double span = 0.2;
  bool per_step = true;  // also scan each step's gain on its own

  std::vector<double> factors() const;
};

enum class Channel { Mean, Deviation };

std::string_view to_string(Channel channel);

/// One scan: agent i's gain on one channel scaled over the grid, either at
/// every step (step == -1) or at a single step.
struct DeviationScan {
  Channel channel = Channel::Mean;
  int step = -1;
  double equilibrium_cost = 0.0;
  double best_cost = 0.0;
  double best_factor = 1.0;
  double margin = 0.0;          // equilibrium_cost − best_cost
  double standard_error = 0.0;  // of the paired difference at the best factor
  double tolerance = 0.0;
  bool pass = true;
};

struct DeviationResult {
  int agent = 0;
  double margin = 0.0;  // largest margin over all scans
  bool pass = true;
  std::vector<DeviationScan> scans;
};

struct DeviationOptions {
  DeviationGrid grid;
  double relative_tolerance = 1e-9;
  double standard_errors = 3.0;
  std::uint64_t paths = 4000;  // Monte Carlo paths for the deviation channel
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Holds every other agent at equilibrium and rescales agent i's gains.
/// Mean-channel costs are exact; deviation-channel costs use common-seed
/// Monte Carlo so that all grid points share the same noise draws.
DeviationResult unilateral_deviation_test(const Scenario& scenario, const Solution& solution,
                                          int agent, const DeviationOptions& options = {});

/// Agent i's mean-channel cost when agents follow `gains` from x̄0.
double mean_channel_cost(const Scenario& scenario, const GainSchedule& gains, int agent);

/// Smallest relative cost change found by jittering agent i's realized mean
/// control sequence open loop while the other agents keep their feedback laws.
/// Non-negative (up to rounding) at an equilibrium.
double open_loop_jitter_test(const Scenario& scenario, const Solution& solution, int agent,
                             int trials = 64, double scale = 1e-3, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Brute-force one-step best response

struct BestResponseOptions {
  int max_rounds = 100;
  double damping = 0.5;
  double tolerance = 1e-10;
  int grid_points = 201;
};

/// Gains and per-agent values of a one-step game found numerically, with no
/// use of the closed-form coupling matrices. Values are evaluated at unit
/// mean (mean channel) and unit deviation (deviation channel); for the
/// additive family the noise constant q_N E[ε²] is reported in gamma.
struct OneStepResult {
  Series mean_gain;
  Series dev_gain;
  Series mean_value;
  Series dev_value;
  Series gamma;
  int mean_rounds = 0;
  int dev_rounds = 0;
  bool converged = true;
  std::vector<std::string> notes;
};

OneStepResult brute_force_one_step(const Scenario& scenario,
                                   const BestResponseOptions& options = {});

/// One term w·(c + s·v)^n of a one-dimensional objective.
struct PowerTerm {
  double weight;
  double intercept;
  double slope;
  int exponent;
};

/// Minimizer of Σ w (c + s v)^n (all w > 0, even n) by a dense grid over the
/// bracket spanned by the terms' roots, refined by golden-section search.
double minimize_power_sum(std::span<const PowerTerm> terms, int grid_points = 201);

// ---------------------------------------------------------------------------
// Algebraic reductions and identities

struct LqReductionResult {
  bool pass = false;
  double gain_discrepancy = 0.0;     // c̄ against α'b̄/(r̄ + α'b̄²)
  double riccati_discrepancy = 0.0;  // ᾱ against the scalar Riccati recursion (I = 1)
  double max_discrepancy = 0.0;
};

/// p = 1 only; throws PreconditionError otherwise.
LqReductionResult lq_reduction_check(const Scenario& scenario, double tolerance = 1e-12);

/// Scalar discrete Riccati recursion P_k = q + a²P' − (aP'b)²/(r + b²P'), P_N = q_N.
Series scalar_riccati(const Series& a, const Series& b, const Series& q, double q_terminal,
                      const Series& r);

/// A state of the moment dynamics: mean x̄ and deviation moment E[(x − x̄)^n].
struct Probe {
  double mean;
  double moment;
};

/// Deterministic probe set; the first two are (0, 0) and (1, 1).
std::vector<Probe> default_probes(int count);

/// max over agents and probes of |f_k − stage_k − f_{k+1}(pushforward)|,
/// divided by max(|f_k|, |stage_k| + |f_{k+1}|).
double bellman_identity_check(const Scenario& scenario, const CoefficientTable& table,
                              const GainSchedule& gains, int k, std::span<const Probe> probes);

/// Smallest sampled second derivative of each agent's per-step objective,
/// rescaled to the form z^{2p} + (a z + b)^{2p} (mean channel) or with 2o
/// (general-moment deviation channel). Steps where a or b vanish are skipped.
double convexity_min(const Scenario& scenario, const Solution& solution, int grid_points = 41);

// ---------------------------------------------------------------------------
// Full report

struct VerifyOptions {
  DeviationOptions deviation;
  int probes = 16;
  double stationarity_tolerance = 1e-9;
  double bellman_tolerance = 1e-10;
  double jitter_tolerance = 1e-9;
};

struct VerificationReport {
  std::vector<DeviationResult> deviation;  // per agent
  double deviation_margin = 0.0;           // largest margin over agents
  bool deviation_pass = true;
  double open_loop_margin = 0.0;           // smallest relative jitter change
  bool open_loop_pass = true;
  double stationarity = 0.0;
  bool alpha_bar_positive = true;
  bool alpha_positive = true;
  bool gamma_bar_nonnegative = true;
  double convexity_min = 0.0;
  bool convexity_sampled = true;  // false when no step meets the a, b != 0 hypothesis
  Series bellman_residual;  // per step
  double stationarity_tolerance = 1e-9;
  double bellman_tolerance = 1e-10;
  std::vector<std::string> notes;

  bool positivity() const { return alpha_bar_positive && alpha_positive && gamma_bar_nonnegative; }
  double bellman_max() const;
  bool pass() const { return failing_criterion().empty(); }
  /// Name of the first failing criterion, empty when everything passes.
  std::string failing_criterion() const;
};

VerificationReport verify_solution(const Scenario& scenario, const Solution& solution,
                                   const VerifyOptions& options = {});

}  // namespace mftg
