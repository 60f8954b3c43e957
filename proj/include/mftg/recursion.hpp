#pragma once

#include <vector>

#include "mftg/numerics.hpp"
#include "mftg/scenario.hpp"

namespace mftg {

/// Backward coefficients of the cost-to-go
///   f_ik = α_ik E[(x − x̄)^n] + ᾱ_ik x̄^{2p} + γ̄_ik,
/// indexed [agent][k] with k = 0..N. `alpha` is empty for the deterministic
/// family and `gamma_bar` is filled only for the additive family.
struct CoefficientTable {
  AgentSeries alpha_bar;
  AgentSeries alpha;
  AgentSeries gamma_bar;

  bool operator==(const CoefficientTable&) const = default;
};

/// Feedback gains, indexed [agent][k] with k = 0..N−1. The equilibrium control is
///   u_ik = −dev_gain_ik · dev_a_k · (x_k − x̄_k) − mean_gain_ik · ā_k · x̄_k
/// where dev_a_k is ā_k, or a_k for the general-moment family.
struct GainSchedule {
  AgentSeries mean_gain;
  AgentSeries dev_gain;
  AgentSeries c_bar;
  AgentSeries c_dev;             // c_ik, or c̃_ik for the general-moment family
  Series closed_loop_mean;       // ā_k (1 − Σ_j ḡ_jk b̄_jk)
  Series closed_loop_dev;        // same form on the deviation channel
  std::vector<SmallMatrix> e_bar;
  std::vector<SmallMatrix> e_dev;

  bool operator==(const GainSchedule&) const = default;
};

struct Solution {
  CoefficientTable table;
  GainSchedule gains;
};

/// Placement of the noise moment in the general-moment α recursion.
/// ProofConsistent multiplies the closed-loop term by m_{k+1,2o}; AsPrinted
/// omits it. Only ProofConsistent satisfies the one-step Bellman identity.
enum class MomentForm { ProofConsistent, AsPrinted };

struct SolveOptions {
  MomentForm moment_form = MomentForm::ProofConsistent;
  double overflow_limit = 1e300;
};

Solution solve_deterministic(const Scenario& scenario, const SolveOptions& options = {});
Solution solve_additive(const Scenario& scenario, const SolveOptions& options = {});
Solution solve_multiplicative(const Scenario& scenario, const SolveOptions& options = {});
Solution solve_general_moment(const Scenario& scenario, const SolveOptions& options = {});

/// Dispatches on scenario.family.
Solution solve(const Scenario& scenario, const SolveOptions& options = {});

/// First-order condition of agent i at step k, evaluated at unit mean and unit
/// deviation with the supplied gains. Each channel's residual is divided by
/// its largest term; the larger of the two is returned (0 when all terms vanish).
double stationarity_residual(const Scenario& scenario, const CoefficientTable& table,
                             const GainSchedule& gains, int agent, int k);

}  // namespace mftg
