#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mftg/recursion.hpp"
#include "mftg/scenario.hpp"

namespace mftg {

/// Exact closed-loop mean trajectory. x_bar has N+1 entries, u_bar[i] has N.
struct MeanPath {
  Series x_bar;
  AgentSeries u_bar;
};

/// x̄_{k+1} = ā_k x̄_k + Σ_i b̄_ik ū_ik with ū_ik = −ḡ_ik ā_k x̄_k.
MeanPath propagate_mean(const Scenario& scenario, const GainSchedule& gains);

/// Row-major dense matrix of path data.
struct PathMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  bool operator==(const PathMatrix&) const = default;
};

/// SplitMix64 stream keyed by (seed, path). Every path owns an independent
/// stream, so results do not depend on how paths are scheduled.
class PathStream {
 public:
  using result_type = std::uint64_t;

  PathStream(std::uint64_t seed, std::uint64_t path)
      : state_(mix(seed ^ mix(path + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

struct EnsembleOptions {
  unsigned threads = 0;                       // 0: hardware concurrency
  std::optional<std::uint64_t> paths;         // overrides scenario.mc.paths
  std::optional<std::uint64_t> seed;          // overrides scenario.mc.seed
  std::optional<std::uint64_t> storage_cap;   // overrides scenario.mc.storage_cap
  bool keep_trajectories = true;
  std::size_t memory_budget = std::size_t{1} << 30;  // bytes
};

/// Monte Carlo ensemble under the equilibrium feedback law. Step-indexed
/// series have N+1 entries (states) or N entries (controls); n denotes the
/// deviation order of the family.
struct Ensemble {
  std::uint64_t paths = 0;
  std::uint64_t seed = 0;
  bool stored = false;

  PathMatrix states;                 // paths × (N+1), empty unless stored
  std::vector<PathMatrix> controls;  // per agent, paths × N, empty unless stored

  Series empirical_mean;             // arithmetic mean of x_k over paths
  Series empirical_variance;         // central second moment about empirical_mean
  Series empirical_moment;           // central n-th moment about empirical_mean
  Series deviation_moment;           // mean of (x_k − x̄_k)^n with the model mean x̄_k

  AgentSeries control_mean;          // mean of u_ik over paths
  AgentSeries control_mean_se;       // its standard error
  AgentSeries control_deviation_moment;  // mean of (u_ik − ū_ik)^n

  AgentSeries path_cost;             // [agent][path] deviation-channel cost of each path
  MeanPath mean_path;
};

/// Simulates the stochastic closed loop. Throws PreconditionError for the
/// deterministic family or zero paths, DomainError for noise that cannot be
/// sampled, ResourceError when storage exceeds the memory budget.
Ensemble run_ensemble(const Scenario& scenario, const GainSchedule& gains,
                      const EnsembleOptions& options = {});

/// Per-agent realized cost split into its terms.
struct CostBreakdown {
  double state_mean = 0.0;       // Σ_k q̄_ik x̄_k^{2p}
  double state_moment = 0.0;     // Σ_k q_ik E[(x_k − x̄_k)^n]
  double control_mean = 0.0;     // Σ_k r̄_ik ū_ik^{2p}
  double control_moment = 0.0;   // Σ_k r_ik E[(u_ik − ū_ik)^n]
  double terminal_mean = 0.0;    // q̄_iN x̄_N^{2p}
  double terminal_moment = 0.0;  // q_iN E[(x_N − x̄_N)^n]
  double total = 0.0;
  double predicted = 0.0;        // α_i0 E[(x0 − x̄0)^n] + ᾱ_i0 x̄0^{2p} + γ̄_i0
  double predicted_mean = 0.0;   // ᾱ_i0 x̄0^{2p}
  double standard_error = 0.0;   // of total, from the spread of path costs
};

/// Mean-channel cost along the exact mean path; moment terms are zero.
std::vector<CostBreakdown> evaluate_cost(const Scenario& scenario, const MeanPath& path,
                                         const CoefficientTable& table);

/// Mean terms from the exact mean path, moment terms from the ensemble.
std::vector<CostBreakdown> evaluate_cost(const Scenario& scenario, const Ensemble& ensemble,
                                         const CoefficientTable& table);

/// α_i0 E[(x0 − x̄0)^n] + ᾱ_i0 x̄0^{2p} + γ̄_i0.
double predicted_cost(const Scenario& scenario, const CoefficientTable& table, int agent);

}  // namespace mftg
