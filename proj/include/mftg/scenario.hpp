#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mftg/errors.hpp"

namespace mftg {

/// Per-step sequence, indexed by time step k.
using Series = std::vector<double>;
/// Per-agent sequences, indexed [agent][k].
using AgentSeries = std::vector<Series>;

enum class Family {
  Deterministic,   // mean dynamics only, cost x̄^{2p} + ū^{2p}
  Additive,        // x_{k+1} = ā x + Σ b̄ u + ε
  Multiplicative,  // x_{k+1} = ā x + Σ b̄ u + (x − x̄) ε
  GeneralMoment,   // deviation channel (a (x − x̄) + Σ b (u − ū)) ε, 2o-th moment costs
};

enum class NoiseKind { Gaussian, Rademacher, Uniform, ExplicitMoments };

enum class InitialKind { Deterministic, Gaussian, Empirical };

std::string_view to_string(Family family);
std::string_view to_string(NoiseKind kind);
std::string_view to_string(InitialKind kind);

/// Zero-mean shock law. Entry k of every table describes the shock ε_{k+1}
/// that enters the transition k -> k+1, so each table has N entries.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  Series sigma;                    // standard deviation per transition
  std::map<int, Series> moments;   // even order -> E[ε^order] per transition

  bool operator==(const NoiseSpec&) const = default;
};

struct InitialLaw {
  double mean = 0.0;
  InitialKind kind = InitialKind::Deterministic;
  // Atom location for the deterministic kind. It may differ from `mean`,
  // which then describes a single-atom law whose deviation x0 − x̄0 is fixed.
  double value = 0.0;
  double variance = 0.0;
  std::vector<double> samples;
  // Shift applied by the loader so that the sample average equals `mean`.
  double recentered_by = 0.0;

  bool operator==(const InitialLaw&) const = default;
};

struct MonteCarloConfig {
  std::uint64_t paths = 0;  // 0: mean path only
  std::uint64_t seed = 0;
  std::uint64_t storage_cap = 100000;  // keep trajectories up to this many paths

  bool operator==(const MonteCarloConfig&) const = default;
};

/// A complete problem instance. After load_scenario() every sequence is
/// materialized to its full length; scalar inputs have been broadcast.
struct Scenario {
  Family family = Family::Deterministic;
  int agents = 1;
  int horizon = 1;
  int p = 1;  // mean costs have exponent 2p
  int o = 1;  // moment costs have exponent 2o (general-moment family only)

  Series a_bar;        // ā_k
  AgentSeries b_bar;   // b̄_ik
  Series a_dev;        // a_k, general-moment family only
  AgentSeries b_dev;   // b_ik, general-moment family only

  AgentSeries q_bar;            // running weight on x̄^{2p}
  Series q_bar_terminal;        // per agent
  AgentSeries r_bar;            // weight on ū^{2p}
  AgentSeries q_dev;            // weight on the state deviation moment
  Series q_dev_terminal;
  AgentSeries r_dev;            // weight on the control deviation moment

  std::optional<NoiseSpec> noise;
  InitialLaw x0;
  MonteCarloConfig mc;

  bool operator==(const Scenario&) const = default;

  bool stochastic() const { return family != Family::Deterministic; }
  int mean_order() const { return 2 * p; }
  /// Exponent of the deviation cost terms: 2 for the variance families,
  /// 2o for the general-moment family, 0 when there is no deviation channel.
  int deviation_order() const;
  /// Coefficient multiplying (x_k − x̄_k) in the deviation dynamics.
  double deviation_a(int k) const;
  /// Coefficient multiplying (u_ik − ū_ik) in the deviation dynamics.
  double deviation_b(int agent, int k) const;
};

/// Returns one diagnostic per violated condition; empty when the scenario is
/// well posed.
std::vector<Diagnostic> validate(const Scenario& scenario);

/// Parses a JSON scenario document (comments allowed), broadcasts scalars
/// and validates. Throws ParseError, SchemaError or ValidationError.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);

/// Fully materialized JSON document; load_scenario(serialize(s)) == s.
std::string serialize(const Scenario& scenario);

/// E[(x0 − x̄0)^order] under the initial law.
double initial_deviation_moment(const InitialLaw& law, int order);

}  // namespace mftg
