#include "mftg/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "mftg/numerics.hpp"

namespace mftg {

MeanPath propagate_mean(const Scenario& s, const GainSchedule& gains) {
  const int n = s.horizon;
  MeanPath path;
  path.x_bar.assign(n + 1, 0.0);
  path.u_bar.assign(s.agents, Series(n, 0.0));
  path.x_bar[0] = s.x0.mean;
  for (int k = 0; k < n; ++k) {
    const double x = path.x_bar[k];
    double next = s.a_bar[k] * x;
    for (int i = 0; i < s.agents; ++i) {
      const double u = -gains.mean_gain[i][k] * s.a_bar[k] * x;
      path.u_bar[i][k] = u;
      next += s.b_bar[i][k] * u;
    }
    path.x_bar[k + 1] = next;
  }
  return path;
}

namespace {

constexpr std::uint64_t kBlockSize = 1024;

// Power sums of one block of paths. States: (N+1) × (n+1) with entry j the
// sum of δ^j. Controls: agents × N × 3 holding Σd, Σd², Σd^n.
struct BlockSums {
  std::vector<double> state;
  std::vector<double> control;
};

class PathSimulator {
 public:
  PathSimulator(const Scenario& s, const GainSchedule& gains, const MeanPath& mean)
      : s_(s), gains_(gains), mean_(mean), n_(s.horizon), order_(s.deviation_order()) {}

  // Simulates one path. `states`/`controls` may be null when not stored.
  void run(std::uint64_t seed, std::uint64_t path, BlockSums& sums, double* states,
           std::vector<double*>& controls, std::vector<double>& cost) const {
    PathStream rng(seed, path);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int agents = s_.agents;
    const int width = order_ + 1;

    double x = initial_state(rng, normal);
    std::fill(cost.begin(), cost.end(), 0.0);
    std::vector<double> d(agents);

    for (int k = 0; k <= n_; ++k) {
      const double delta = x - mean_.x_bar[k];
      if (states) states[k] = x;
      accumulate_powers(delta, &sums.state[static_cast<std::size_t>(k) * width]);
      const double delta_n = ipow(delta, order_);
      if (k == n_) {
        for (int i = 0; i < agents; ++i) cost[i] += s_.q_dev_terminal[i] * delta_n;
        break;
      }

      const double dev_a = s_.deviation_a(k);
      double next_mean = s_.a_bar[k] * mean_.x_bar[k];
      double next_state = s_.a_bar[k] * x;
      double dev_sum = dev_a * delta;
      for (int i = 0; i < agents; ++i) {
        d[i] = -gains_.dev_gain[i][k] * dev_a * delta;
        const double u = mean_.u_bar[i][k] + d[i];
        if (controls[i]) controls[i][k] = u;
        next_state += s_.b_bar[i][k] * u;
        next_mean += s_.b_bar[i][k] * mean_.u_bar[i][k];
        dev_sum += s_.deviation_b(i, k) * d[i];

        double* c = &sums.control[(static_cast<std::size_t>(i) * n_ + k) * 3];
        const double d_n = ipow(d[i], order_);
        c[0] += d[i];
        c[1] += d[i] * d[i];
        c[2] += d_n;
        cost[i] += s_.q_dev[i][k] * delta_n + s_.r_dev[i][k] * d_n;
      }

      const double eps = shock(rng, normal, k);
      switch (s_.family) {
        case Family::Additive:
          x = next_state + eps;
          break;
        case Family::Multiplicative:
          x = next_state + delta * eps;
          break;
        case Family::GeneralMoment:
          x = next_mean + dev_sum * eps;
          break;
        case Family::Deterministic:
          break;
      }
    }
  }

 private:
  void accumulate_powers(double delta, double* out) const {
    double power = 1.0;
    for (int j = 1; j <= order_; ++j) {
      power *= delta;
      out[j] += power;
    }
  }

  double initial_state(PathStream& rng, std::normal_distribution<double>& normal) const {
    const InitialLaw& law = s_.x0;
    switch (law.kind) {
      case InitialKind::Deterministic:
        return law.value;
      case InitialKind::Gaussian:
        return law.mean + std::sqrt(law.variance) * normal(rng);
      case InitialKind::Empirical: {
        std::uniform_int_distribution<std::size_t> pick(0, law.samples.size() - 1);
        return law.samples[pick(rng)];
      }
    }
    return law.mean;
  }

  double shock(PathStream& rng, std::normal_distribution<double>& normal, int k) const {
    const NoiseSpec& noise = *s_.noise;
    const double sigma = noise.sigma[k];
    switch (noise.kind) {
      case NoiseKind::Gaussian:
        return sigma * normal(rng);
      case NoiseKind::Rademacher:
        return (rng() >> 63) ? sigma : -sigma;
      case NoiseKind::Uniform: {
        const double w = sigma * std::sqrt(3.0);
        return w * (2.0 * std::generate_canonical<double, 53>(rng) - 1.0);
      }
      case NoiseKind::ExplicitMoments:
        break;
    }
    return 0.0;
  }

  const Scenario& s_;
  const GainSchedule& gains_;
  const MeanPath& mean_;
  int n_;
  int order_;
};

double binomial(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

// Central moment of order `order` from raw power sums about an arbitrary origin.
double central_from_sums(const double* sums, int order, double count, double shift) {
  double total = 0.0;
  for (int j = 0; j <= order; ++j) {
    const double raw = j == 0 ? 1.0 : sums[j] / count;
    total += binomial(order, j) * raw * ipow(-shift, order - j);
  }
  return total;
}

}  // namespace

Ensemble run_ensemble(const Scenario& s, const GainSchedule& gains,
                      const EnsembleOptions& options) {
  if (!s.stochastic()) {
    throw PreconditionError("the deterministic family has no ensemble to simulate");
  }
  if (s.noise->kind == NoiseKind::ExplicitMoments) {
    throw DomainError("explicit moment tables do not define a distribution to sample from");
  }
  const std::uint64_t paths = options.paths.value_or(s.mc.paths);
  const std::uint64_t seed = options.seed.value_or(s.mc.seed);
  const std::uint64_t cap = options.storage_cap.value_or(s.mc.storage_cap);
  if (paths == 0) throw PreconditionError("run_ensemble needs at least one path");

  const int n = s.horizon;
  const int agents = s.agents;
  const int order = s.deviation_order();
  const bool store = options.keep_trajectories && paths <= cap;

  const double per_path = 8.0 * (agents + (store ? (n + 1) + static_cast<double>(agents) * n : 0));
  if (per_path * static_cast<double>(paths) > static_cast<double>(options.memory_budget)) {
    throw ResourceError("ensemble of " + std::to_string(paths) + " paths needs about " +
                        std::to_string(static_cast<std::uint64_t>(per_path * paths) >> 20) +
                        " MiB, above the budget of " +
                        std::to_string(options.memory_budget >> 20) + " MiB");
  }

  Ensemble out;
  out.paths = paths;
  out.seed = seed;
  out.stored = store;
  out.mean_path = propagate_mean(s, gains);
  out.path_cost.assign(agents, Series(paths, 0.0));
  if (store) {
    out.states = PathMatrix{paths, static_cast<std::size_t>(n + 1),
                            std::vector<double>(paths * (n + 1))};
    out.controls.assign(agents, PathMatrix{paths, static_cast<std::size_t>(n),
                                           std::vector<double>(paths * n)});
  }

  const std::size_t state_width = static_cast<std::size_t>(n + 1) * (order + 1);
  const std::size_t control_width = static_cast<std::size_t>(agents) * n * 3;
  const std::uint64_t blocks = (paths + kBlockSize - 1) / kBlockSize;
  std::vector<BlockSums> block_sums(blocks);

  const PathSimulator sim(s, gains, out.mean_path);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      std::vector<double*> controls(agents, nullptr);
      std::vector<double> cost(agents);
      for (std::uint64_t b = next++; b < blocks; b = next++) {
        BlockSums& sums = block_sums[b];
        sums.state.assign(state_width, 0.0);
        sums.control.assign(control_width, 0.0);
        const std::uint64_t end = std::min(paths, (b + 1) * kBlockSize);
        for (std::uint64_t m = b * kBlockSize; m < end; ++m) {
          double* states = store ? &out.states.data[m * (n + 1)] : nullptr;
          for (int i = 0; i < agents; ++i) {
            controls[i] = store ? &out.controls[i].data[m * n] : nullptr;
          }
          sim.run(seed, m, sums, states, controls, cost);
          for (int i = 0; i < agents; ++i) out.path_cost[i][m] = cost[i];
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, blocks));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Reduce in block order so the result is independent of the schedule.
  std::vector<double> state(state_width, 0.0);
  std::vector<double> control(control_width, 0.0);
  for (const BlockSums& b : block_sums) {
    for (std::size_t j = 0; j < state_width; ++j) state[j] += b.state[j];
    for (std::size_t j = 0; j < control_width; ++j) control[j] += b.control[j];
  }

  const double count = static_cast<double>(paths);
  out.empirical_mean.resize(n + 1);
  out.empirical_variance.resize(n + 1);
  out.empirical_moment.resize(n + 1);
  out.deviation_moment.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double* sums = &state[static_cast<std::size_t>(k) * (order + 1)];
    const double shift = sums[1] / count;
    out.empirical_mean[k] = out.mean_path.x_bar[k] + shift;
    out.empirical_variance[k] = central_from_sums(sums, 2, count, shift);
    out.empirical_moment[k] = central_from_sums(sums, order, count, shift);
    out.deviation_moment[k] = sums[order] / count;
  }

  out.control_mean.assign(agents, Series(n));
  out.control_mean_se.assign(agents, Series(n));
  out.control_deviation_moment.assign(agents, Series(n));
  for (int i = 0; i < agents; ++i) {
    for (int k = 0; k < n; ++k) {
      const double* c = &control[(static_cast<std::size_t>(i) * n + k) * 3];
      const double mu = c[0] / count;
      out.control_mean[i][k] = out.mean_path.u_bar[i][k] + mu;
      const double var = paths > 1 ? std::max(0.0, (c[1] - count * mu * mu) / (count - 1)) : 0.0;
      out.control_mean_se[i][k] = std::sqrt(var / count);
      out.control_deviation_moment[i][k] = c[2] / count;
    }
  }
  return out;
}

double predicted_cost(const Scenario& s, const CoefficientTable& table, int i) {
  double f = table.alpha_bar[i][0] * ipow(s.x0.mean, s.mean_order());
  if (s.stochastic()) {
    f += table.alpha[i][0] * initial_deviation_moment(s.x0, s.deviation_order());
  }
  if (!table.gamma_bar.empty()) f += table.gamma_bar[i][0];
  return f;
}

namespace {

void mean_terms(const Scenario& s, const MeanPath& path, int i, CostBreakdown& c) {
  const int n = s.horizon;
  const int order = s.mean_order();
  for (int k = 0; k < n; ++k) {
    c.state_mean += s.q_bar[i][k] * ipow(path.x_bar[k], order);
    c.control_mean += s.r_bar[i][k] * ipow(path.u_bar[i][k], order);
  }
  c.terminal_mean = s.q_bar_terminal[i] * ipow(path.x_bar[n], order);
}

void finish(const Scenario& s, const CoefficientTable& table, int i, CostBreakdown& c) {
  c.total = c.state_mean + c.state_moment + c.control_mean + c.control_moment + c.terminal_mean +
            c.terminal_moment;
  c.predicted = predicted_cost(s, table, i);
  c.predicted_mean = table.alpha_bar[i][0] * ipow(s.x0.mean, s.mean_order());
}

}  // namespace

std::vector<CostBreakdown> evaluate_cost(const Scenario& s, const MeanPath& path,
                                         const CoefficientTable& table) {
  std::vector<CostBreakdown> out(s.agents);
  for (int i = 0; i < s.agents; ++i) {
    mean_terms(s, path, i, out[i]);
    finish(s, table, i, out[i]);
  }
  return out;
}

std::vector<CostBreakdown> evaluate_cost(const Scenario& s, const Ensemble& e,
                                         const CoefficientTable& table) {
  const int n = s.horizon;
  std::vector<CostBreakdown> out(s.agents);
  for (int i = 0; i < s.agents; ++i) {
    CostBreakdown& c = out[i];
    mean_terms(s, e.mean_path, i, c);
    for (int k = 0; k < n; ++k) {
      c.state_moment += s.q_dev[i][k] * e.deviation_moment[k];
      c.control_moment += s.r_dev[i][k] * e.control_deviation_moment[i][k];
    }
    c.terminal_moment = s.q_dev_terminal[i] * e.deviation_moment[n];
    finish(s, table, i, c);

    const Series& costs = e.path_cost[i];
    const double count = static_cast<double>(costs.size());
    if (costs.size() > 1) {
      double mean = 0.0;
      for (const double v : costs) mean += v;
      mean /= count;
      double ss = 0.0;
      for (const double v : costs) ss += (v - mean) * (v - mean);
      c.standard_error = std::sqrt(ss / (count - 1) / count);
    }
  }
  return out;
}

}  // namespace mftg
