#include "mftg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mftg/numerics.hpp"

namespace mftg {

using json = nlohmann::json;

ValidationError::ValidationError(std::vector<Diagnostic> diagnostics)
    : Error([&] {
        std::string what = "scenario failed validation:";
        for (const auto& d : diagnostics) what += "\n  - " + d.message;
        return what;
      }()),
      diagnostics_(std::move(diagnostics)) {}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Deterministic: return "deterministic";
    case Family::Additive: return "additive";
    case Family::Multiplicative: return "multiplicative";
    case Family::GeneralMoment: return "general_moment";
  }
  return "unknown";
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Rademacher: return "rademacher";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::ExplicitMoments: return "explicit";
  }
  return "unknown";
}

std::string_view to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::Deterministic: return "deterministic";
    case InitialKind::Gaussian: return "gaussian";
    case InitialKind::Empirical: return "empirical";
  }
  return "unknown";
}

int Scenario::deviation_order() const {
  switch (family) {
    case Family::Deterministic: return 0;
    case Family::Additive:
    case Family::Multiplicative: return 2;
    case Family::GeneralMoment: return 2 * o;
  }
  return 0;
}

double Scenario::deviation_a(int k) const {
  return family == Family::GeneralMoment ? a_dev[k] : a_bar[k];
}

double Scenario::deviation_b(int agent, int k) const {
  return family == Family::GeneralMoment ? b_dev[agent][k] : b_bar[agent][k];
}

double initial_deviation_moment(const InitialLaw& law, int order) {
  if (order == 0) return 1.0;
  switch (law.kind) {
    case InitialKind::Deterministic:
      return ipow(law.value - law.mean, order);
    case InitialKind::Gaussian: {
      double df = 1.0;
      for (int k = order - 1; k > 1; k -= 2) df *= k;
      return ipow(std::sqrt(law.variance), order) * df;
    }
    case InitialKind::Empirical: {
      if (law.samples.empty()) return 0.0;
      double s = 0.0;
      for (const double x : law.samples) s += ipow(x - law.mean, order);
      return s / static_cast<double>(law.samples.size());
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

constexpr const char* kShape = "shape: every sequence has N entries per agent, terminal weights one per agent";
constexpr const char* kPositivity = "positivity: all weights q̄, q̄_N, r̄, q, q_N, r strictly positive";
constexpr const char* kBounded = "boundedness: dynamics coefficients finite";
constexpr const char* kFamily = "family/field combination";
constexpr const char* kNoise = "zero-mean noise with finite nonnegative moments";
constexpr const char* kInitial = "initial law consistency";

class DiagnosticSink {
 public:
  void add(std::string code, std::string message, const char* condition) {
    out_.push_back({std::move(code), std::move(message), condition});
  }
  std::vector<Diagnostic> take() { return std::move(out_); }

 private:
  std::vector<Diagnostic> out_;
};

std::string fmt_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool series_shape(DiagnosticSink& sink, const std::string& name, const Series& s, int n) {
  if (s.size() != static_cast<std::size_t>(n)) {
    sink.add("length_mismatch",
             "length mismatch: " + name + " has " + std::to_string(s.size()) +
                 " entries, expected " + std::to_string(n),
             kShape);
    return false;
  }
  return true;
}

bool agent_series_shape(DiagnosticSink& sink, const std::string& name, const AgentSeries& s,
                        int agents, int n) {
  if (s.size() != static_cast<std::size_t>(agents)) {
    sink.add("length_mismatch",
             "length mismatch: " + name + " has " + std::to_string(s.size()) +
                 " agent rows, expected " + std::to_string(agents),
             kShape);
    return false;
  }
  bool ok = true;
  for (int i = 0; i < agents; ++i) {
    ok &= series_shape(sink, name + "[agent " + std::to_string(i + 1) + "]", s[i], n);
  }
  return ok;
}

void check_positive(DiagnosticSink& sink, const std::string& name, const Series& s) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(s[k] > 0.0) || !std::isfinite(s[k])) {
      sink.add("weight_positivity",
               "weight positivity violated: " + name + " entry " + std::to_string(k) + " = " +
                   fmt_number(s[k]),
               kPositivity);
      return;
    }
  }
}

void check_positive(DiagnosticSink& sink, const std::string& name, const AgentSeries& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    check_positive(sink, name + "[agent " + std::to_string(i + 1) + "]", s[i]);
  }
}

void check_finite(DiagnosticSink& sink, const std::string& name, const Series& s) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!std::isfinite(s[k])) {
      sink.add("coefficient_bounds",
               "coefficient bound violated: " + name + " entry " + std::to_string(k) +
                   " is not finite",
               kBounded);
      return;
    }
  }
}

void check_finite(DiagnosticSink& sink, const std::string& name, const AgentSeries& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    check_finite(sink, name + "[agent " + std::to_string(i + 1) + "]", s[i]);
  }
}

}  // namespace

std::vector<Diagnostic> validate(const Scenario& s) {
  DiagnosticSink sink;

  if (s.agents < 1) sink.add("dimension", "agent count must be >= 1", kShape);
  if (s.horizon < 1) sink.add("dimension", "horizon must be >= 1", kShape);
  if (s.p < 1) sink.add("dimension", "p must be >= 1", kShape);
  if (s.o < 1) sink.add("dimension", "o must be >= 1", kShape);
  if (s.o != 1 && s.family != Family::GeneralMoment) {
    sink.add("family_combination", "o is only meaningful for the general_moment family", kFamily);
  }
  if (s.agents < 1 || s.horizon < 1) return sink.take();

  const int n = s.horizon;
  const int agents = s.agents;

  if (series_shape(sink, "a_bar", s.a_bar, n)) check_finite(sink, "a_bar", s.a_bar);
  if (agent_series_shape(sink, "b_bar", s.b_bar, agents, n)) check_finite(sink, "b_bar", s.b_bar);
  if (agent_series_shape(sink, "q_bar", s.q_bar, agents, n)) check_positive(sink, "q_bar", s.q_bar);
  if (series_shape(sink, "q_bar_terminal", s.q_bar_terminal, agents)) {
    check_positive(sink, "q_bar_terminal", s.q_bar_terminal);
  }
  if (agent_series_shape(sink, "r_bar", s.r_bar, agents, n)) check_positive(sink, "r_bar", s.r_bar);

  if (s.family == Family::GeneralMoment) {
    if (s.a_dev.empty() || s.b_dev.empty()) {
      sink.add("family_combination",
               "general_moment family requires deviation coefficients a and b", kFamily);
    } else {
      if (series_shape(sink, "a", s.a_dev, n)) check_finite(sink, "a", s.a_dev);
      if (agent_series_shape(sink, "b", s.b_dev, agents, n)) check_finite(sink, "b", s.b_dev);
    }
  } else if (!s.a_dev.empty() || !s.b_dev.empty()) {
    sink.add("family_combination",
             "deviation coefficients a, b are only allowed for the general_moment family", kFamily);
  }

  if (s.stochastic()) {
    if (s.q_dev.empty() || s.q_dev_terminal.empty() || s.r_dev.empty()) {
      sink.add("family_combination",
               std::string(to_string(s.family)) + " family requires weights q, q_terminal and r",
               kFamily);
    } else {
      if (agent_series_shape(sink, "q", s.q_dev, agents, n)) check_positive(sink, "q", s.q_dev);
      if (series_shape(sink, "q_terminal", s.q_dev_terminal, agents)) {
        check_positive(sink, "q_terminal", s.q_dev_terminal);
      }
      if (agent_series_shape(sink, "r", s.r_dev, agents, n)) check_positive(sink, "r", s.r_dev);
    }
    if (!s.noise) {
      sink.add("family_combination",
               std::string(to_string(s.family)) + " family requires a noise specification",
               kFamily);
    } else {
      const NoiseSpec& noise = *s.noise;
      if (noise.kind == NoiseKind::ExplicitMoments) {
        for (const auto& [order, table] : noise.moments) {
          const std::string name = "noise moment " + std::to_string(order);
          if (order < 2 || order % 2 != 0) {
            sink.add("noise", name + ": moment orders must be even and >= 2", kNoise);
            continue;
          }
          if (!series_shape(sink, name, table, n)) continue;
          for (int k = 0; k < n; ++k) {
            if (!(table[k] >= 0.0) || !std::isfinite(table[k])) {
              sink.add("noise", name + " entry " + std::to_string(k) + " must be finite and >= 0",
                       kNoise);
              break;
            }
          }
        }
        const int required = s.family == Family::GeneralMoment ? 2 * s.o : 2;
        if (!noise.moments.contains(required)) {
          sink.add("missing_moment",
                   "missing moment order: explicit noise must tabulate order " +
                       std::to_string(required),
                   kNoise);
        }
      } else {
        if (!noise.moments.empty()) {
          sink.add("noise", "moment tables are only allowed for explicit noise", kNoise);
        }
        if (series_shape(sink, "noise sigma", noise.sigma, n)) {
          for (int k = 0; k < n; ++k) {
            if (!(noise.sigma[k] >= 0.0) || !std::isfinite(noise.sigma[k])) {
              sink.add("noise", "noise sigma entry " + std::to_string(k) +
                                    " must be finite and >= 0",
                       kNoise);
              break;
            }
          }
        }
      }
    }
  } else {
    if (s.noise) {
      sink.add("family_combination", "deterministic family forbids a noise specification",
               kFamily);
    }
    if (!s.q_dev.empty() || !s.q_dev_terminal.empty() || !s.r_dev.empty()) {
      sink.add("family_combination", "deterministic family has no deviation weights q, r",
               kFamily);
    }
  }

  const InitialLaw& x0 = s.x0;
  if (!std::isfinite(x0.mean)) sink.add("initial_law", "initial mean must be finite", kInitial);
  switch (x0.kind) {
    case InitialKind::Deterministic:
      if (x0.variance != 0.0) {
        sink.add("initial_law", "deterministic initial law must have variance 0", kInitial);
      }
      if (!std::isfinite(x0.value)) {
        sink.add("initial_law", "initial value must be finite", kInitial);
      }
      break;
    case InitialKind::Gaussian:
      if (!(x0.variance >= 0.0) || !std::isfinite(x0.variance)) {
        sink.add("initial_law", "initial variance must be finite and >= 0", kInitial);
      }
      break;
    case InitialKind::Empirical: {
      if (x0.samples.empty()) {
        sink.add("initial_law", "empirical initial law needs at least one sample", kInitial);
        break;
      }
      const double avg = std::accumulate(x0.samples.begin(), x0.samples.end(), 0.0) /
                         static_cast<double>(x0.samples.size());
      if (!std::isfinite(avg) ||
          std::abs(avg - x0.mean) > 1e-12 * std::max(1.0, std::abs(x0.mean))) {
        sink.add("initial_law", "sample average " + fmt_number(avg) +
                                    " differs from the initial mean " + fmt_number(x0.mean),
                 kInitial);
      }
      break;
    }
  }
  if (!s.stochastic() && x0.kind != InitialKind::Deterministic) {
    sink.add("family_combination", "deterministic family needs a deterministic initial state",
             kFamily);
  }
  if (!s.stochastic() && x0.kind == InitialKind::Deterministic && x0.value != x0.mean) {
    sink.add("family_combination",
             "deterministic family has no deviation channel: initial value must equal the mean",
             kFamily);
  }

  return sink.take();
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  // nlohmann reports the 1-based index of the last byte read.
  const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw SchemaError(where + ": expected a table");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw SchemaError("unknown key '" + item.key() + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where + ": expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw SchemaError(where + ": integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t unsigned_integer(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw SchemaError(where + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

// A scalar broadcasts to `n` entries; a list is taken as is (validate checks its length).
Series read_series(const json& j, int n, const std::string& where) {
  if (j.is_number()) return Series(static_cast<std::size_t>(std::max(n, 0)), j.get<double>());
  if (!j.is_array()) throw SchemaError(where + ": expected a number or a list of numbers");
  Series out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  }
  return out;
}

// A scalar broadcasts to every agent and step; a list holds one entry per
// agent, each a scalar (broadcast over steps) or a per-step list.
AgentSeries read_agent_series(const json& j, int agents, int n, const std::string& where) {
  if (j.is_number()) {
    return AgentSeries(static_cast<std::size_t>(std::max(agents, 0)), read_series(j, n, where));
  }
  if (!j.is_array()) throw SchemaError(where + ": expected a number or a per-agent list");
  AgentSeries out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(read_series(j[i], n, where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Family parse_family(const json& j) {
  if (!j.is_string()) throw SchemaError("family: expected a string");
  const auto name = j.get<std::string>();
  for (const Family f : {Family::Deterministic, Family::Additive, Family::Multiplicative,
                         Family::GeneralMoment}) {
    if (name == to_string(f)) return f;
  }
  throw SchemaError("family: unknown family '" + name +
                    "' (expected deterministic, additive, multiplicative or general_moment)");
}

NoiseSpec parse_noise(const json& j, int n) {
  allow_keys(j, "noise", {"kind", "sigma", "moments"});
  NoiseSpec noise;
  const json& kind = require(j, "kind", "noise");
  if (!kind.is_string()) throw SchemaError("noise.kind: expected a string");
  const auto name = kind.get<std::string>();
  bool found = false;
  for (const NoiseKind k : {NoiseKind::Gaussian, NoiseKind::Rademacher, NoiseKind::Uniform,
                            NoiseKind::ExplicitMoments}) {
    if (name == to_string(k)) {
      noise.kind = k;
      found = true;
    }
  }
  if (!found) {
    throw SchemaError("noise.kind: unknown kind '" + name +
                      "' (expected gaussian, rademacher, uniform or explicit)");
  }
  if (noise.kind == NoiseKind::ExplicitMoments) {
    if (j.contains("sigma")) throw SchemaError("noise.sigma: not used by explicit noise");
    const json& moments = require(j, "moments", "noise");
    if (!moments.is_object()) throw SchemaError("noise.moments: expected a table");
    for (const auto& item : moments.items()) {
      int order = 0;
      try {
        std::size_t used = 0;
        order = std::stoi(item.key(), &used);
        if (used != item.key().size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw SchemaError("noise.moments: key '" + item.key() + "' is not an integer order");
      }
      noise.moments[order] = read_series(item.value(), n, "noise.moments." + item.key());
    }
  } else {
    if (j.contains("moments")) throw SchemaError("noise.moments: only used by explicit noise");
    noise.sigma = read_series(require(j, "sigma", "noise"), n, "noise.sigma");
  }
  return noise;
}

InitialLaw parse_initial(const json& j) {
  allow_keys(j, "initial", {"mean", "kind", "value", "variance", "samples", "recentered_by"});
  InitialLaw law;
  if (const auto it = j.find("kind"); it != j.end()) {
    if (!it->is_string()) throw SchemaError("initial.kind: expected a string");
    const auto name = it->get<std::string>();
    if (name == "deterministic") {
      law.kind = InitialKind::Deterministic;
    } else if (name == "gaussian") {
      law.kind = InitialKind::Gaussian;
    } else if (name == "empirical") {
      law.kind = InitialKind::Empirical;
    } else {
      throw SchemaError("initial.kind: unknown kind '" + name +
                        "' (expected deterministic, gaussian or empirical)");
    }
  }

  switch (law.kind) {
    case InitialKind::Deterministic:
      if (j.contains("samples")) throw SchemaError("initial.samples: only used by empirical laws");
      law.mean = number(require(j, "mean", "initial"), "initial.mean");
      law.value = j.contains("value") ? number(j["value"], "initial.value") : law.mean;
      law.variance = j.contains("variance") ? number(j["variance"], "initial.variance") : 0.0;
      break;
    case InitialKind::Gaussian:
      if (j.contains("samples") || j.contains("value")) {
        throw SchemaError("initial: gaussian law takes only mean and variance");
      }
      law.mean = number(require(j, "mean", "initial"), "initial.mean");
      law.value = law.mean;
      law.variance = number(require(j, "variance", "initial"), "initial.variance");
      break;
    case InitialKind::Empirical: {
      if (j.contains("value") || j.contains("variance")) {
        throw SchemaError("initial: empirical law takes only mean and samples");
      }
      law.samples = read_series(require(j, "samples", "initial"), 0, "initial.samples");
      if (!require(j, "samples", "initial").is_array()) {
        throw SchemaError("initial.samples: expected a list of numbers");
      }
      const double avg = law.samples.empty()
                             ? 0.0
                             : std::accumulate(law.samples.begin(), law.samples.end(), 0.0) /
                                   static_cast<double>(law.samples.size());
      law.mean = j.contains("mean") ? number(j["mean"], "initial.mean") : avg;
      law.value = law.mean;
      if (j.contains("recentered_by")) {
        law.recentered_by = number(j["recentered_by"], "initial.recentered_by");
      }
      const double shift = law.mean - avg;
      if (!law.samples.empty() && std::isfinite(shift) &&
          std::abs(shift) > 1e-12 * std::max(1.0, std::abs(law.mean))) {
        for (double& x : law.samples) x += shift;
        law.recentered_by += shift;
      }
      break;
    }
  }
  return law;
}

Scenario parse_document(const json& doc) {
  allow_keys(doc, "scenario",
             {"family", "agents", "horizon", "p", "o", "dynamics", "weights", "noise", "initial",
              "monte_carlo"});
  Scenario s;
  s.family = parse_family(require(doc, "family", "scenario"));
  s.agents = integer(require(doc, "agents", "scenario"), "agents");
  s.horizon = integer(require(doc, "horizon", "scenario"), "horizon");
  s.p = integer(require(doc, "p", "scenario"), "p");
  if (doc.contains("o")) {
    if (s.family != Family::GeneralMoment) {
      throw SchemaError("o: only allowed for the general_moment family");
    }
    s.o = integer(doc["o"], "o");
  }
  const int n = s.horizon;
  const int agents = s.agents;

  const json& dyn = require(doc, "dynamics", "scenario");
  const bool general = s.family == Family::GeneralMoment;
  if (general) {
    allow_keys(dyn, "dynamics", {"a_bar", "b_bar", "a", "b"});
  } else {
    allow_keys(dyn, "dynamics", {"a_bar", "b_bar"});
  }
  s.a_bar = read_series(require(dyn, "a_bar", "dynamics"), n, "dynamics.a_bar");
  s.b_bar = read_agent_series(require(dyn, "b_bar", "dynamics"), agents, n, "dynamics.b_bar");
  if (general) {
    s.a_dev = read_series(require(dyn, "a", "dynamics"), n, "dynamics.a");
    s.b_dev = read_agent_series(require(dyn, "b", "dynamics"), agents, n, "dynamics.b");
  }

  const json& w = require(doc, "weights", "scenario");
  if (s.stochastic()) {
    allow_keys(w, "weights", {"q_bar", "q_bar_terminal", "r_bar", "q", "q_terminal", "r"});
  } else {
    allow_keys(w, "weights", {"q_bar", "q_bar_terminal", "r_bar"});
  }
  s.q_bar = read_agent_series(require(w, "q_bar", "weights"), agents, n, "weights.q_bar");
  s.q_bar_terminal =
      read_series(require(w, "q_bar_terminal", "weights"), agents, "weights.q_bar_terminal");
  s.r_bar = read_agent_series(require(w, "r_bar", "weights"), agents, n, "weights.r_bar");
  if (s.stochastic()) {
    s.q_dev = read_agent_series(require(w, "q", "weights"), agents, n, "weights.q");
    s.q_dev_terminal = read_series(require(w, "q_terminal", "weights"), agents, "weights.q_terminal");
    s.r_dev = read_agent_series(require(w, "r", "weights"), agents, n, "weights.r");
  }

  if (doc.contains("noise")) {
    if (!s.stochastic()) throw SchemaError("noise: deterministic family forbids a noise block");
    s.noise = parse_noise(doc["noise"], n);
  } else if (s.stochastic()) {
    throw SchemaError("missing field 'noise' in scenario (required by the " +
                      std::string(to_string(s.family)) + " family)");
  }

  s.x0 = parse_initial(require(doc, "initial", "scenario"));

  if (const auto it = doc.find("monte_carlo"); it != doc.end()) {
    allow_keys(*it, "monte_carlo", {"paths", "seed", "storage_cap"});
    if (it->contains("paths")) s.mc.paths = unsigned_integer((*it)["paths"], "monte_carlo.paths");
    if (it->contains("seed")) s.mc.seed = unsigned_integer((*it)["seed"], "monte_carlo.seed");
    if (it->contains("storage_cap")) {
      s.mc.storage_cap = unsigned_integer((*it)["storage_cap"], "monte_carlo.storage_cap");
    }
  }
  return s;
}

}  // namespace

Scenario load_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(text, e.byte);
    throw ParseError("syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what(),
                     line, column);
  }
  Scenario s = parse_document(doc);
  auto diagnostics = validate(s);
  if (!diagnostics.empty()) throw ValidationError(std::move(diagnostics));
  return s;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_scenario(buffer.str());
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const Scenario& s) {
  json doc;
  doc["family"] = std::string(to_string(s.family));
  doc["agents"] = s.agents;
  doc["horizon"] = s.horizon;
  doc["p"] = s.p;
  if (s.family == Family::GeneralMoment) doc["o"] = s.o;

  json dyn;
  dyn["a_bar"] = s.a_bar;
  dyn["b_bar"] = s.b_bar;
  if (s.family == Family::GeneralMoment) {
    dyn["a"] = s.a_dev;
    dyn["b"] = s.b_dev;
  }
  doc["dynamics"] = dyn;

  json w;
  w["q_bar"] = s.q_bar;
  w["q_bar_terminal"] = s.q_bar_terminal;
  w["r_bar"] = s.r_bar;
  if (s.stochastic()) {
    w["q"] = s.q_dev;
    w["q_terminal"] = s.q_dev_terminal;
    w["r"] = s.r_dev;
  }
  doc["weights"] = w;

  if (s.noise) {
    json noise;
    noise["kind"] = std::string(to_string(s.noise->kind));
    if (s.noise->kind == NoiseKind::ExplicitMoments) {
      json moments = json::object();
      for (const auto& [order, table] : s.noise->moments) moments[std::to_string(order)] = table;
      noise["moments"] = moments;
    } else {
      noise["sigma"] = s.noise->sigma;
    }
    doc["noise"] = noise;
  }

  json x0;
  x0["kind"] = std::string(to_string(s.x0.kind));
  x0["mean"] = s.x0.mean;
  switch (s.x0.kind) {
    case InitialKind::Deterministic:
      x0["value"] = s.x0.value;
      x0["variance"] = s.x0.variance;
      break;
    case InitialKind::Gaussian:
      x0["variance"] = s.x0.variance;
      break;
    case InitialKind::Empirical:
      x0["samples"] = s.x0.samples;
      x0["recentered_by"] = s.x0.recentered_by;
      break;
  }
  doc["initial"] = x0;

  doc["monte_carlo"] = {
      {"paths", s.mc.paths}, {"seed", s.mc.seed}, {"storage_cap", s.mc.storage_cap}};
  return doc.dump(2) + "\n";
}

}  // namespace mftg
