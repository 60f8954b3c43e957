#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using mftg::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_root() {
  const fs::path root = fs::temp_directory_path() / ("mftg_cli_" + std::to_string(::getpid()));
  fs::create_directories(root);
  return root;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = scratch_root() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_root() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string example(const std::string& name) { return mftg::test::scenario_path(name).string(); }

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    FAIL("no column " << name);
    return -1;
  }
  double number(std::size_t row, const std::string& name) const {
    return std::stod(rows[row][column(name)]);
  }
  const std::string& cell(std::size_t row, const std::string& name) const {
    return rows[row][column(name)];
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& path) {
  std::istringstream in(slurp(path));
  Csv csv;
  std::string line;
  REQUIRE(std::getline(in, line));
  csv.header = split(line);
  while (std::getline(in, line)) csv.rows.push_back(split(line));
  return csv;
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace

TEST_CASE("solve writes coefficient and gain tables") {
  const fs::path out = scratch("solve_a");
  const Result r = call({"solve", example("example_a"), "--out", out.string()});
  REQUIRE(r.code == 0);
  const Csv coef = read_csv(out / "coefficients.csv");
  CHECK(coef.header == std::vector<std::string>{"k", "agent", "alpha_bar", "alpha", "gamma_bar"});
  CHECK(coef.rows.size() == 16);
  CHECK(coef.cell(15, "k") == "7");
  CHECK(coef.number(14, "alpha_bar") == 4.0);
  CHECK(coef.number(15, "alpha_bar") == 5.0);
  CHECK(coef.cell(0, "alpha").empty());
  const Csv gains = read_csv(out / "gains.csv");
  CHECK(gains.header == std::vector<std::string>{"k", "agent", "mean_gain", "dev_gain", "c_bar", "c",
                                                 "closed_loop_mean", "closed_loop_dev"});
  CHECK(gains.rows.size() == 14);

  const auto manifest = read_manifest(out / "manifest.txt");
  CHECK(manifest.at("command") == "solve");
  CHECK(manifest.at("scenario_sha256").size() == 64);
  CHECK(manifest.count("file.coefficients.csv") == 1);
  CHECK(manifest.count("started_utc") == 1);

  const fs::path again = scratch("solve_a_again");
  REQUIRE(call({"solve", example("example_a"), "--out", again.string()}).code == 0);
  const auto second = read_manifest(again / "manifest.txt");
  CHECK(second.at("file.coefficients.csv") == manifest.at("file.coefficients.csv"));
  CHECK(second.at("file.gains.csv") == manifest.at("file.gains.csv"));
  CHECK(slurp(again / "coefficients.csv") == slurp(out / "coefficients.csv"));
}

TEST_CASE("numbers are written with 17 significant digits") {
  const fs::path out = scratch("solve_one_step");
  REQUIRE(call({"solve", example("one_step"), "--out", out.string()}).code == 0);
  const Csv coef = read_csv(out / "coefficients.csv");
  CHECK(coef.cell(0, "alpha_bar") == "1.0246913580246915");
  CHECK(std::stod(coef.cell(0, "alpha_bar")) == doctest::Approx(83.0 / 81.0).epsilon(1e-15));
}

TEST_CASE("exit codes partition the failure classes") {
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
  CHECK(call({"solve", example("example_a")}).code == 1);
  CHECK(call({"solve", example("example_a"), "--out", scratch("x").string(), "--bogus"}).code == 1);
  CHECK(call({"solve", example("example_a"), "--out", scratch("x").string(), "--format", "json"})
            .code == 1);
  CHECK(call({"--help"}).code == 0);
  CHECK(call({"--version"}).code == 0);

  CHECK(call({"solve", write_file("empty.json", "").string(), "--out", scratch("e").string()}).code ==
        2);
  CHECK(call({"solve", write_file("blank.json", " \n\t\n").string(), "--out", scratch("e").string()})
            .code == 2);
  CHECK(call({"solve", write_file("broken.json", "{\"family\": ").string(), "--out",
              scratch("e").string()})
            .code == 2);
  CHECK(call({"solve", "/nonexistent/scenario.json", "--out", scratch("e").string()}).code == 2);

  std::string text = slurp(example("example_a"));
  std::string zero = text;
  zero.replace(zero.find("\"q_bar\": [4, 5]"), 15, "\"q_bar\": [0, 5]");
  const Result positivity = call({"solve", write_file("zero.json", zero).string(), "--out",
                                  scratch("e").string()});
  CHECK(positivity.code == 3);
  CHECK(positivity.err.find("weight positivity violated") != std::string::npos);
  CHECK(positivity.err.find("positivity: all weights") != std::string::npos);

  std::string schema = text;
  schema.replace(schema.find("\"p\": 2"), 6, "\"p\": 2, \"noise\": {\"kind\": \"gaussian\", \"sigma\": 1}");
  CHECK(call({"solve", write_file("schema.json", schema).string(), "--out", scratch("e").string()})
            .code == 3);

  const std::string blowup = R"({"family": "deterministic", "agents": 1, "horizon": 4, "p": 4,
    "dynamics": {"a_bar": 1e30, "b_bar": 0},
    "weights": {"q_bar": 1, "q_bar_terminal": 1, "r_bar": 1}, "initial": {"mean": 1}})";
  const Result overflow = call({"solve", write_file("blowup.json", blowup).string(), "--out",
                                scratch("e").string()});
  CHECK(overflow.code == 4);
  CHECK(overflow.err.find("overflow") != std::string::npos);

  CHECK(call({"simulate", example("example_b"), "--out", scratch("e").string(), "--paths",
              "100000000000"})
            .code == 5);
}

TEST_CASE("simulate writes mean path, ensemble statistics and costs") {
  const fs::path out = scratch("simulate_b");
  const Result r = call({"simulate", example("example_b"), "--out", out.string(), "--paths", "10000",
                         "--seed", "42", "--plot"});
  REQUIRE(r.code == 0);
  const Csv mean = read_csv(out / "meanpath.csv");
  CHECK(mean.header == std::vector<std::string>{"k", "x_bar", "u_bar_1", "u_bar_2"});
  CHECK(mean.rows.size() == 11);
  CHECK(mean.number(0, "x_bar") == 20.25);
  const Csv stats = read_csv(out / "ensemble_stats.csv");
  CHECK(std::vector<std::string>(stats.header.begin(), stats.header.begin() + 4) ==
        std::vector<std::string>{"k", "emp_mean", "emp_var", "emp_moment_2o"});
  const Csv costs = read_csv(out / "costs.csv");
  REQUIRE(costs.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(costs.number(i, "total") - costs.number(i, "predicted")) <=
          3.0 * costs.number(i, "standard_error"));
  }
  for (const char* svg : {"state.svg", "controls.svg", "coefficients.svg"}) {
    CHECK(slurp(out / svg).rfind("<svg", 0) == 0);
  }
  CHECK(!fs::exists(out / "trajectories.csv"));
  CHECK(read_manifest(out / "manifest.txt").at("seed") == "42");
}

TEST_CASE("simulate on the deterministic family ignores --paths") {
  const fs::path out = scratch("simulate_a");
  const Result r = call({"simulate", example("example_a"), "--out", out.string(), "--paths", "100"});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(fs::exists(out / "meanpath.csv"));
  CHECK(fs::exists(out / "costs.csv"));
  CHECK(!fs::exists(out / "ensemble_stats.csv"));
}

TEST_CASE("simulate output is reproducible across reruns and thread counts") {
  std::string reference;
  for (const char* threads : {"1", "2", "8", "1"}) {
    const fs::path out = scratch(std::string("simulate_threads_") + threads);
    REQUIRE(call({"simulate", example("example_c"), "--out", out.string(), "--paths", "3000",
                  "--seed", "9", "--threads", threads})
                .code == 0);
    const std::string stats = slurp(out / "ensemble_stats.csv") + slurp(out / "costs.csv") +
                              slurp(out / "control_stats.csv");
    if (reference.empty()) reference = stats;
    CHECK(stats == reference);
  }
}

TEST_CASE("trajectories are written on request") {
  const fs::path out = scratch("simulate_traj");
  REQUIRE(call({"simulate", example("general_moment"), "--out", out.string(), "--paths", "20",
                "--trajectories"})
              .code == 0);
  const Csv traj = read_csv(out / "trajectories.csv");
  CHECK(traj.header == std::vector<std::string>{"path", "k", "x", "u_1", "u_2"});
  CHECK(traj.rows.size() == 20 * 7);
  CHECK(traj.cell(6, "u_1").empty());
}

TEST_CASE("verify passes on the hand-checked game and reports every criterion") {
  const fs::path out = scratch("verify_one");
  const Result r = call({"verify", example("one_step"), "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("result: PASS") != std::string::npos);
  const Csv report = read_csv(out / "report.csv");
  CHECK(report.header == std::vector<std::string>{"criterion", "agent", "step", "channel", "value",
                                                  "tolerance", "pass", "detail"});
  std::map<std::string, int> seen;
  for (std::size_t j = 0; j < report.rows.size(); ++j) {
    ++seen[report.cell(j, "criterion")];
    CHECK(report.cell(j, "pass") == "true");
  }
  for (const char* c : {"deviation_margin", "open_loop_jitter", "stationarity",
                        "positivity_alpha_bar", "convexity_min", "bellman_residual"}) {
    CHECK(seen[c] >= 1);
  }
  CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("verify on the multiplicative example") {
  const fs::path out = scratch("verify_c");
  const Result r = call({"verify", example("example_c"), "--out", out.string(), "--paths", "500",
                         "--grid", "21:0.2", "--probes", "8"});
  CHECK(r.code == 0);
  const Csv report = read_csv(out / "report.csv");
  std::map<std::string, int> seen;
  for (std::size_t j = 0; j < report.rows.size(); ++j) ++seen[report.cell(j, "criterion")];
  CHECK(seen["stationarity"] == 1);
  CHECK(seen["positivity_alpha_bar"] == 1);
  CHECK(seen["positivity_alpha"] == 1);
  CHECK(seen["bellman_residual"] == 10);
}

TEST_CASE("verify fails on an injected gain corruption") {
  const fs::path out = scratch("verify_inject");
  const Result r = call({"verify", example("one_step"), "--out", out.string(), "--inject-gain",
                         "1:0:1.2"});
  CHECK(r.code == 6);
  CHECK(r.err.find("unilateral deviation") != std::string::npos);
  const Csv report = read_csv(out / "report.csv");
  bool failed_margin = false;
  for (std::size_t j = 0; j < report.rows.size(); ++j) {
    if (report.cell(j, "criterion") == "deviation_margin" && report.cell(j, "pass") == "false") {
      failed_margin = report.number(j, "value") > 0.0;
    }
  }
  CHECK(failed_margin);

  CHECK(call({"verify", example("one_step"), "--out", out.string(), "--inject-gain", "3:0:1.2"})
            .code == 1);
  CHECK(call({"verify", example("one_step"), "--out", out.string(), "--inject-gain", "nonsense"})
            .code == 1);
  CHECK(call({"verify", example("one_step"), "--out", out.string(), "--grid", "0"}).code == 1);
}

TEST_CASE("sweep over p on the deterministic example") {
  const fs::path out = scratch("sweep_a");
  const Result r = call({"sweep", example("example_a"), "--out", out.string(), "--set", "p=2,3,4"});
  REQUIRE(r.code == 0);
  const Csv sweep = read_csv(out / "sweep.csv");
  CHECK(sweep.header[0] == "run");
  CHECK(sweep.header[1] == "p");
  CHECK(sweep.rows.size() == 3 * 16);
  std::map<std::string, std::vector<std::string>> alpha_bar;
  for (std::size_t j = 0; j < sweep.rows.size(); ++j) {
    alpha_bar[sweep.cell(j, "p")].push_back(sweep.cell(j, "alpha_bar"));
  }
  CHECK(alpha_bar.size() == 3);
  CHECK(alpha_bar["2"] != alpha_bar["3"]);
  CHECK(alpha_bar["3"] != alpha_bar["4"]);
  for (const char* run : {"run_001", "run_002", "run_003"}) {
    CHECK(fs::exists(out / run / "coefficients.csv"));
    CHECK(fs::exists(out / run / "meanpath.csv"));
    CHECK(fs::exists(out / run / "manifest.txt"));
  }
  CHECK(read_manifest(out / "manifest.txt").at("runs") == "3");
}

TEST_CASE("sweep over p on the variance-aware example keeps alpha and gamma_bar") {
  const fs::path out = scratch("sweep_b");
  REQUIRE(call({"sweep", example("example_b"), "--out", out.string(), "--set", "p=2,3,4", "--paths",
                "200"})
              .code == 0);
  const Csv sweep = read_csv(out / "sweep.csv");
  std::map<std::string, std::vector<std::string>> alpha;
  std::map<std::string, std::vector<std::string>> gamma;
  for (std::size_t j = 0; j < sweep.rows.size(); ++j) {
    alpha[sweep.cell(j, "p")].push_back(sweep.cell(j, "alpha"));
    gamma[sweep.cell(j, "p")].push_back(sweep.cell(j, "gamma_bar"));
  }
  CHECK(alpha.size() == 3);
  CHECK(alpha["2"] == alpha["3"]);
  CHECK(alpha["2"] == alpha["4"]);
  CHECK(gamma["2"] == gamma["3"]);
  CHECK(gamma["2"] == gamma["4"]);
  CHECK(fs::exists(out / "run_002" / "ensemble_stats.csv"));
}

TEST_CASE("sweep records failures and continues") {
  const fs::path out = scratch("sweep_fail");
  const Result r = call({"sweep", example("example_a"), "--out", out.string(), "--set",
                         "weights.r_bar.0=6,-1", "--set", "p=1,2"});
  CHECK(r.code == 3);
  const Csv status = read_csv(out / "sweep_status.csv");
  REQUIRE(status.rows.size() == 4);
  int failed = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    if (status.cell(j, "status") == "failed") {
      ++failed;
      CHECK(status.cell(j, "weights.r_bar.0") == "-1");
      CHECK(status.cell(j, "exit_code") == "3");
    }
  }
  CHECK(failed == 2);
  CHECK(read_csv(out / "sweep.csv").rows.size() == 2 * 16);
}

TEST_CASE("sweep usage errors") {
  CHECK(call({"sweep", example("example_a"), "--out", scratch("s").string()}).code == 1);
  CHECK(call({"sweep", example("example_a"), "--out", scratch("s").string(), "--set", "p="}).code ==
        1);
  CHECK(call({"sweep", example("example_a"), "--out", scratch("s").string(), "--set", "novalue"})
            .code == 1);
}
