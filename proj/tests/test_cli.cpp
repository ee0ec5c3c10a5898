#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "maser/cli.hpp"
#include "maser/params.hpp"
#include "maser/spectral.hpp"

namespace fs = std::filesystem;
using namespace maser;
using namespace maser::cli;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("maser_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const char* kSmall = R"({
  "dimensionless": {"eta": 0.1, "xi": 0.7, "omega_tau": 0.9},
  "thermal": {"beta_omega0": 1.0},
  "truncation": {"n_max": 12, "d_max": 2},
  "simulate": {"initial": "coherent", "alpha": 1.0, "steps": 5}
})";

}  // namespace

TEST_CASE("format_double prints 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-1.0 / 3.0) == "-0.33333333333333331");
}

TEST_CASE("simulate on the fixed point stays at distance zero") {
  const fs::path out = scratch("fixed");
  const RunResult r = run_experiment(Kind::Simulate, R"({
    "dimensionless": {"eta": 0.2, "xi": 0.6},
    "thermal": {"beta_omega0": 1.5},
    "truncation": {"n_max": 60, "d_max": 1},
    "simulate": {"initial": "thermal", "steps": 40}
  })", {out});
  REQUIRE(r.exit_code == kExitOk);
  const auto rows = read_csv(out / "simulate.csv");
  REQUIRE(rows.size() == 42);
  CHECK(rows[0] == std::vector<std::string>{"step", "trace_distance", "leakage", "band0_fixednorm", "band_d0_l1",
                                            "band_d1_l1"});
  for (size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) <= 1e-10);
}

TEST_CASE("resonances at eta = 0, xi = 1 list the squares") {
  const fs::path out = scratch("squares");
  const RunResult r = run_experiment(Kind::Resonances, R"({
    "dimensionless": {"eta": 0, "xi": 1},
    "thermal": {"beta_omega0": 1},
    "truncation": {"n_max": 16},
    "resonances": {"bound": 100}
  })", {out});
  REQUIRE(r.exit_code == kExitOk);
  const auto rows = read_csv(out / "resonances.csv");
  REQUIRE(rows.size() == 11);
  for (int k = 1; k <= 10; ++k) {
    CHECK(std::stol(rows[static_cast<size_t>(k)][0]) == k * k);
    CHECK(std::stod(rows[static_cast<size_t>(k)][2]) == k);
  }
  const auto summary = read_csv(out / "summary.csv");
  CHECK(summary[1][3] == "fully-resonant");
  CHECK(summary[1][4] == "fully-resonant (float, n <= 100)");

  const fs::path exact = scratch("squares_exact");
  const RunResult e = run_experiment(Kind::Resonances, R"({
    "dimensionless": {"eta": 0, "xi": 1},
    "thermal": {"beta_omega0": 1},
    "truncation": {"n_max": 16},
    "resonances": {"bound": 100, "mode": "exact", "eta_exact": "0", "xi_exact": "1/1"}
  })", {exact});
  REQUIRE(e.exit_code == kExitOk);
  CHECK(slurp(exact / "resonances.csv") == slurp(out / "resonances.csv"));
}

TEST_CASE("golden simulate run") {
  const fs::path out = scratch("golden");
  REQUIRE(run_experiment(Kind::Simulate, kSmall, {out}).exit_code == kExitOk);
  CHECK(slurp(out / "simulate.csv") == slurp(fs::path(MASER_TEST_DATA) / "golden_simulate.csv"));
}

TEST_CASE("reruns are byte identical and independent of the thread count") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string sweep = R"({
    "dimensionless": {"eta": 0, "xi": 0.5},
    "thermal": {"beta_omega0": 1},
    "truncation": {"n_max": 20},
    "sweep": {"eta": [0.1, 0], "xi": [0.38, 0.5], "n_max": [10, 30]}
  })";
  ::setenv("MASER_THREADS", "1", 1);
  REQUIRE(run_experiment(Kind::Sweep, sweep, {a}).exit_code == kExitOk);
  REQUIRE(run_experiment(Kind::Simulate, kSmall, {a, true}).exit_code == kExitOk);
  const std::string sweep_a = slurp(a / "sweep.csv");
  ::setenv("MASER_THREADS", "3", 1);
  REQUIRE(run_experiment(Kind::Sweep, sweep, {b}).exit_code == kExitOk);
  CHECK(slurp(b / "sweep.csv") == sweep_a);
  REQUIRE(run_experiment(Kind::Simulate, kSmall, {b, true}).exit_code == kExitOk);
  CHECK(slurp(b / "simulate.csv") == slurp(a / "simulate.csv"));
  CHECK(slurp(b / "manifest.json") == slurp(a / "manifest.json"));
  ::unsetenv("MASER_THREADS");
}

TEST_CASE("resolved config round-trips through the manifest") {
  const fs::path a = scratch("rt_a"), b = scratch("rt_b");
  REQUIRE(run_experiment(Kind::Simulate, kSmall, {a}).exit_code == kExitOk);
  const json m = json::parse(slurp(a / "manifest.json"));
  CHECK(m["config"]["simulate"]["path"] == "kraus");
  CHECK(m["config"]["truncation"]["d_max"] == 2);
  REQUIRE(run_experiment(Kind::Simulate, m["config"].dump(), {b}).exit_code == kExitOk);
  CHECK(slurp(b / "simulate.csv") == slurp(a / "simulate.csv"));
  CHECK(json::parse(slurp(b / "manifest.json"))["config"] == m["config"]);
  CHECK(resolve_config(Kind::Simulate, m["config"].dump()) == m["config"].dump(2) + "\n");
}

TEST_CASE("validation errors exit with 2") {
  const fs::path out = scratch("invalid");
  auto code = [&](const std::string& cfg, Kind k = Kind::Simulate) {
    return run_experiment(k, cfg, {out, true}).exit_code;
  };
  CHECK(code("{not json") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8}, "simulate": {"stepz": 3}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8}, "extra": {}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "physical": {"omega": 1, "omega0": 1, "lambda": 1, "tau": 1},
                "thermal": {"beta_omega0": 1}, "truncation": {"n_max": 8}})") == kExitValidation);
  CHECK(code(R"({"thermal": {"beta_omega0": 1}, "truncation": {"n_max": 8}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8, "d_max": 9}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8}, "simulate": {"leakage_budget": 0}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": "1"}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8}})") == kExitValidation);
  CHECK(code(R"({"experiment": {"kind": "spectrum"}, "dimensionless": {"eta": 0, "xi": 1},
                "thermal": {"beta_omega0": 1}, "truncation": {"n_max": 8}})") == kExitValidation);
  CHECK(code(R"({"dimensionless": {"eta": 0, "xi": 1}, "thermal": {"beta_omega0": 1},
                "truncation": {"n_max": 8}, "resonances": {"mode": "exact"}})",
             Kind::Resonances) == kExitValidation);
}

TEST_CASE("existing outputs need --overwrite") {
  const fs::path out = scratch("collide");
  REQUIRE(run_experiment(Kind::Simulate, kSmall, {out}).exit_code == kExitOk);
  const RunResult again = run_experiment(Kind::Simulate, kSmall, {out});
  CHECK(again.exit_code == kExitValidation);
  CHECK(again.message.find("--overwrite") != std::string::npos);
  CHECK(run_experiment(Kind::Simulate, kSmall, {out, true}).exit_code == kExitOk);
}

TEST_CASE("leakage budget aborts with 3") {
  const fs::path out = scratch("leak");
  const RunResult r = run_experiment(Kind::Simulate, R"({
    "dimensionless": {"eta": 0.1, "xi": 0.7},
    "thermal": {"beta_omega0": 0.2},
    "truncation": {"n_max": 8},
    "simulate": {"initial": "fock", "fock": 8, "steps": 10, "leakage_budget": 1e-6}
  })", {out});
  CHECK(r.exit_code == kExitBudget);
  const json m = json::parse(slurp(out / "manifest.json"));
  CHECK(m["status"] == "budget_exceeded");
  CHECK_FALSE(fs::exists(out / "simulate.csv"));
}

TEST_CASE("physical parameters reduce to the dimensionless triple") {
  const fs::path out = scratch("physical");
  const double two_pi = 2.0 * std::acos(-1.0);
  json cfg = {{"physical", {{"omega", 2.0}, {"omega0", 2.0 + two_pi * 0.5}, {"lambda", two_pi * 0.6}, {"tau", 1.0}}},
              {"thermal", {{"beta_omega0", 1.25}}},
              {"truncation", {{"n_max", 10}}},
              {"simulate", {{"steps", 2}}}};
  REQUIRE(run_experiment(Kind::Simulate, cfg.dump(), {out}).exit_code == kExitOk);
  const json m = json::parse(slurp(out / "manifest.json"));
  CHECK(m["model"]["eta"].get<double>() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(m["model"]["xi"].get<double>() == doctest::Approx(0.36).epsilon(1e-14));
  CHECK(m["model"]["omega_tau"].get<double>() == 2.0);
  CHECK(m["model"]["beta_omega0"].get<double>() == 1.25);
}

TEST_CASE("sweep delegates to the single-point computations") {
  const std::string base = R"("dimensionless": {"eta": 0, "xi": 0.3819660112501051},
                              "truncation": {"n_max": 40})";
  SUBCASE("singleton grid equals the spectrum run") {
    const fs::path s = scratch("sweep_single"), p = scratch("spectrum_single");
    REQUIRE(run_experiment(Kind::Sweep, "{" + base + R"(, "thermal": {"beta_omega0": 1}})", {s}).exit_code == kExitOk);
    REQUIRE(run_experiment(Kind::Spectrum, "{" + base + R"(, "thermal": {"beta_omega0": 1},
        "spectrum": {"n_max_list": [40]}})", {p}).exit_code == kExitOk);
    const auto sweep = read_csv(s / "sweep.csv");
    const auto gaps = read_csv(p / "gap_scan.csv");
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[1][4] == gaps[1][5]);
    CHECK(sweep[1][5] == gaps[1][2]);
    CHECK(sweep[1][11].empty());
  }
  SUBCASE("n_max grid reproduces the gap scan") {
    const fs::path s = scratch("sweep_n"), p = scratch("spectrum_n");
    REQUIRE(run_experiment(Kind::Sweep, "{" + base + R"(, "thermal": {"beta_omega0": 1},
        "sweep": {"n_max": [30, 5, 12]}})", {s}).exit_code == kExitOk);
    REQUIRE(run_experiment(Kind::Spectrum, "{" + base + R"(, "thermal": {"beta_omega0": 1},
        "spectrum": {"n_max_list": [5, 12, 30]}})", {p}).exit_code == kExitOk);
    const auto sweep = read_csv(s / "sweep.csv");
    const auto gaps = read_csv(p / "gap_scan.csv");
    REQUIRE(sweep.size() == 4);
    for (size_t i = 1; i < 4; ++i) {
      CHECK(sweep[i][3] == gaps[i][0]);
      CHECK(sweep[i][4] == gaps[i][5]);
    }
  }
  SUBCASE("lower spectral bound tracks the closed form") {
    const fs::path s = scratch("sweep_bw");
    REQUIRE(run_experiment(Kind::Sweep, "{" + base + R"(, "thermal": {"beta_omega0": 1},
        "sweep": {"beta_omega0": [0.5, 1, 2, 4]}})", {s}).exit_code == kExitOk);
    const auto sweep = read_csv(s / "sweep.csv");
    REQUIRE(sweep.size() == 5);
    for (size_t i = 1; i < 5; ++i) {
      const double x = std::stod(sweep[i][2]);
      const double expected = -2.0 * std::exp(-x / 2.0) / (1.0 + std::exp(-x));
      CHECK(std::stod(sweep[i][7]) == doctest::Approx(expected).epsilon(1e-14));
      CHECK(std::stod(sweep[i][6]) >= expected - 1e-10);
    }
  }
  SUBCASE("per-point failures land in the error column") {
    const fs::path s = scratch("sweep_err");
    REQUIRE(run_experiment(Kind::Sweep, "{" + base + R"(, "thermal": {"beta_omega0": 1},
        "sweep": {"xi": [-1, 0.5]}})", {s}).exit_code == kExitOk);
    const auto sweep = read_csv(s / "sweep.csv");
    REQUIRE(sweep.size() == 3);
    CHECK_FALSE(sweep[1][11].empty());
    CHECK(sweep[2][11].empty());
  }
}

TEST_CASE("metastable and witness runs") {
  const std::string base = R"("dimensionless": {"eta": 0, "xi": 0.3819660112501051},
                              "thermal": {"beta_omega0": 1}, "truncation": {"n_max": 128})";
  const fs::path m = scratch("metastable");
  REQUIRE(run_experiment(Kind::Metastable, "{" + base + "}", {m}).exit_code == kExitOk);
  const auto rows = read_csv(m / "metastable.csv");
  REQUIRE(rows.size() == 5);
  for (size_t i = 2; i < rows.size(); ++i) CHECK(std::stol(rows[i][3]) > std::stol(rows[i - 1][3]));
  for (size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][9]) <= 1e-12);
  CHECK(json::parse(slurp(m / "manifest.json"))["results"]["lifetimes_increasing"] == true);

  const fs::path w = scratch("witness");
  REQUIRE(run_experiment(Kind::Witness, "{" + base + R"(, "witness": {"epsilon": "geometric"}})", {w}).exit_code ==
          kExitOk);
  const json wm = json::parse(slurp(w / "manifest.json"));
  CHECK(wm["results"]["found"] == true);
  CHECK(wm["results"]["k"] == 1);
}

TEST_CASE("command-line entry point") {
  const fs::path dir = scratch("main");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "cfg.json");
    f << kSmall;
  }
  const std::string cfg = (dir / "cfg.json").string();
  const std::string out = (dir / "out").string();
  std::ostringstream o, e;
  const char* ok[] = {"maser", "simulate", "--config", cfg.c_str(), "--out", out.c_str()};
  CHECK(maser::cli::main(6, ok, o, e) == kExitOk);
  CHECK(fs::exists(dir / "out" / "simulate.csv"));
  CHECK(maser::cli::main(6, ok, o, e) == kExitValidation);
  const char* over[] = {"maser", "simulate", "--config", cfg.c_str(), "--out", out.c_str(), "--overwrite",
                        "--record-time"};
  CHECK(maser::cli::main(8, over, o, e) == kExitOk);
  CHECK(json::parse(slurp(dir / "out" / "manifest.json"))["wall_time_seconds"].is_number());
  const char* missing[] = {"maser", "simulate", "--out", out.c_str()};
  CHECK(maser::cli::main(4, missing, o, e) == kExitValidation);
  const char* wrong[] = {"maser", "spectrum", "--config", cfg.c_str(), "--out", out.c_str()};
  CHECK(maser::cli::main(6, wrong, o, e) == kExitValidation);
  const char* none[] = {"maser"};
  CHECK(maser::cli::main(1, none, o, e) == kExitValidation);
}
