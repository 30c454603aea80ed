#include <doctest.h>

#include "lpspde/cli.hpp"
#include "lpspde/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace lpspde;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* spectral_config = R"(# Minimal spectral run.
[equation]
name = spectral-example
gamma = 0.5

[space]
n = 3

[scheme]
dt = 1e-2
T = 1

[study]
p = 2, 4
n_paths = 256
seed = 42
functional = coefficient
coefficient = 1
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lpspde_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lpspde");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal config parses") {
  const ExperimentConfig c = parse_config(spectral_config);
  CHECK(c.equation.name == "spectral-example");
  CHECK(c.equation.gamma == 0.5);
  CHECK(c.scheme.dt == 0.01);
  CHECK(c.study.p == std::vector<double>{2.0, 4.0});
  CHECK(c.study.n_paths == 256);
  CHECK(c.study.seed == 42);
  CHECK(c.given.count("equation.gamma") == 1);
  const SpaceConfig s = resolved_space(c);
  CHECK(s.kind == SpaceKind::fourier_torus);
  CHECK(s.n.front() == 3);
}

TEST_CASE("config errors") {
  SUBCASE("dt = 0 names the key") {
    std::string text = spectral_config;
    text.replace(text.find("dt = 1e-2"), 9, "dt = 0");
    const auto e = errors_of(text);
    REQUIRE_FALSE(e.empty());
    CHECK(any_contains(e, "dt"));
  }
  SUBCASE("misspelled key gets a suggestion") {
    std::string text = spectral_config;
    text.replace(text.find("gamma = 0.5"), 11, "gama = 0.5");
    const auto e = errors_of(text);
    CHECK(any_contains(e, "gama"));
    CHECK(any_contains(e, "did you mean 'gamma'"));
  }
  SUBCASE("all errors are reported with line numbers") {
    const auto e = errors_of("[equation]\nname = burgers\nfoo = 1\n[scheme]\ndt = -1\nthis line is junk\n[bogus]\n");
    CHECK(e.size() >= 4);
    CHECK(any_contains(e, "line 3"));
    CHECK(any_contains(e, "line 6"));
    CHECK(any_contains(e, "bogus"));
  }
  SUBCASE("p below 2 and bad enums") {
    const auto e = errors_of("[equation]\nname = spectral-exampel\n[study]\np = 1.5\nfunctional = max\n");
    CHECK(any_contains(e, "did you mean 'spectral-example'"));
    CHECK(any_contains(e, "p"));
    CHECK(any_contains(e, "functional"));
  }
  CHECK(edit_distance("gama", "gamma") == 1);
  CHECK(edit_distance("", "abc") == 3);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const fs::path cfg = write_config(dir, spectral_config);
  CHECK(cli({"moments"}).code == exit_config_error);
  CHECK(cli({"bogus", "--config", cfg.string()}).code == exit_config_error);
  CHECK(cli({"moments", "--config", (dir / "missing.ini").string()}).code == exit_config_error);
  const fs::path bad = dir / "bad.ini";
  std::ofstream(bad) << "[scheme]\ndt = 0\n";
  const Result r = cli({"moments", "--config", bad.string()});
  CHECK(r.code == exit_config_error);
  CHECK(r.err.find("dt") != std::string::npos);
  CHECK(cli({"--help"}).code == exit_ok);
}

TEST_CASE("moments output is byte-identical across runs and worker counts") {
  const fs::path dir = scratch("moments");
  const fs::path cfg = write_config(dir, spectral_config);
  REQUIRE(cli({"moments", "--config", cfg.string(), "--out", (dir / "a").string()}).code == exit_ok);
  REQUIRE(cli({"moments", "--config", cfg.string(), "--out", (dir / "b").string()}).code == exit_ok);
  REQUIRE(cli({"moments", "--config", cfg.string(), "--out", (dir / "c").string(), "--workers", "8"}).code == exit_ok);
  for (const char* f : {"moments.json", "paths.csv"}) {
    CAPTURE(f);
    const std::string a = slurp(dir / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b" / f));
    CHECK(a == slurp(dir / "c" / f));
  }
  const json j = json::parse(slurp(dir / "a" / "moments.json"));
  CHECK(j["command"] == "moments");
  CHECK(j["seed"] == 42);
  CHECK(j["config"]["equation"]["gamma"] == 0.5);
  REQUIRE(j["results"].size() == 2);
  CHECK(j["results"][0]["exact"].get<double>() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  const std::string paths = slurp(dir / "a" / "paths.csv");
  CHECK(paths.rfind("path_id,sup_h,int_v_alpha,diverged\n", 0) == 0);
  CHECK(std::count(paths.begin(), paths.end(), '\n') == 257);

  // A different seed changes the numbers.
  REQUIRE(cli({"moments", "--config", cfg.string(), "--out", (dir / "d").string(), "--seed", "7"}).code == exit_ok);
  CHECK(slurp(dir / "a" / "moments.json") != slurp(dir / "d" / "moments.json"));
  CHECK(json::parse(slurp(dir / "d" / "moments.json"))["seed"] == 7);
}

TEST_CASE("check on Burgers with the declared theta passes") {
  const fs::path dir = scratch("check");
  const fs::path cfg = write_config(dir, R"([equation]
name = burgers
gamma = 1

[space]
kind = fourier-torus
n = 17
v_norm = seminorm

[study]
p = 2, 4, 8
conditions = H3, growth
theta = 1
K_c = 0
n_samples = 200
seed = 1
)");
  const Result r = cli({"check", "--config", cfg.string(), "--out", dir.string(), "--strict"});
  CHECK(r.code == exit_ok);
  const json j = json::parse(slurp(dir / "check.json"));
  CHECK(j["passed"] == true);
  CHECK(slurp(dir / "check.csv").rfind("condition,p,theta,theta_fit,K_c,worst_margin,passed\n", 0) == 0);
}

TEST_CASE("strict mode turns a failed audit into exit code 1") {
  const fs::path dir = scratch("strict");
  const fs::path cfg = write_config(dir, R"([equation]
name = spectral-example
gamma = 0.5

[space]
n = 9
v_norm = seminorm

[study]
p = 4
conditions = H3
theta = 0.1
K_c = 0
n_samples = 100
)");
  CHECK(cli({"check", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
  CHECK(json::parse(slurp(dir / "check.json"))["passed"] == false);
  CHECK(cli({"check", "--config", cfg.string(), "--out", dir.string(), "--strict"}).code == exit_audit_failure);
}

TEST_CASE("gamma sweep flips the stabilization flag once") {
  const fs::path dir = scratch("sweep");
  const fs::path cfg = write_config(dir, R"([equation]
name = spectral-example

[study]
sweep = gamma
values = 0.3, 0.5, 0.7, 0.8, 0.9
sweep_mode = oracle
K_trunc = 32
)");
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
  const json j = json::parse(slurp(dir / "sweep.json"));
  REQUIRE(j["rows"].size() == 5);
  std::vector<bool> flags;
  for (const auto& row : j["rows"]) flags.push_back(row["stabilized"].get<bool>());
  CHECK(flags == std::vector<bool>{true, true, true, false, false});
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("simulate and oracle artifacts") {
  const fs::path dir = scratch("simulate");
  std::string text = spectral_config;
  text += "\n[output]\ntrajectory = true\n";
  const fs::path cfg = write_config(dir, text);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
  const std::string traj = slurp(dir / "trajectory.csv");
  CHECK(traj.rfind("t,coeff_0,coeff_1,coeff_2\n", 0) == 0);
  CHECK(json::parse(slurp(dir / "simulate.json"))["command"] == "simulate");

  REQUIRE(cli({"oracle", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
  CHECK(fs::exists(dir / "oracle.json"));
  CHECK(slurp(dir / "oracle.csv").rfind("k,q,u0_k,moment\n", 0) == 0);
}
