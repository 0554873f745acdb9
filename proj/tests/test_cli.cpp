#include "reflectsim/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace reflectsim;
namespace fs = std::filesystem;

namespace {

const char* kSmallWz = R"(experiment = wz_convergence
seed = 3

[domain]
kind = half_space
params = normal=1; offset=0

[coefficients]
sigma = sin
params = a=0.5; c=0.25

[parameters]
x0 = 1
levels = 3,4,5
paths = 40
)";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("reflectsim_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    std::ofstream(path / name) << content;
    return (path / name).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error_key(const std::string& text) {
  try {
    cli::prepare(cli::parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.key();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults are materialized in the resolved configuration") {
  const auto run = cli::prepare(cli::parse_config_text(kSmallWz));
  const auto& c = run.config;
  CHECK(c.experiment == "wz_convergence");
  CHECK(c.seed == 3);
  CHECK(*c.find("parameters", "substeps") == "4");
  CHECK(*c.find("parameters", "cell_scheme") == "euler");
  CHECK(*c.find("parameters", "horizon") == "1");
  CHECK(*c.find("domain", "r0") == "1e+06");
  CHECK(*c.find("coefficients", "drift") == "zero");
  const auto p = c.parameters();
  CHECK(p["sections"]["parameters"]["levels"] == "3,4,5");
  CHECK_FALSE(p.contains("workers"));
  CHECK_FALSE(p.contains("output"));
}

TEST_CASE("the echoed configuration resolves to itself") {
  const auto first = cli::prepare(cli::parse_config_text(kSmallWz)).config;
  std::ostringstream echo;
  first.write_ini(echo);
  const auto second = cli::prepare(cli::parse_config_text(echo.str())).config;
  std::ostringstream again;
  second.write_ini(again);
  CHECK(echo.str() == again.str());
}

TEST_CASE("strict parsing names the offending key") {
  CHECK(config_error_key(std::string(kSmallWz) + "bogus = 1\n") == "parameters.bogus");
  CHECK(config_error_key("experiment = approx_continuity\n[parameters]\ndeltas = -1\n") == "parameters.deltas");
  CHECK(config_error_key("experiment = wz_convergence\n[parameters]\nlevels = 5,4\n") == "parameters.levels");
  CHECK(config_error_key("experiment = wz_convergence\n[parameters]\nx0 = -1\n") == "parameters.x0");
  CHECK(config_error_key("experiment = wz_convergence\n[weird]\na = 1\n") == "weird");
  CHECK(config_error_key("experiment = nope\n") == "experiment");
  CHECK(config_error_key("seed = 1\n") == "experiment");
  CHECK(config_error_key("experiment = smallball_and_levy\n[domain]\nkind = ball\n") == "domain");
  CHECK(config_error_key("experiment = wz_convergence\n[domain]\nkind = ball\nparams = center=0,0; radius=-1\n") ==
        "domain.params");
  CHECK(config_error_key("experiment = wz_convergence\n[coefficients]\nsigma = cubic\n") == "coefficients.sigma");
  CHECK(config_error_key("experiment = sample_path\n[parameters]\ncontrol = sine:axis=3\n") == "parameters.control");
}

TEST_CASE("a misspelled key suggests the known one") {
  try {
    cli::prepare(cli::parse_config_text("experiment = approx_continuity\n[parameters]\ndelta = -1\n"));
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("deltas") != std::string::npos);
  }
}

TEST_CASE("overrides and options take precedence") {
  auto raw = cli::parse_config_text(kSmallWz);
  cli::apply_override(raw, "parameters.paths=10");
  cli::apply_override(raw, "seed=9");
  CHECK_THROWS_AS(cli::apply_override(raw, "no-equals-sign"), ConfigError);
  cli::Options o;
  o.seed = 11;
  o.workers = 2;
  const auto c = cli::prepare(raw, o).config;
  CHECK(*c.find("parameters", "paths") == "10");
  CHECK(c.seed == 11);
  CHECK(c.workers == 2);
  CHECK(cli::prepare(raw).config.seed == 9);
}

TEST_CASE("worker count from the environment") {
  ::setenv("REFLECTSIM_WORKERS", "3", 1);
  CHECK(cli::prepare(cli::parse_config_text(kSmallWz)).config.workers == 3);
  CHECK(cli::prepare(cli::parse_config_text(std::string("workers = 2\n") + kSmallWz)).config.workers == 2);
  ::setenv("REFLECTSIM_WORKERS", "zero", 1);
  CHECK_THROWS_AS(cli::prepare(cli::parse_config_text(kSmallWz)), ConfigError);
  ::unsetenv("REFLECTSIM_WORKERS");
}

TEST_CASE("dry run validates without writing") {
  TempDir dir;
  const auto cfg = dir.file("a.ini", kSmallWz);
  cli::Options o;
  o.dry_run = true;
  o.output = (dir.path / "out").string();
  std::ostringstream out, err;
  CHECK(cli::run(cfg, {}, o, out, err) == cli::exit_ok);
  CHECK_FALSE(fs::exists(dir.path / "out"));
  CHECK(out.str().find("substeps = 4") != std::string::npos);
  CHECK(cli::run(cfg, {"parameters.deltas=-1"}, o, out, err) == cli::exit_config);
  CHECK(err.str().find("deltas") != std::string::npos);
  CHECK(cli::run((dir.path / "missing.ini").string(), {}, o, out, err) == cli::exit_config);
}

TEST_CASE("a run writes the report, the table and the echoed configuration") {
  TempDir dir;
  const auto cfg = dir.file("a.ini", kSmallWz);
  cli::Options o;
  o.output = (dir.path / "out").string();
  std::ostringstream out, err;
  CHECK(cli::run(cfg, {}, o, out, err) == cli::exit_ok);
  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "report.json"));
  CHECK(report["name"] == "wz_convergence");
  CHECK(report["verdict"] == "pass");
  CHECK(report["parameters"]["seed"] == 3);
  CHECK(report["parameters"]["sections"]["parameters"]["paths"] == "40");
  const auto csv = slurp(dir.path / "out" / "levels.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir.path / "out" / "resolved_config.ini"));
}

TEST_CASE("report.json is identical across worker counts") {
  TempDir dir;
  const auto cfg = dir.file("a.ini", kSmallWz);
  std::ostringstream out, err;
  std::string bytes[2];
  for (int k = 0; k < 2; ++k) {
    cli::Options o;
    o.workers = k == 0 ? 1 : 8;
    o.output = (dir.path / ("w" + std::to_string(k))).string();
    REQUIRE(cli::run(cfg, {}, o, out, err) == cli::exit_ok);
    bytes[k] = slurp(fs::path(*o.output) / "report.json");
  }
  CHECK(bytes[0] == bytes[1]);
}

TEST_CASE("error classes map to distinct exit codes") {
  TempDir dir;
  std::ostringstream out, err;
  cli::Options o;
  o.output = (dir.path / "out").string();
  const auto tube = dir.file("t.ini", R"(experiment = approx_continuity
[coefficients]
params = diag=0.5
[parameters]
x0 = 1
deltas = 0.1
level = 6
max_attempts = 1000
pilot_attempts = 1000
)");
  CHECK(cli::run(tube, {}, o, out, err) == cli::exit_tube);
  const auto grid = dir.file("g.ini", R"(experiment = moment_scaling
[parameters]
windows = 0:0.3,0:0.25
paths = 10
level = 4
)");
  CHECK(cli::run(grid, {}, o, out, err) == cli::exit_numeric);
  const auto failing = dir.file("f.ini", R"(experiment = submartingale_test
[domain]
kind = ball
[parameters]
x0 = 0.5,0
u = neg_norm_squared
paths = 500
level = 5
)");
  CHECK(cli::run(failing, {}, o, out, err) == cli::exit_failed);
}

TEST_CASE("auxiliary experiments write their artifacts") {
  TempDir dir;
  std::ostringstream out, err;
  cli::Options o;
  o.output = (dir.path / "mp").string();
  const auto mp = dir.file("m.ini", "experiment = max_principle_check\n[domain]\nkind = ball\n[parameters]\ncontrols = 20\n");
  CHECK(cli::run(mp, {}, o, out, err) == cli::exit_ok);
  CHECK(fs::exists(dir.path / "mp" / "cloud.csv"));
  o.output = (dir.path / "sp").string();
  const auto sp = dir.file("s.ini", "experiment = sample_path\n[domain]\nkind = notched_disc\n[parameters]\nx0 = 0.5,0.5\n");
  CHECK(cli::run(sp, {}, o, out, err) == cli::exit_ok);
  CHECK(fs::exists(dir.path / "sp" / "trajectory.csv"));
  o.output = (dir.path / "cc").string();
  const auto cc = dir.file("c.ini", "experiment = check_conditions\n[domain]\nkind = axis_box\n");
  CHECK(cli::run(cc, {}, o, out, err) == cli::exit_ok);
}

TEST_CASE("catalog listing") {
  const auto& cat = cli::catalog();
  CHECK(cat.size() >= 9);
  for (const auto& e : cat) {
    CHECK_FALSE(e.anchor.empty());
    CHECK_FALSE(e.keys.empty());
  }
  std::ostringstream text, js;
  cli::list_experiments(text, false);
  cli::list_experiments(js, true);
  const auto listing = text.str();
  CHECK(std::count(listing.begin(), listing.end(), '\n') == static_cast<long>(cat.size()));
  const auto parsed = nlohmann::json::parse(js.str());
  REQUIRE(parsed.size() == cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) {
    CHECK(parsed[i]["name"] == cat[i].name);
    CHECK(parsed[i]["anchor"] == cat[i].anchor);
    CHECK(listing.find(cat[i].name + "  [" + cat[i].anchor + "]") != std::string::npos);
  }
}

TEST_CASE("named test functions") {
  Vector x(2);
  x << 3, 4;
  CHECK(cli::scalar_function("norm_squared")(x) == 25.0);
  CHECK(cli::scalar_function("neg_norm_squared")(x) == -25.0);
  CHECK(cli::scalar_function("constant")(x) == 1.0);
  CHECK_THROWS_AS(cli::scalar_function("cubic"), ConfigError);
}
