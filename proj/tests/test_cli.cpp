#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "crf/scenario.hpp"

using namespace crf;

namespace {

ScenarioConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in, "test");
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_binary(const std::string& args) {
#ifdef CRF_LAB_BIN
  const int rc = std::system((std::string(CRF_LAB_BIN) + " " + args +
                              " > /dev/null 2>&1")
                                 .c_str());
  return (rc >> 8) & 0xff;
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

TEST_CASE("config parsing: values, comments, vectors") {
  ScenarioConfig cfg = parse_text(
      "# a comment\n"
      "N = 12\nfd_order = 2\nT = 0.04\ndt = 0.002  # trailing comment\n"
      "metric = conformal\namplitude = 0.25\nmode = 1 1 0\n"
      "v0 = bump\nterminal_H = bump\nt0 = 0.004\nt1 = 0.036\n"
      "h = linear\nh0 = 1\nh1 = 0.5\nk = 3.5\nconverge_sizes = 8 16 32\n");
  CHECK(cfg.N == 12);
  CHECK(cfg.fd_order == 2);
  CHECK(cfg.dt == 0.002);
  CHECK(cfg.metric == "conformal");
  CHECK(cfg.mode == std::array<int, 3>{1, 1, 0});
  CHECK(cfg.h_preset == "linear");
  CHECK(!cfg.k_auto);
  CHECK(cfg.k_const == 3.5);
  CHECK(cfg.converge_sizes == std::vector<int>{8, 16, 32});

  // window defaults resolve to fractions of T
  ScenarioConfig d = parse_text("N = 8\nT = 0.1\n");
  CHECK(d.t0 == doctest::Approx(0.02));
  CHECK(d.t1 == doctest::Approx(0.08));
}

TEST_CASE("config parsing: diagnostics carry line and field") {
  CHECK_THROWS_WITH_AS(parse_text("N = 12\nbogus_key = 1\n"),
                       doctest::Contains("line 2"), ScenarioParseError);
  CHECK_THROWS_WITH_AS(parse_text("N = 12\nbogus_key = 1\n"),
                       doctest::Contains("bogus_key"), ScenarioParseError);
  CHECK_THROWS_WITH_AS(parse_text("N = twelve\n"),
                       doctest::Contains("field 'N'"), ScenarioParseError);
  CHECK_THROWS_WITH_AS(parse_text("just some words\n"),
                       doctest::Contains("key = value"), ScenarioParseError);
  // window inversion names the fields
  CHECK_THROWS_WITH_AS(parse_text("T = 0.1\nt0 = 0.08\nt1 = 0.02\n"),
                       doctest::Contains("t0"), ScenarioParseError);
  CHECK_THROWS_WITH_AS(parse_text("T = 0.1\nt0 = 0.02\nt1 = 0.5\n"),
                       doctest::Contains("t1 <= T"), ScenarioParseError);
  CHECK_THROWS_AS(parse_text("metric = moebius\n"), ScenarioParseError);
}

TEST_CASE("bundled presets all resolve and validate") {
  for (const auto& [name, text] : scenario_presets()) {
    ScenarioConfig cfg = scenario_preset(name);
    CHECK(cfg.name == name);
    CHECK(cfg.t0 > 0);
    CHECK(cfg.t0 < cfg.t1);
    CHECK(cfg.t1 <= cfg.T);
  }
  CHECK_THROWS_AS(scenario_preset("no-such-preset"), ScenarioParseError);
}

TEST_CASE("17 significant digit formatting and atomic writes") {
  CHECK(format17(1.0 / 3.0) == "0.33333333333333331");
  CHECK(format17(0.0) == "0");
  CHECK(format17(-2.5) == "-2.5");

  std::filesystem::path dir = "cli_scratch";
  std::filesystem::create_directories(dir);
  atomic_write(dir / "x.txt", "payload\n");
  CHECK(read_file(dir / "x.txt") == "payload\n");
  CHECK(!std::filesystem::exists(dir / "x.txt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("flat-rigidity run: verdict, checks, CSV shape, determinism") {
  ScenarioConfig cfg = scenario_preset("flat-rigidity");
  ScenarioResult a = run_scenario(cfg);
  CHECK(a.verdict == "constant");
  for (const CheckRow& c : a.checks) {
    INFO(c.name, " residual ", c.residual, " tol ", c.tolerance);
    CHECK(c.pass);
  }
  CHECK(a.exit_code() == 0);
  REQUIRE(!a.series.empty());

  std::string csv = timeseries_csv(a);
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header ==
        "t,Rmin,Rmax,pmin,pmax,p_bar,I,E,Q,dQdt,lambda,corrected_eigen,"
        "k_used,eigen_residual,cauchy_schwarz,mass_residual");
  // every data row has 16 comma-separated fields
  std::istringstream rows(csv.substr(csv.find('\n') + 1));
  std::string row;
  std::size_t nrows = 0;
  while (std::getline(rows, row)) {
    ++nrows;
    CHECK(std::count(row.begin(), row.end(), ',') == 15);
  }
  CHECK(nrows == a.series.size());

  // byte-identical artifacts on a second run
  ScenarioResult b = run_scenario(cfg);
  CHECK(timeseries_csv(b) == csv);
  CHECK(report_json(b).dump(2) == report_json(a).dump(2));
}

TEST_CASE("flat-backward run: negative weight path") {
  ScenarioResult r = run_scenario(scenario_preset("flat-backward"));
  bool saw_backward = false, saw_forced_skip = false;
  for (const CheckRow& c : r.checks) {
    INFO(c.name, " residual ", c.residual);
    CHECK(c.pass);
    if (c.name == "backward-lower-bound" && !c.skipped) saw_backward = true;
    if (c.name == "forced-inequalities" && c.skipped) saw_forced_skip = true;
  }
  CHECK(saw_backward);
  CHECK(saw_forced_skip);
  CHECK(r.verdict == "constant");  // flat closed form, Q < 0 constant
}

TEST_CASE("audit and eigen subcommand pipelines on flat-uniform") {
  ScenarioConfig cfg = scenario_preset("flat-uniform");
  ScenarioResult audit = audit_scenario(cfg);
  CHECK(audit.all_pass());
  CHECK(audit.verdict == "pass");

  ScenarioResult eig = eigen_scenario(cfg);
  CHECK(eig.all_pass());
  bool saw_symbol = false;
  for (const CheckRow& c : eig.checks)
    if (c.name == "eigen-symbol") {
      saw_symbol = true;
      CHECK(c.residual <= 1e-10);
    }
  CHECK(saw_symbol);
  CHECK(eig.lambda > 0.9);
  CHECK(eig.lambda < 1.0);
}

TEST_CASE("converge subcommand: slope table on the curvature oracle") {
  ScenarioConfig cfg = scenario_preset("conformal-ricci-oracle");
  ScenarioResult r = converge_scenario(cfg);
  bool saw_oracle = false;
  for (const SlopeRow& s : r.slopes) {
    INFO(s.name, " slope ", s.slope);
    CHECK(s.pass);
    if (s.name == "ricci-oracle") saw_oracle = true;
  }
  CHECK(saw_oracle);
  CHECK(r.all_pass());
  std::string csv = slopes_csv(r);
  CHECK(csv.rfind("name,N,residual,slope,pass\n", 0) == 0);
}

TEST_CASE("report json: schema, config echo, no silent skips") {
  ScenarioResult r = run_scenario(scenario_preset("flat-backward"));
  nlohmann::ordered_json j = report_json(r);
  CHECK(j["schema"] == 1);
  CHECK(j["config"]["N"] == 16);
  CHECK(j["config"]["k"] == -4.0);
  CHECK(j["pass"] == true);
  bool skip_visible = false;
  for (const auto& c : j["checks"])
    if (c["skipped"] == true) {
      skip_visible = true;
      CHECK(c.contains("note"));
    }
  CHECK(skip_visible);
}

#ifdef CRF_LAB_BIN
TEST_CASE("binary: exit codes and artifact files") {
  std::filesystem::path dir = "cli_bin_out";
  std::filesystem::remove_all(dir);
  CHECK(run_binary("run --preset flat-rigidity -o " + dir.string()) == 0);
  CHECK(std::filesystem::exists(dir / "timeseries.csv"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(!std::filesystem::exists(dir / "plots.svg"));  // plots off by default

  CHECK(run_binary("run --preset flat-rigidity --plots -o " + dir.string()) ==
        0);
  CHECK(std::filesystem::exists(dir / "plots.svg"));
  std::string svg = read_file(dir / "plots.svg");
  CHECK(svg.find("polyline") != std::string::npos);

  // configuration errors exit 2
  CHECK(run_binary("run --preset no-such-preset") == 2);
  CHECK(run_binary("run /no/such/config.cfg") == 2);
  std::filesystem::path bad = dir / "bad.cfg";
  atomic_write(bad, "T = 0.1\nt0 = 0.09\nt1 = 0.01\n");
  CHECK(run_binary("run " + bad.string()) == 2);

  CHECK(run_binary("eigen --preset flat-uniform -o " + dir.string()) == 0);
  CHECK(run_binary("audit --preset flat-uniform -o " + dir.string()) == 0);
  std::filesystem::remove_all(dir);
}
#endif
