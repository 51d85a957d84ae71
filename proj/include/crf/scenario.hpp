#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "crf/auditor.hpp"
#include "crf/frequency.hpp"

// Scenario configuration, bundled presets, end-to-end pipelines, and
// artifact serialization (CSV time series, JSON report, SVG plots).
namespace crf {

struct ScenarioParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Human-readable key = value configuration; see README for the schema.
struct ScenarioConfig {
  std::string name = "custom";

  // grid
  int N = 16;
  int fd_order = 4;

  // flow
  double T = 0.05;
  double dt = 0.002;  // <= 0: stability policy
  double safety = 0.25;
  bool general_mode = false;
  double R0 = -6.0;

  // initial metric
  std::string metric = "flat";
  double amplitude = 0.1;
  std::array<int, 3> mode = {1, 0, 0};
  std::array<double, 3> scales = {0.1, 0.0, 0.0};
  std::uint64_t seed = 12345;
  int max_mode = 2;

  // heat pass
  std::string v0 = "fourier";  // fourier | bump | random
  std::array<int, 3> v0_mode = {1, 0, 0};
  double forcing_a = 1.0;
  double forcing_b = 0.0;

  // conjugate pass + observation window
  std::string terminal_H = "uniform";  // uniform | bump
  double t0 = -1.0;                    // < 0: resolved to 0.2 T / 0.8 T
  double t1 = -1.0;

  // time weight
  std::string h_preset = "constant";  // constant | linear | exponential
  double h0 = 1.0;
  double h1 = 0.0;
  bool k_auto = true;
  double k_const = 0.0;

  // diagnostics
  int eigen_stride = 1;
  int hypothesis_stride = 1;
  double audit_tolerance = 1e-2;   // evolution/measure identities, desk scale
  double deriv_tolerance = 1e-2;   // mass-derivative identity
  std::vector<int> converge_sizes = {12, 24};

  std::string output = "out";

  void resolve_window() {
    if (t0 < 0) t0 = 0.2 * T;
    if (t1 < 0) t1 = 0.8 * T;
  }

  void validate() const {
    if (N < 4) throw ScenarioParseError("field 'N': need N >= 4");
    if (fd_order != 2 && fd_order != 4)
      throw ScenarioParseError("field 'fd_order': must be 2 or 4");
    if (T <= 0) throw ScenarioParseError("field 'T': must be > 0");
    if (!(t0 > 0))
      throw ScenarioParseError("field 't0': need 0 < t0");
    if (!(t0 < t1))
      throw ScenarioParseError("field 't0'/'t1': need t0 < t1");
    if (!(t1 <= T))
      throw ScenarioParseError("field 't1': need t1 <= T");
    if (metric != "flat" && metric != "conformal" && metric != "anisotropic" &&
        metric != "random-smooth")
      throw ScenarioParseError("field 'metric': unknown preset '" + metric +
                               "'");
    if (v0 != "fourier" && v0 != "bump" && v0 != "random")
      throw ScenarioParseError("field 'v0': unknown preset '" + v0 + "'");
    if (terminal_H != "uniform" && terminal_H != "bump")
      throw ScenarioParseError("field 'terminal_H': unknown preset '" +
                               terminal_H + "'");
    if (h_preset != "constant" && h_preset != "linear" &&
        h_preset != "exponential")
      throw ScenarioParseError("field 'h': unknown preset '" + h_preset + "'");
    if (std::fabs(forcing_a) > 1.0 || std::fabs(forcing_b) > 1.0)
      throw ScenarioParseError(
          "field 'forcing_a'/'forcing_b': need |a| <= 1, |b| <= 1");
    if (eigen_stride < 1)
      throw ScenarioParseError("field 'eigen_stride': must be >= 1");
    if (converge_sizes.size() < 2)
      throw ScenarioParseError(
          "field 'converge_sizes': need at least two sizes");
  }

  FlowConfig flow() const {
    FlowConfig f;
    f.T = T;
    f.dt = dt;
    f.safety = safety;
    f.general_mode = general_mode;
    f.R0 = R0;
    return f;
  }

  TimeWeight weights() const {
    TimeWeight tw;
    if (h_preset == "constant") tw.hpreset = TimeWeight::HPreset::constant;
    if (h_preset == "linear") tw.hpreset = TimeWeight::HPreset::linear;
    if (h_preset == "exponential")
      tw.hpreset = TimeWeight::HPreset::exponential;
    tw.h0 = h0;
    tw.h1 = h1;
    tw.k_auto = k_auto;
    tw.k_const = k_const;
    tw.t0 = t0;
    tw.t1 = t1;
    return tw;
  }

  MetricField build_metric(const Grid& g) const {
    MetricPresetParams p;
    p.amplitude = amplitude;
    p.mode = mode;
    p.scales = scales;
    p.seed = seed;
    p.max_mode = max_mode;
    return metric_from_preset(metric, p, g);
  }

  ScalarField build_v0(const Grid& g) const {
    if (v0 == "fourier") {
      auto k = v0_mode;
      return ScalarField::sample(g, [k](double x, double y, double z) {
        return std::sin(k[0] * x + k[1] * y + k[2] * z);
      });
    }
    if (v0 == "bump")
      return ScalarField::sample(g, [](double x, double y, double z) {
        return std::exp(std::cos(x) + std::cos(y) + std::cos(z) - 3.0);
      });
    // random: seeded low-mode trigonometric polynomial
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::array<double, 6> c;
    for (double& x : c) x = unif(rng);
    return ScalarField::sample(g, [c](double x, double y, double z) {
      return c[0] * std::sin(x) + c[1] * std::cos(x) + c[2] * std::sin(y) +
             c[3] * std::cos(y + z) + c[4] * std::sin(x + z) +
             c[5] * std::cos(z);
    });
  }

  ScalarField build_terminal_H(const Grid& g) const {
    if (terminal_H == "uniform") return ScalarField(g, 1.0);
    return ScalarField::sample(g, [](double x, double y, double z) {
      return 1.0 + 0.5 * std::exp(std::cos(x) + std::cos(y) + std::cos(z) -
                                  3.0);
    });
  }
};

namespace detail {

inline std::array<int, 3> parse_int3(const std::string& s,
                                     const std::string& key) {
  std::istringstream in(s);
  std::array<int, 3> out{};
  if (!(in >> out[0] >> out[1] >> out[2]))
    throw ScenarioParseError("field '" + key + "': expected three integers");
  return out;
}

inline std::array<double, 3> parse_double3(const std::string& s,
                                           const std::string& key) {
  std::istringstream in(s);
  std::array<double, 3> out{};
  if (!(in >> out[0] >> out[1] >> out[2]))
    throw ScenarioParseError("field '" + key + "': expected three numbers");
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <class T>
inline T parse_number(const std::string& s, const std::string& key) {
  std::istringstream in(s);
  T out;
  std::string rest;
  if (!(in >> out) || (in >> rest && !rest.empty()))
    throw ScenarioParseError("field '" + key + "': invalid number '" + s +
                             "'");
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ScenarioParseError("field '" + key + "': expected true/false");
}

}  // namespace detail

// Parses the key = value format; '#' starts a comment.  Errors carry the
// line number and the offending field.
inline ScenarioConfig parse_scenario(std::istream& in,
                                     const std::string& name = "custom") {
  ScenarioConfig cfg;
  cfg.name = name;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ScenarioParseError("line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "N") cfg.N = detail::parse_number<int>(val, key);
      else if (key == "fd_order")
        cfg.fd_order = detail::parse_number<int>(val, key);
      else if (key == "T") cfg.T = detail::parse_number<double>(val, key);
      else if (key == "dt") cfg.dt = detail::parse_number<double>(val, key);
      else if (key == "safety")
        cfg.safety = detail::parse_number<double>(val, key);
      else if (key == "general_mode")
        cfg.general_mode = detail::parse_bool(val, key);
      else if (key == "R0") cfg.R0 = detail::parse_number<double>(val, key);
      else if (key == "metric") cfg.metric = val;
      else if (key == "amplitude")
        cfg.amplitude = detail::parse_number<double>(val, key);
      else if (key == "mode") cfg.mode = detail::parse_int3(val, key);
      else if (key == "scales") cfg.scales = detail::parse_double3(val, key);
      else if (key == "seed")
        cfg.seed = detail::parse_number<std::uint64_t>(val, key);
      else if (key == "max_mode")
        cfg.max_mode = detail::parse_number<int>(val, key);
      else if (key == "v0") cfg.v0 = val;
      else if (key == "v0_mode") cfg.v0_mode = detail::parse_int3(val, key);
      else if (key == "forcing_a")
        cfg.forcing_a = detail::parse_number<double>(val, key);
      else if (key == "forcing_b")
        cfg.forcing_b = detail::parse_number<double>(val, key);
      else if (key == "terminal_H") cfg.terminal_H = val;
      else if (key == "t0") cfg.t0 = detail::parse_number<double>(val, key);
      else if (key == "t1") cfg.t1 = detail::parse_number<double>(val, key);
      else if (key == "h") cfg.h_preset = val;
      else if (key == "h0") cfg.h0 = detail::parse_number<double>(val, key);
      else if (key == "h1") cfg.h1 = detail::parse_number<double>(val, key);
      else if (key == "k") {
        if (val == "auto") {
          cfg.k_auto = true;
        } else {
          cfg.k_auto = false;
          cfg.k_const = detail::parse_number<double>(val, key);
        }
      } else if (key == "eigen_stride")
        cfg.eigen_stride = detail::parse_number<int>(val, key);
      else if (key == "hypothesis_stride")
        cfg.hypothesis_stride = detail::parse_number<int>(val, key);
      else if (key == "audit_tolerance")
        cfg.audit_tolerance = detail::parse_number<double>(val, key);
      else if (key == "deriv_tolerance")
        cfg.deriv_tolerance = detail::parse_number<double>(val, key);
      else if (key == "converge_sizes") {
        std::istringstream vin(val);
        cfg.converge_sizes.clear();
        int n;
        while (vin >> n) cfg.converge_sizes.push_back(n);
        if (cfg.converge_sizes.empty())
          throw ScenarioParseError(
              "field 'converge_sizes': expected integers");
      } else if (key == "output")
        cfg.output = val;
      else
        throw ScenarioParseError("unknown field '" + key + "'");
    } catch (const ScenarioParseError& e) {
      throw ScenarioParseError("line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  cfg.resolve_window();
  cfg.validate();
  return cfg;
}

inline ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ScenarioParseError("cannot open config file '" + path + "'");
  std::filesystem::path p(path);
  return parse_scenario(in, p.stem().string());
}

// ---------------------------------------------------------------------------
// Bundled presets
// ---------------------------------------------------------------------------

inline const std::map<std::string, std::string>& scenario_presets() {
  static const std::map<std::string, std::string> presets = {
      {"flat-rigidity",
       "# flat metric, single-mode data: Q is exactly constant\n"
       "N = 16\nT = 0.05\ndt = 0.002\nmetric = flat\n"
       "v0 = fourier\nv0_mode = 1 0 0\nterminal_H = uniform\n"
       "t0 = 0.002\nt1 = 0.048\nh = constant\nh0 = 1\nk = 4\n"
       "eigen_stride = 4\n"},
      {"perturbed-monotone",
       "# random smooth metric, automatic saturating k\n"
       "N = 12\nT = 0.05\ndt = 0.004\nmetric = random-smooth\n"
       "amplitude = 0.15\nseed = 41\nv0 = random\nterminal_H = bump\n"
       "t0 = 0.004\nt1 = 0.044\nh = constant\nh0 = 1\nk = auto\n"
       "eigen_stride = 2\naudit_tolerance = 5e-2\nderiv_tolerance = 5e-2\n"},
      {"flat-backward",
       "# negative weight: backward-uniqueness lower bound on I\n"
       "N = 16\nT = 0.05\ndt = 0.001\nmetric = flat\n"
       "v0 = fourier\nv0_mode = 1 0 0\nterminal_H = uniform\n"
       "t0 = 0.002\nt1 = 0.048\nh = constant\nh0 = -1\nk = -4\n"
       "eigen_stride = 8\n"},
      {"perturbed-forced",
       "# forced equation within the admissible envelope\n"
       "N = 12\nT = 0.05\ndt = 0.004\nmetric = random-smooth\n"
       "amplitude = 0.15\nseed = 41\nv0 = random\nterminal_H = bump\n"
       "forcing_a = 0.5\nforcing_b = 0.3\n"
       "t0 = 0.004\nt1 = 0.044\nh = constant\nh0 = 1\nk = auto\n"
       "eigen_stride = 2\naudit_tolerance = 5e-2\n"},
      {"flat-uniform",
       "# static flat torus with uniform density: identity audits\n"
       "N = 16\nT = 0.02\ndt = 0.002\nmetric = flat\n"
       "v0 = fourier\nv0_mode = 1 0 0\nterminal_H = uniform\n"
       "t0 = 0.002\nt1 = 0.018\nh = constant\nh0 = 1\nk = 4\n"
       "eigen_stride = 4\n"},
      {"conformal-ricci-oracle",
       "# conformal metric with a closed-form curvature oracle\n"
       "N = 16\nT = 0.02\ndt = 0.002\nmetric = conformal\n"
       "amplitude = 0.2\nmode = 1 0 0\nv0 = fourier\nv0_mode = 0 1 0\n"
       "terminal_H = uniform\nt0 = 0.002\nt1 = 0.018\n"
       "h = constant\nh0 = 1\nk = auto\nconverge_sizes = 12 24\n"
       "eigen_stride = 4\n"},
  };
  return presets;
}

inline ScenarioConfig scenario_preset(const std::string& name) {
  auto it = scenario_presets().find(name);
  if (it == scenario_presets().end())
    throw ScenarioParseError("unknown preset '" + name + "'");
  std::istringstream in(it->second);
  return parse_scenario(in, name);
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct CheckRow {
  std::string name;
  double residual = 0;
  double tolerance = 0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

inline CheckRow check_row(const std::string& name, double residual,
                          double tolerance, const std::string& note = "") {
  return {name, residual, tolerance, residual <= tolerance, false, note};
}

inline CheckRow skipped_row(const std::string& name,
                            const std::string& reason) {
  return {name, 0.0, 0.0, true, true, reason};
}

// One CSV row per window sample.
struct SeriesRow {
  double t, Rmin, Rmax, pmin, pmax, p_bar;
  double I, E, Q, dQdt, lambda, corrected_eigen, k_used;
  double eigen_residual, cauchy_schwarz, mass_residual;
};

struct ScenarioResult {
  ScenarioConfig cfg;
  std::string command = "run";
  std::vector<CheckRow> checks;
  std::vector<SeriesRow> series;
  std::vector<SlopeRow> slopes;
  std::string verdict;
  double lambda = 0;  // eigen subcommand
  double eigen_residual = 0;
  int eigen_iterations = 0;

  bool all_pass() const {
    for (const CheckRow& c : checks)
      if (!c.pass) return false;
    return true;
  }
  int exit_code() const { return all_pass() ? 0 : 1; }
};

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

// Full pipeline: flow -> conjugate -> (forced) heat -> frequency, eigenvalue
// comparison, bound suites, and flow-coupled audits.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  ScenarioResult out;
  out.cfg = cfg;
  out.command = "run";
  Grid grid(cfg.N, cfg.fd_order);

  FlowHistory hist = evolve_flow(cfg.build_metric(grid), cfg.flow());
  solve_conjugate_heat(hist, cfg.build_terminal_H(grid));
  HeatForcing forcing;
  forcing.a = cfg.forcing_a;
  forcing.b = cfg.forcing_b;
  forcing.active = cfg.forcing_a != 1.0 || cfg.forcing_b != 0.0;
  solve_heat_forced(hist, cfg.build_v0(grid), forcing);

  TimeWeight tw = cfg.weights();
  FrequencyReport rep = compute_frequency(hist, tw, cfg.hypothesis_stride);
  EigenMonotonicity eig =
      eigen_monotonicity_check(hist, tw, rep, cfg.eigen_stride);

  // time series rows over the window
  const std::size_t ns = rep.t.size();
  out.series.resize(ns);
  std::size_t eig_cursor = 0;
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t i = rep.idx[s];
    SeriesRow& row = out.series[s];
    MetricField m = hist.metric_at(i);
    ScalarField R = scalar_curvature(m);
    row.t = rep.t[s];
    row.Rmin = R.min_value();
    row.Rmax = R.max_value();
    row.pmin = hist.p[i].min_value();
    row.pmax = hist.p[i].max_value();
    row.p_bar = hist.p_bar[i];
    row.I = rep.I[s];
    row.E = rep.E[s];
    row.Q = rep.Q[s];
    row.dQdt = rep.dQdt[s];
    // eigenvalue samples follow eigen_stride; rows in between carry the
    // most recent sample
    if (eig_cursor + 1 < eig.t.size() && eig.t[eig_cursor + 1] <= rep.t[s])
      ++eig_cursor;
    row.lambda = eig.lambda[eig_cursor];
    row.corrected_eigen = eig.corrected[eig_cursor];
    row.k_used = rep.k_used[s];
    row.eigen_residual = rep.eigen_residual[s];
    row.cauchy_schwarz = rep.cauchy_schwarz[s];
    row.mass_residual = std::fabs(hist.dV_at(i).total() - 1.0);
  }

  // checks
  out.verdict = rep.verdict;
  const bool mono_ok =
      rep.verdict == "constant" || rep.verdict == "nonincreasing" ||
      rep.verdict == "strictly decreasing" || rep.verdict == "nondecreasing";
  const double sign = tw.h(tw.t0) > 0 ? 1.0 : -1.0;
  double worst_d = 0;
  for (std::size_t s = 1; s + 1 < ns; ++s)
    worst_d = std::max(worst_d, sign * rep.dQdt[s]);
  {
    CheckRow c = check_row("frequency-monotonicity", worst_d,
                           rep.epsilon_mono, "verdict: " + rep.verdict);
    c.pass = mono_ok;
    out.checks.push_back(c);
  }

  double worst_cs = 0;
  for (double v : rep.cauchy_schwarz) worst_cs = std::max(worst_cs, -v);
  out.checks.push_back(check_row("cauchy-schwarz", worst_cs, 1e-12));

  double worst_mass = std::fabs(hist.conjugate_mass_drift);
  for (std::size_t i = 0; i < hist.steps(); ++i)
    worst_mass = std::max(worst_mass, std::fabs(hist.dV_at(i).total() - 1.0));
  out.checks.push_back(check_row("conjugate-mass", worst_mass, 1e-8));

  out.checks.push_back(check_row("eigen-comparison", eig.max_excess, 1e-4,
                                 eig.degenerate_warned
                                     ? "degenerate cluster encountered"
                                     : ""));

  // the mass-derivative and pointwise evolution identities presuppose the
  // unforced heat equation; under genuine forcing they become inequalities
  // and are reported as skipped rather than silently dropped
  if (forcing.active) {
    out.checks.push_back(skipped_row("mass-derivative",
                                     "requires the unforced heat equation"));
    out.checks.push_back(skipped_row("evolution-gradient",
                                     "requires the unforced heat equation"));
    out.checks.push_back(skipped_row("evolution-heat",
                                     "requires the unforced heat equation"));
  } else {
    std::vector<double> dres = check_I_derivative(hist, tw, rep);
    double worst_deriv = 0;
    for (double r : dres) worst_deriv = std::max(worst_deriv, r);
    out.checks.push_back(
        check_row("mass-derivative", worst_deriv, cfg.deriv_tolerance));
    auto evo = check_evolution_identities(hist, cfg.audit_tolerance);
    for (const AuditResult& a : evo)
      out.checks.push_back(
          check_row(a.name, a.residual, a.tolerance, a.note));
  }
  for (const AuditResult& a :
       check_measure_and_pressure(hist, cfg.audit_tolerance))
    out.checks.push_back(check_row(a.name, a.residual, a.tolerance, a.note));

  if (tw.h(tw.t0) < 0) {
    BackwardBound bb =
        backward_uniqueness_bound(hist, tw, rep, rep.t[0], rep.t[ns - 1]);
    CheckRow c = check_row("backward-lower-bound",
                           std::max(0.0, -bb.residual), 1e-6,
                           "signed residual " + std::to_string(bb.residual));
    if (bb.vacuous) c = skipped_row("backward-lower-bound", "I(a) vanished");
    out.checks.push_back(c);
    out.checks.push_back(skipped_row("forced-inequalities",
                                     "requires h > 0 on the window"));
  } else {
    ForcedInequalityReport s4 = forced_inequality_checks(hist, tw, rep);
    if (s4.skipped) {
      out.checks.push_back(skipped_row("forced-inequalities", s4.reason));
    } else {
      out.checks.push_back(check_row("forcing-certificate",
                                     s4.certificate_worst, 1e-8));
      auto signed_check = [&](const std::string& n, double v) {
        out.checks.push_back(check_row(n, std::max(0.0, -v), 1e-4,
                                       "signed residual " +
                                           std::to_string(v)));
      };
      signed_check("forced-log-mass-lower", s4.r_log_I);
      signed_check("forced-frequency-growth", s4.r_Q_growth);
      signed_check("forced-log-frequency", s4.r_log_Q);
      signed_check("forced-endpoint-mass", s4.r_integrated);
      signed_check("forced-gronwall", s4.r_gronwall);
    }
  }
  return out;
}

// Static identity audits on the configured metric and density.
inline ScenarioResult audit_scenario(const ScenarioConfig& cfg) {
  ScenarioResult out;
  out.cfg = cfg;
  out.command = "audit";
  Grid grid(cfg.N, cfg.fd_order);
  MetricField m = cfg.build_metric(grid);
  ScalarField H = cfg.build_terminal_H(grid);
  ScalarField u = cfg.build_v0(grid);

  const double tol = cfg.audit_tolerance;
  for (const AuditResult& a :
       {check_bochner(m, H, u, tol), check_reilly(m, H, u, tol),
        check_selfadjoint(m, H, cfg.seed)})
    out.checks.push_back(check_row(a.name, a.residual, a.tolerance, a.note));
  if (cfg.metric == "conformal" && cfg.mode == std::array<int, 3>{1, 0, 0})
    out.checks.push_back(check_row(
        "ricci-oracle",
        ricci_conformal_oracle_residual(cfg.N, cfg.fd_order, cfg.amplitude),
        tol));
  out.verdict = out.all_pass() ? "pass" : "fail";
  return out;
}

// Grid-refinement slope table for the discretization-order audits.
inline ScenarioResult converge_scenario(const ScenarioConfig& cfg) {
  ScenarioResult out;
  out.cfg = cfg;
  out.command = "converge";
  const double lo = cfg.fd_order - 0.5, hi = cfg.fd_order + 0.5;
  auto at_size = [&](int n) {
    ScenarioConfig c = cfg;
    c.N = n;
    Grid grid(n, cfg.fd_order);
    return std::tuple{c.build_metric(grid), c.build_terminal_H(grid),
                      c.build_v0(grid)};
  };
  out.slopes.push_back(convergence_study(
      "bochner", cfg.converge_sizes,
      [&](int n) {
        auto [m, H, u] = at_size(n);
        return check_bochner(m, H, u, 1e300).residual;
      },
      lo, hi));
  out.slopes.push_back(convergence_study(
      "reilly", cfg.converge_sizes,
      [&](int n) {
        auto [m, H, u] = at_size(n);
        return check_reilly(m, H, u, 1e300).residual;
      },
      lo, hi));
  if (cfg.metric == "conformal" && cfg.mode == std::array<int, 3>{1, 0, 0})
    out.slopes.push_back(convergence_study(
        "ricci-oracle", cfg.converge_sizes,
        [&](int n) {
          return ricci_conformal_oracle_residual(n, cfg.fd_order,
                                                 cfg.amplitude);
        },
        lo, hi));
  for (const SlopeRow& r : out.slopes) {
    CheckRow c = check_row("slope-" + r.name, std::fabs(r.slope - cfg.fd_order),
                           0.5);
    c.pass = r.pass;
    out.checks.push_back(c);
  }
  out.verdict = out.all_pass() ? "pass" : "fail";
  return out;
}

// Principal eigenvalue of the drifting Laplacian on the configured data.
inline ScenarioResult eigen_scenario(const ScenarioConfig& cfg) {
  ScenarioResult out;
  out.cfg = cfg;
  out.command = "eigen";
  Grid grid(cfg.N, cfg.fd_order);
  MetricField m = cfg.build_metric(grid);
  ScalarField H = cfg.build_terminal_H(grid);
  EigenResult e = drift_eigenpair(m, H);
  out.lambda = e.lambda;
  out.eigen_residual = e.residual;
  out.eigen_iterations = e.iterations;
  out.checks.push_back(check_row("eigen-residual", e.residual, 1e-2,
                                 e.degenerate_gap
                                     ? "degenerate cluster encountered"
                                     : ""));
  if (cfg.metric == "flat" && cfg.terminal_H == "uniform") {
    const double h = grid.spacing;
    double symbol;
    if (cfg.fd_order == 2) {
      symbol = (2.0 - 2.0 * std::cos(h)) / (h * h);
    } else {
      const double s = (54.0 * std::sin(h / 2) - 2.0 * std::sin(3 * h / 2)) /
                       (24.0 * h);
      symbol = s * s;
    }
    out.checks.push_back(
        check_row("eigen-symbol", std::fabs(e.lambda - symbol), 1e-10));
  }
  out.verdict = out.all_pass() ? "pass" : "fail";
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string format17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Write-temp-then-rename; readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline const char* kCsvHeader =
    "t,Rmin,Rmax,pmin,pmax,p_bar,I,E,Q,dQdt,lambda,corrected_eigen,k_used,"
    "eigen_residual,cauchy_schwarz,mass_residual";

inline std::string timeseries_csv(const ScenarioResult& r) {
  std::string out = kCsvHeader;
  out += "\n";
  for (const SeriesRow& s : r.series) {
    const double cols[] = {s.t,     s.Rmin,  s.Rmax,         s.pmin,
                           s.pmax,  s.p_bar, s.I,            s.E,
                           s.Q,     s.dQdt,  s.lambda,       s.corrected_eigen,
                           s.k_used, s.eigen_residual, s.cauchy_schwarz,
                           s.mass_residual};
    for (std::size_t c = 0; c < std::size(cols); ++c) {
      if (c) out += ",";
      out += format17(cols[c]);
    }
    out += "\n";
  }
  return out;
}

inline std::string slopes_csv(const ScenarioResult& r) {
  std::string out = "name,N,residual,slope,pass\n";
  for (const SlopeRow& row : r.slopes)
    for (std::size_t i = 0; i < row.sizes.size(); ++i) {
      out += row.name + "," + std::to_string(row.sizes[i]) + "," +
             format17(row.residuals[i]) + "," + format17(row.slope) + "," +
             (row.pass ? "true" : "false") + "\n";
    }
  return out;
}

#ifndef CRF_BUILD_STAMP
#define CRF_BUILD_STAMP "crf-lab 1.0.0"
#endif

inline nlohmann::ordered_json config_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["N"] = c.N;
  j["fd_order"] = c.fd_order;
  j["T"] = c.T;
  j["dt"] = c.dt;
  j["safety"] = c.safety;
  j["general_mode"] = c.general_mode;
  j["R0"] = c.R0;
  j["metric"] = c.metric;
  j["amplitude"] = c.amplitude;
  j["mode"] = c.mode;
  j["scales"] = c.scales;
  j["seed"] = c.seed;
  j["max_mode"] = c.max_mode;
  j["v0"] = c.v0;
  j["v0_mode"] = c.v0_mode;
  j["forcing_a"] = c.forcing_a;
  j["forcing_b"] = c.forcing_b;
  j["terminal_H"] = c.terminal_H;
  j["t0"] = c.t0;
  j["t1"] = c.t1;
  j["h"] = c.h_preset;
  j["h0"] = c.h0;
  j["h1"] = c.h1;
  j["k"] = c.k_auto ? nlohmann::ordered_json("auto")
                    : nlohmann::ordered_json(c.k_const);
  j["eigen_stride"] = c.eigen_stride;
  j["hypothesis_stride"] = c.hypothesis_stride;
  j["audit_tolerance"] = c.audit_tolerance;
  j["deriv_tolerance"] = c.deriv_tolerance;
  j["converge_sizes"] = c.converge_sizes;
  j["output"] = c.output;
  return j;
}

inline nlohmann::ordered_json report_json(const ScenarioResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["build"] = CRF_BUILD_STAMP;
  j["command"] = r.command;
  j["config"] = config_json(r.cfg);
  j["verdict"] = r.verdict;
  j["pass"] = r.all_pass();
  j["exit_code"] = r.exit_code();
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const CheckRow& c : r.checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["skipped"] = c.skipped;
    e["residual"] = c.residual;
    e["tolerance"] = c.tolerance;
    if (!c.note.empty()) e["note"] = c.note;
    checks.push_back(e);
  }
  j["checks"] = checks;
  if (!r.slopes.empty()) {
    nlohmann::ordered_json slopes = nlohmann::ordered_json::array();
    for (const SlopeRow& s : r.slopes) {
      nlohmann::ordered_json e;
      e["name"] = s.name;
      e["sizes"] = s.sizes;
      e["residuals"] = s.residuals;
      e["slope"] = s.slope;
      e["expected"] = {s.lo, s.hi};
      e["pass"] = s.pass;
      slopes.push_back(e);
    }
    j["slopes"] = slopes;
  }
  if (r.command == "eigen") {
    j["lambda"] = r.lambda;
    j["eigen_residual"] = r.eigen_residual;
    j["eigen_iterations"] = r.eigen_iterations;
  }
  return j;
}

// Static SVG line charts of Q, I and lambda against t; no timestamps unless
// a stamp string is supplied.
inline std::string plots_svg(const ScenarioResult& r,
                             const std::string& stamp = "") {
  const int W = 760, Hh = 220, pad = 45;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << 3 * Hh + 20 << "\">\n";
  if (!stamp.empty())
    svg << "<text x=\"5\" y=\"12\" font-size=\"10\">" << stamp << "</text>\n";
  const char* names[3] = {"Q", "I", "lambda"};
  const char* colors[3] = {"#d62728", "#1f77b4", "#2ca02c"};
  for (int panel = 0; panel < 3; ++panel) {
    const int oy = panel * Hh + 15;
    std::vector<double> ys;
    for (const SeriesRow& s : r.series)
      ys.push_back(panel == 0 ? s.Q : panel == 1 ? s.I : s.lambda);
    double lo = 1e300, hi = -1e300, tlo = 1e300, thi = -1e300;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      lo = std::min(lo, ys[i]);
      hi = std::max(hi, ys[i]);
      tlo = std::min(tlo, r.series[i].t);
      thi = std::max(thi, r.series[i].t);
    }
    if (!(hi > lo)) hi = lo + 1;
    if (!(thi > tlo)) thi = tlo + 1;
    svg << "<rect x=\"" << pad << "\" y=\"" << oy << "\" width=\""
        << W - 2 * pad << "\" height=\"" << Hh - 40
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg << "<text x=\"" << pad << "\" y=\"" << oy - 3
        << "\" font-size=\"12\">" << names[panel] << " vs t  ["
        << format17(lo) << ", " << format17(hi) << "]</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << colors[panel]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double px =
          pad + (r.series[i].t - tlo) / (thi - tlo) * (W - 2 * pad);
      const double py = oy + (Hh - 40) * (1.0 - (ys[i] - lo) / (hi - lo));
      svg << format17(px) << "," << format17(py) << " ";
    }
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// Writes the artifact set for a finished scenario into cfg.output.
inline void write_artifacts(const ScenarioResult& r, bool plots = false,
                            const std::string& plot_stamp = "") {
  std::filesystem::path dir(r.cfg.output);
  std::filesystem::create_directories(dir);
  if (!r.series.empty())
    atomic_write(dir / "timeseries.csv", timeseries_csv(r));
  if (!r.slopes.empty()) atomic_write(dir / "slopes.csv", slopes_csv(r));
  atomic_write(dir / "report.json", report_json(r).dump(2) + "\n");
  if (plots && !r.series.empty())
    atomic_write(dir / "plots.svg", plots_svg(r, plot_stamp));
}

}  // namespace crf
