#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crf/flow.hpp"

using namespace crf;

namespace {

// Hand-built history with a frozen flat metric: the heat passes then reduce
// to the plain discrete heat equation, which has exact mode solutions.
FlowHistory static_flat_history(const Grid& g, double T, int steps) {
  FlowHistory h;
  h.grid = g;
  h.T = T;
  MetricField flat = metric_flat(g);
  for (int s = 0; s <= steps; ++s) {
    h.times.push_back(T * s / steps);
    h.g.push_back(flat.g);
    h.sqrt_det.push_back(flat.sqrt_det);
    h.p.push_back(ScalarField(g, 0.0));
    h.p_bar.push_back(0.0);
  }
  return h;
}

// Discrete symbol of the staggered divergence-form Laplacian on the flat
// metric for the wave number k (per axis contribution).
double staggered_symbol(const Grid& g, int k) {
  const double h = g.spacing;
  double s;
  if (g.fd_order == 2)
    s = 2.0 * std::sin(k * h / 2.0) / h;
  else
    s = (54.0 * std::sin(k * h / 2.0) - 2.0 * std::sin(3.0 * k * h / 2.0)) /
        (24.0 * h);
  return s * s;
}

}  // namespace

TEST_CASE("flat initial data: metric decays as exp(-8t) per component") {
  Grid g(16);
  FlowConfig cfg;
  cfg.T = 0.05;
  FlowHistory hist = evolve_flow(metric_flat(g), cfg);
  REQUIRE(hist.steps() >= 3);
  CHECK(hist.times.front() == 0.0);
  CHECK(hist.times.back() == doctest::Approx(cfg.T).epsilon(1e-12));

  double err = 0, sderr = 0;
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    const double expect = std::exp(-8.0 * hist.times[i]);
    const double sd = std::exp(-12.0 * hist.times[i]);
    for (std::size_t n = 0; n < hist.g[i].size(); n += 97) {
      err = std::max(err, std::fabs(hist.g[i].comp[0][n] - expect));
      err = std::max(err, std::fabs(hist.g[i].comp[1][n]));  // stays diagonal
      sderr = std::max(sderr, std::fabs(hist.sqrt_det[i].v[n] - sd));
    }
  }
  CHECK(err <= 1e-6);
  CHECK(sderr <= 1e-6);

  // pressure stays at the rigidity value 2 for the whole run
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    CHECK(hist.p_bar[i] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(hist.p[i].min_value() >= 2.0 - 1e-8);
  }
  CHECK_THROWS_AS(evolve_flow(metric_flat(g), FlowConfig{.T = -1.0}),
                  std::invalid_argument);
}

TEST_CASE("general constraint mode with R0 = -m(m+1) matches the standard flow") {
  Grid g(12);
  FlowConfig a;
  a.T = 0.02;
  FlowConfig b = a;
  b.general_mode = true;
  b.R0 = -6.0;
  FlowHistory ha = evolve_flow(metric_conformal(g, 0.05, {1, 1, 0}), a);
  FlowHistory hb = evolve_flow(metric_conformal(g, 0.05, {1, 1, 0}), b);
  REQUIRE(ha.steps() == hb.steps());
  double err = 0;
  for (std::size_t i = 0; i < ha.steps(); ++i)
    for (int c = 0; c < 6; ++c)
      for (std::size_t n = 0; n < ha.g[i].size(); n += 31)
        err = std::max(err,
                       std::fabs(ha.g[i].comp[c][n] - hb.g[i].comp[c][n]));
  CHECK(err <= 1e-12);
}

TEST_CASE("frozen flat metric: heat pass reproduces the discrete mode decay") {
  Grid g(16, 2);
  FlowHistory hist = static_flat_history(g, 0.1, 10);
  ScalarField v0 = ScalarField::sample(
      g, [](double x, double, double) { return std::sin(x); });
  solve_heat(hist, v0);
  REQUIRE(hist.has_v);
  const double lam = staggered_symbol(g, 1);
  double err = 0;
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    const double amp = std::exp(-lam * hist.times[i]);
    for (int n = 0; n < g.n; ++n)
      err = std::max(err, std::fabs(hist.v[i].at(n, 3, 5) -
                                    amp * std::sin(n * g.spacing)));
  }
  CHECK(err <= 1e-9);
}

TEST_CASE("frozen flat metric: conjugate pass is the backward discrete heat equation") {
  Grid g(16, 2);
  const double T = 0.1;
  FlowHistory hist = static_flat_history(g, T, 10);
  ScalarField HT = ScalarField::sample(
      g, [](double x, double, double) { return 1.0 + 0.4 * std::sin(x); });
  solve_conjugate_heat(hist, HT);
  REQUIRE(hist.has_H);
  CHECK(hist.conjugate_mass_drift <= 1e-12);

  // normalized terminal mean is 1/(2pi)^3; the sin mode decays backward
  const double mean = 1.0 / (kTwoPi * kTwoPi * kTwoPi);
  const double lam = staggered_symbol(g, 1);
  double err = 0;
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    const double amp = 0.4 * mean * std::exp(-lam * (T - hist.times[i]));
    for (int n = 0; n < g.n; ++n)
      err = std::max(err, std::fabs(hist.H[i].at(n, 2, 9) - mean -
                                    amp * std::sin(n * g.spacing)));
  }
  CHECK(err <= 1e-9 * mean);

  ScalarField bad(g, -1.0);
  CHECK_THROWS_AS(solve_conjugate_heat(hist, bad), std::invalid_argument);
}

TEST_CASE("flat run: uniform terminal density gives time-independent unit dV") {
  Grid g(16);
  FlowConfig cfg;
  cfg.T = 0.05;
  FlowHistory hist = evolve_flow(metric_flat(g), cfg);
  solve_conjugate_heat(hist, ScalarField(g, 1.0));
  CHECK(hist.conjugate_mass_drift <= 1e-10);
  const double P = 1.0 / (kTwoPi * kTwoPi * kTwoPi);
  // H(0) = P exactly (sqrt_det(0) = 1); dV mass is one at every step
  CHECK(hist.H[0].max_abs() == doctest::Approx(P).epsilon(1e-8));
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    CHECK(hist.dV_at(i).total() == doctest::Approx(1.0).epsilon(1e-12));
    // spatially uniform at each instant
    CHECK(hist.H[i].max_value() - hist.H[i].min_value() <=
          1e-10 * hist.H[i].max_value());
  }
}

TEST_CASE("flat run heat pass: mode-0 grows as exp(2t), sin mode has closed form") {
  Grid g(16);
  FlowConfig cfg;
  cfg.T = 0.05;
  FlowHistory hist = evolve_flow(metric_flat(g), cfg);

  solve_heat(hist, ScalarField(g, 1.0));
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    const double expect = std::exp(2.0 * hist.times[i]);
    CHECK(hist.v[i].max_abs() == doctest::Approx(expect).epsilon(1e-8));
    CHECK(hist.v[i].max_value() - hist.v[i].min_value() <= 1e-10);
  }

  // v0 = sin x1 evolves as exp(2t - lam_h (e^{8t}-1)/8) sin_h x1 where
  // lam_h is the discrete symbol (the operator on e^{-8t} delta is exactly
  // e^{8t} times the flat discrete Laplacian)
  solve_heat(hist, ScalarField::sample(
                       g, [](double x, double, double) { return std::sin(x); }));
  const double lam = staggered_symbol(g, 1);
  double err = 0;
  for (std::size_t i = 0; i < hist.steps(); ++i) {
    const double t = hist.times[i];
    const double amp =
        std::exp(2.0 * t - lam * (std::exp(8.0 * t) - 1.0) / 8.0);
    for (int n = 0; n < g.n; ++n)
      err = std::max(err, std::fabs(hist.v[i].at(n, 7, 2) -
                                    amp * std::sin(n * g.spacing)));
  }
  // dominated by the linear-in-time metric interpolation inside intervals
  CHECK(err <= 5e-4);

  // zero initial data stays zero
  solve_heat(hist, ScalarField(g, 0.0));
  for (std::size_t i = 0; i < hist.steps(); ++i)
    CHECK(hist.v[i].max_abs() == 0.0);
}

TEST_CASE("forced heat: (a,b) = (1,0) is identical to the plain pass") {
  Grid g(12);
  FlowConfig cfg;
  cfg.T = 0.03;
  FlowHistory hist = evolve_flow(metric_conformal(g, 0.05, {1, 0, 0}), cfg);
  ScalarField v0 = ScalarField::sample(
      g, [](double x, double y, double) { return 1.0 + 0.3 * std::sin(x + y); });
  solve_heat(hist, v0);
  std::vector<std::vector<double>> plain;
  for (const auto& v : hist.v) plain.push_back(v.v);

  HeatForcing f{1.0, 0.0, true};
  solve_heat_forced(hist, v0, f);
  for (std::size_t i = 0; i < hist.steps(); ++i)
    CHECK(hist.v[i].v == plain[i]);
  // certificate residual |a v + b |grad v|| - (|v| + |grad v|) <= 0
  for (double c : hist.forcing_certificate) CHECK(c <= 1e-14);

  HeatForcing mixed{0.5, 0.5, true};
  solve_heat_forced(hist, v0, mixed);
  for (double c : hist.forcing_certificate) CHECK(c <= 1e-14);
  for (const auto& v : hist.v) CHECK(std::isfinite(v.max_abs()));

  HeatForcing bad{1.5, 0.0, true};
  CHECK_THROWS_AS(solve_heat_forced(hist, v0, bad), std::invalid_argument);
  CHECK_THROWS_AS(solve_heat(hist, v0, hist.steps() - 1),
                  std::invalid_argument);
}

TEST_CASE("whole pipeline is bitwise deterministic") {
  auto run = [] {
    Grid g(12);
    FlowConfig cfg;
    cfg.T = 0.03;
    FlowHistory h = evolve_flow(metric_random_smooth(g, 99, 0.15), cfg);
    solve_conjugate_heat(h, ScalarField(g, 1.0));
    solve_heat(h, ScalarField::sample(g, [](double x, double, double) {
                 return 1.0 + 0.2 * std::cos(x);
               }));
    return h;
  };
  FlowHistory a = run(), b = run();
  REQUIRE(a.steps() == b.steps());
  for (std::size_t i = 0; i < a.steps(); ++i) {
    CHECK(a.times[i] == b.times[i]);
    for (int c = 0; c < 6; ++c) CHECK(a.g[i].comp[c] == b.g[i].comp[c]);
    CHECK(a.p[i].v == b.p[i].v);
    CHECK(a.H[i].v == b.H[i].v);
    CHECK(a.v[i].v == b.v[i].v);
  }
}

TEST_CASE("history lookup helpers") {
  Grid g(8);
  FlowHistory h = static_flat_history(g, 1.0, 4);
  CHECK(h.index_at(0.0) == 0);
  CHECK(h.index_at(0.26) == 1);
  CHECK(h.index_at(2.0) == 4);
  CHECK(h.tau(0) == 1.0);
  CHECK(h.mu_at(2).total() ==
        doctest::Approx(kTwoPi * kTwoPi * kTwoPi).epsilon(1e-12));
  CHECK_THROWS_AS(h.dV_at(0), std::logic_error);
}
