#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crf/operators.hpp"

using namespace crf;

namespace {

ScalarField random_trig_field(const Grid& g, std::uint64_t seed,
                              double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double a1 = unif(rng), a2 = unif(rng), a3 = unif(rng), a4 = unif(rng);
  return ScalarField::sample(g, [=](double x, double y, double z) {
    return amp * (a1 * std::sin(x) + a2 * std::cos(y + z) +
                  a3 * std::sin(2 * x - y) + a4 * std::cos(2 * z));
  });
}

ScalarField positive_trig_field(const Grid& g, std::uint64_t seed,
                                double amp = 0.3) {
  ScalarField f = random_trig_field(g, seed, amp);
  for (double& x : f.v) x = std::exp(x);
  return f;
}

}  // namespace

TEST_CASE("laplace_beltrami: discrete eigenfunction and constants") {
  Grid g(32, 2);
  MetricField flat = metric_flat(g);
  ScalarField u = ScalarField::sample(
      g, [](double x, double, double) { return std::sin(x); });
  ScalarField lu = laplace_beltrami(u, flat);
  const double h = g.spacing;
  const double lam = -(2.0 - 2.0 * std::cos(h)) / (h * h);
  for (std::size_t n = 0; n < u.size(); n += 101)
    CHECK(lu.v[n] == doctest::Approx(lam * u.v[n]).epsilon(1e-12));

  ScalarField c(g, 4.0);
  CHECK(laplace_beltrami(c, flat).max_abs() <= 1e-13);
  MetricField rough = metric_random_smooth(g, 2, 0.25);
  CHECK(laplace_beltrami(c, rough).max_abs() <= 1e-11);
}

TEST_CASE("laplacian trace consistency with hessian") {
  Grid g(64);
  MetricField m = metric_conformal(g, 0.05, {1, 1, 0});
  ScalarField w = ScalarField::sample(g, [](double x, double y, double) {
    return 0.1 * std::sin(x) * std::cos(y);
  });
  SymTensorField hw = hessian(w, m);
  ScalarField lap = laplace_beltrami(w, m);
  double err = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    auto inv = m.inv_at(n);
    double tr = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        tr += inv[sym_index(i, j)] * hw.value(i, j, n);
    err = std::max(err, std::fabs(tr - lap.v[n]));
  }
  CHECK(err < 1e-6);
}

TEST_CASE("exact self-adjointness in the weighted inner product") {
  Grid g(16);
  MetricField m = metric_random_smooth(g, 21, 0.25);
  ScalarField H = positive_trig_field(g, 22);
  ScalarField u = random_trig_field(g, 23);
  ScalarField w = random_trig_field(g, 24);

  ScalarField lu = drifting_laplacian(u, m, H);
  ScalarField lw = drifting_laplacian(w, m, H);
  Measure dV = measure_mu(m);
  for (std::size_t n = 0; n < dV.w.size(); ++n) dV.w[n] *= H.v[n];

  const double a = integrate_product(u, lw, dV);
  const double b = integrate_product(lu, w, dV);
  const double scale = std::sqrt(integrate_product(u, u, dV) *
                                 integrate_product(w, w, dV));
  CHECK(std::fabs(a - b) <= 1e-12 * std::max(scale, 1.0));
}

TEST_CASE("drifting laplacian: uniform H reduces to laplace_beltrami") {
  Grid g(16);
  MetricField m = metric_random_smooth(g, 31, 0.2);
  ScalarField H(g, 0.7);
  ScalarField u = random_trig_field(g, 32);
  ScalarField a = drifting_laplacian(u, m, H);
  ScalarField b = laplace_beltrami(u, m);
  double err = 0;
  for (std::size_t n = 0; n < u.size(); ++n)
    err = std::max(err, std::fabs(a.v[n] - b.v[n]));
  CHECK(err <= 1e-11);

  ScalarField bad(g, -1.0);
  CHECK_THROWS_AS(drifting_laplacian(u, m, bad), std::invalid_argument);
}

TEST_CASE("drifting laplacian matches pointwise form Delta u - <grad f, grad u>") {
  // flat metric, H = e^{-0.2 sin x1}, u = sin x1:
  //   L_f u = Delta u - (d1 f)(d1 u), f = -log H
  auto run = [](int N) {
    Grid g(N);
    MetricField flat = metric_flat(g);
    ScalarField H = ScalarField::sample(g, [](double x, double, double) {
      return std::exp(-0.2 * std::sin(x));
    });
    ScalarField u = ScalarField::sample(
        g, [](double x, double, double) { return std::sin(x); });
    ScalarField lu = drifting_laplacian(u, flat, H);
    double err = 0;
    for (int i = 0; i < N; ++i) {
      const double x = i * g.spacing;
      // f = 0.2 sin x (up to a constant), d1 f = 0.2 cos x
      const double expect = -std::sin(x) - 0.2 * std::cos(x) * std::cos(x);
      err = std::max(err, std::fabs(lu.at(i, 3, 7) - expect));
    }
    return err;
  };
  const double e16 = run(16), e32 = run(32);
  CHECK(e32 < 2e-4);
  CHECK(std::log2(e16 / e32) == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("integration by parts decays at stencil order") {
  auto residual = [](int N) {
    Grid g(N);
    MetricField m = metric_conformal(g, 0.08, {1, 0, 1});
    ScalarField H = ScalarField::sample(g, [](double, double y, double) {
      return std::exp(0.15 * std::cos(y));
    });
    ScalarField u = random_trig_field(g, 41);
    ScalarField w = random_trig_field(g, 42);
    Measure dV = measure_mu(m);
    for (std::size_t n = 0; n < dV.w.size(); ++n) dV.w[n] *= H.v[n];
    ScalarField lw = drifting_laplacian(w, m, H);
    ScalarField gi = grad_inner(u, w, m);
    return std::fabs(integrate_product(u, lw, dV) + integrate(gi, dV));
  };
  const double r16 = residual(16), r32 = residual(32);
  CHECK(std::log2(r16 / r32) > 3.0);
}

TEST_CASE("bakry_emery") {
  Grid g(24);
  MetricField flat = metric_flat(g);
  ScalarField uniform(g, 2.5);
  CHECK(bakry_emery(flat, uniform).max_abs() <= 1e-12);

  MetricField m = metric_random_smooth(g, 51, 0.2);
  SymTensorField bf = bakry_emery(m, uniform);
  SymTensorField ric = ricci(m);
  double err = 0;
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < bf.size(); ++n)
      err = std::max(err, std::fabs(bf.comp[c][n] - ric.comp[c][n]));
  CHECK(err <= 1e-12);

  // flat metric: Ric_f = Hess f, checked against a finite-difference
  // hessian of -log H as an independent path
  ScalarField H = ScalarField::sample(g, [](double x, double, double) {
    return std::exp(-0.2 * std::sin(x));
  });
  SymTensorField a = bakry_emery(flat, H);
  ScalarField logh(g);
  for (std::size_t n = 0; n < H.size(); ++n) logh.v[n] = -std::log(H.v[n]);
  SymTensorField b = hessian(logh, flat);
  err = 0;
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < a.size(); ++n)
      err = std::max(err, std::fabs(a.comp[c][n] - b.comp[c][n]));
  CHECK(err < 1e-4);

  ScalarField bad(g, 0.0);
  CHECK_THROWS_AS(bakry_emery(flat, bad), std::invalid_argument);
}

TEST_CASE("max_relative_eigenvalue") {
  Grid g(12);
  MetricField m = metric_random_smooth(g, 61, 0.25);
  // T = c g has relative eigenvalues exactly c
  SymTensorField t = m.g;
  for (int c = 0; c < 6; ++c)
    for (double& x : t.comp[c]) x *= -1.7;
  CHECK(max_relative_eigenvalue(t, m) == doctest::Approx(-1.7).epsilon(1e-10));
}

TEST_CASE("weighted measure bundle and f reporting") {
  Grid g(12);
  MetricField flat = metric_flat(g);
  ScalarField H(g, 1.0 / std::pow(kTwoPi, 3));
  // normalize H so that the dV mass is one
  for (double& x : H.v) x /= g.cell_volume() * g.num_nodes() /
                             (kTwoPi * kTwoPi * kTwoPi);
  WeightedMeasure wm = WeightedMeasure::make(flat, H, 0.5);
  CHECK(wm.V.total() == doctest::Approx(1.0).epsilon(1e-12));
  ScalarField f = wm.f_report();
  CHECK(f.v[0] ==
        doctest::Approx(-1.5 * std::log(4 * 3.14159265358979 * 0.5) -
                        std::log(H.v[0])));
  WeightedMeasure at_zero = WeightedMeasure::make(flat, H, 0.0);
  CHECK_THROWS_AS(at_zero.f_report(), std::domain_error);
}
