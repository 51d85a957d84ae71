#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crf/geometry.hpp"

using namespace crf;

namespace {

// Independent oracle: Ricci of a conformal metric e^{2 phi} delta on a flat
// background in dimension n,
//   Ric = -(n-2)(Hess phi - d phi x d phi) - (Lap phi + (n-2)|d phi|^2) delta,
// with all derivatives of phi = amp sin(k.x) evaluated analytically.
struct ConformalOracle {
  double amp;
  std::array<int, 3> k;

  double phi(double x, double y, double z) const {
    return amp * std::sin(k[0] * x + k[1] * y + k[2] * z);
  }
  double dphi(int i, double x, double y, double z) const {
    return amp * k[i] * std::cos(k[0] * x + k[1] * y + k[2] * z);
  }
  double ddphi(int i, int j, double x, double y, double z) const {
    return -amp * k[i] * k[j] * std::sin(k[0] * x + k[1] * y + k[2] * z);
  }
  double ricci(int i, int j, double x, double y, double z) const {
    const int n = 3;
    double lap = 0, gradsq = 0;
    for (int a = 0; a < 3; ++a) {
      lap += ddphi(a, a, x, y, z);
      gradsq += dphi(a, x, y, z) * dphi(a, x, y, z);
    }
    double r = -(n - 2) * (ddphi(i, j, x, y, z) -
                           dphi(i, x, y, z) * dphi(j, x, y, z));
    if (i == j) r -= lap + (n - 2) * gradsq;
    return r;
  }
};

double ricci_error_vs_oracle(int N, int order) {
  Grid grid(N, order);
  ConformalOracle oracle{0.1, {1, 0, 0}};
  MetricField m = metric_conformal(grid, 0.1, {1, 0, 0});
  SymTensorField ric = ricci(m);
  double err = 0;
  std::size_t idx = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int kk = 0; kk < N; ++kk, ++idx) {
        auto x = grid.coords(i, j, kk);
        for (int a = 0; a < 3; ++a)
          for (int b = a; b < 3; ++b)
            err = std::max(err,
                           std::fabs(ric.comp[sym_index(a, b)][idx] -
                                     oracle.ricci(a, b, x[0], x[1], x[2])));
      }
  return err;
}

}  // namespace

TEST_CASE("grid basics") {
  Grid g(16);
  CHECK(g.spacing * g.n == doctest::Approx(kTwoPi).epsilon(1e-15));
  CHECK(g.num_nodes() == 4096);
  CHECK(g.index(-1, 0, 0) == g.index(15, 0, 0));
  CHECK(g.index(16, 3, 2) == g.index(0, 3, 2));
  CHECK_THROWS(Grid(4));
  CHECK_THROWS(Grid(16, 3));
}

TEST_CASE("metric presets") {
  Grid g(16);
  MetricField flat = metric_flat(g);
  CHECK(flat.g.comp[0][5] == 1.0);
  CHECK(flat.g.comp[1][5] == 0.0);
  CHECK(flat.sqrt_det.v[7] == doctest::Approx(1.0));

  MetricField conf = metric_conformal(g, 0.1, {1, 0, 0});
  auto x = g.coords(3, 0, 0);
  CHECK(conf.g.comp[0][g.index(3, 0, 0)] ==
        doctest::Approx(std::exp(0.2 * std::sin(x[0]))).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(metric_from_preset("nope", {}, g),
                       doctest::Contains("unknown preset"),
                       std::invalid_argument);
}

TEST_CASE("random-smooth preset: SPD or rejected with diagnostic") {
  Grid g(16);
  MetricField m = metric_random_smooth(g, 7, 0.2);
  for (std::size_t n = 0; n < m.g.size(); n += 97) {
    auto ev = sym3_eigenvalues(m.at(n));
    CHECK(ev[0] > kPdEps);
  }
  // Large amplitude far beyond the safe bound must be rejected.
  CHECK_THROWS_WITH_AS(metric_random_smooth(g, 7, 3.0),
                       doctest::Contains("worst eigenvalue"),
                       std::invalid_argument);
}

TEST_CASE("metric inverse contract") {
  Grid g(12);
  MetricField m = metric_random_smooth(g, 3, 0.25);
  for (std::size_t n = 0; n < m.g.size(); n += 31) {
    auto a = m.at(n);
    auto inv = m.inv_at(n);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (int k = 0; k < 3; ++k)
          acc += a[sym_index(i, k)] * inv[sym_index(k, j)];
        CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("christoffel: flat vanishes, closed form, symmetric") {
  Grid g(24);
  CHECK(christoffel(metric_flat(g)).upper[0].max_abs() <= 1e-12);

  // g = diag(e^{2 a sin x1}, 1, 1): Gamma^1_11 = a cos x1.
  const double a = 0.15;
  MetricField m = metric_anisotropic(g, {a, 0, 0});
  Rank3Field gam = christoffel(m);
  double err = 0;
  for (int i = 0; i < g.n; ++i) {
    double x = i * g.spacing;
    err = std::max(err, std::fabs(gam.upper[0].comp[0][g.index(i, 2, 5)] -
                                  a * std::cos(x)));
  }
  const double h4 = std::pow(g.spacing, 4);
  CHECK(err < 50 * h4);
}

TEST_CASE("ricci: flat vanishes, conformal oracle, convergence order") {
  Grid g(16);
  CHECK(ricci(metric_flat(g)).max_abs() <= 1e-12);
  CHECK(scalar_curvature(metric_flat(g)).max_abs() <= 1e-12);

  const double e16 = ricci_error_vs_oracle(16, 4);
  const double e32 = ricci_error_vs_oracle(32, 4);
  const double e64 = ricci_error_vs_oracle(64, 4);
  const double slope1 = std::log2(e16 / e32);
  const double slope2 = std::log2(e32 / e64);
  CHECK(slope1 > 3.5);
  CHECK(slope1 < 4.5);
  CHECK(slope2 > 3.5);
  CHECK(slope2 < 4.5);

  // order-2 stencils converge at order 2
  const double f16 = ricci_error_vs_oracle(16, 2);
  const double f32 = ricci_error_vs_oracle(32, 2);
  CHECK(std::log2(f16 / f32) == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("gradient and grad_norm_sq") {
  Grid g(32);
  MetricField flat = metric_flat(g);
  ScalarField c(g, 3.0);
  CHECK(grad_norm_sq(c, flat).max_abs() == 0.0);

  ScalarField u = ScalarField::sample(
      g, [](double x, double, double) { return std::sin(x); });
  // diag(4,1,1): |grad u|^2 = 0.25 cos^2 x
  SymTensorField t(g);
  std::fill(t.comp[0].begin(), t.comp[0].end(), 4.0);
  std::fill(t.comp[3].begin(), t.comp[3].end(), 1.0);
  std::fill(t.comp[5].begin(), t.comp[5].end(), 1.0);
  MetricField scaled = MetricField::from_components(t);
  ScalarField gn = grad_norm_sq(u, scaled);
  double err = 0;
  for (int i = 0; i < g.n; ++i) {
    double x = i * g.spacing;
    double expect = 0.25 * std::cos(x) * std::cos(x);
    err = std::max(err, std::fabs(gn.at(i, 1, 2) - expect));
  }
  CHECK(err < 1e-4);
  // positivity on a random metric
  MetricField m = metric_random_smooth(g, 11, 0.25);
  ScalarField gn2 = grad_norm_sq(u, m);
  CHECK(gn2.min_value() >= 0.0);
}

TEST_CASE("hessian: closed form, symmetry, trace consistency") {
  Grid g(32);
  MetricField flat = metric_flat(g);
  ScalarField u = ScalarField::sample(
      g, [](double x, double, double) { return std::sin(x); });
  SymTensorField h = hessian(u, flat);
  double err = 0;
  for (int i = 0; i < g.n; ++i) {
    double x = i * g.spacing;
    err = std::max(err, std::fabs(h.comp[0][g.index(i, 4, 9)] + std::sin(x)));
    err = std::max(err, std::fabs(h.comp[3][g.index(i, 4, 9)]));
    err = std::max(err, std::fabs(h.comp[1][g.index(i, 4, 9)]));
  }
  CHECK(err < 1e-4);

  ScalarField zero(g, 5.0);
  CHECK(hessian(zero, flat).max_abs() == 0.0);

  // exact symmetry by construction on a rough metric
  MetricField m = metric_random_smooth(g, 19, 0.25);
  ScalarField r = ScalarField::sample(g, [](double x, double y, double z) {
    return std::sin(x + 2 * y) * std::cos(z);
  });
  SymTensorField hr = hessian(r, m);  // stored symmetric; no asymmetry slot
  CHECK(hr.value(0, 1, 17) == hr.value(1, 0, 17));
}

TEST_CASE("tensor norm and integration") {
  Grid g(16);
  MetricField m = metric_random_smooth(g, 5, 0.2);
  // T = m g has |T|^2 = m^2 n = 12 exactly
  SymTensorField t = m.g;
  for (int c = 0; c < 6; ++c)
    for (double& x : t.comp[c]) x *= kM;
  ScalarField nrm = tensor_norm_sq(t, m);
  for (std::size_t n = 0; n < nrm.size(); n += 53)
    CHECK(nrm.v[n] == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(nrm.min_value() >= 0.0);

  // integrate(sin^2 x1) over uniform measure = 0.5 after normalization
  Measure mu = measure_mu(metric_flat(g));
  ScalarField s2 = ScalarField::sample(
      g, [](double x, double, double) { return std::sin(x) * std::sin(x); });
  const double total = mu.total();
  CHECK(integrate(s2, mu) / total == doctest::Approx(0.5).epsilon(1e-13));
}
