#pragma once

#include "crf/elliptic.hpp"

// Smallest nonzero eigenvalue of the (negated) drifting Laplacian on the
// dV-mean-zero subspace, by inverse power iteration with the CG solver.
namespace crf {

struct EigenConfig {
  double tolerance = 1e-12;        // relative eigenvalue stagnation
  double residual_tolerance = 1e-9;
  int max_iterations = 200;
  std::uint64_t seed = 12345; // deterministic start vector
  EllipticConfig elliptic;
};

struct EigenResult {
  double lambda = 0;
  ScalarField u;          // dV-mean-zero, unit dV norm
  int iterations = 0;
  double residual = 0;    // || -L_f u - lambda u ||_dV
  bool degenerate_gap = false;  // iterate kept rotating after lambda settled
};

inline EigenResult drift_eigenpair(const MetricField& m, const ScalarField& H,
                                   const EigenConfig& cfg = {}) {
  require_same_grid(m.grid(), H.grid, "drift_eigenpair");
  const Grid& grid = m.grid();
  const std::size_t nn = grid.num_nodes();
  DivFormOperator lap = make_drifting_laplacian(m, H);
  const std::vector<double>& w = lap.weight();
  const double cv = grid.cell_volume();

  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t n = 0; n < nn; ++n) acc += w[n] * a[n] * b[n] * cv;
    return acc;
  };
  double wtot = 0;
  for (std::size_t n = 0; n < nn; ++n) wtot += w[n] * cv;
  auto project = [&](std::vector<double>& a) {
    double mean = 0;
    for (std::size_t n = 0; n < nn; ++n) mean += w[n] * a[n] * cv;
    mean /= wtot;
    for (std::size_t n = 0; n < nn; ++n) a[n] -= mean;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> u(nn);
  for (double& x : u) x = unif(rng);
  project(u);
  double norm = std::sqrt(dot(u, u));
  for (double& x : u) x /= norm;

  EigenResult out;
  std::vector<double> x(nn, 0.0), lu(nn);
  double lambda_prev = 0;
  bool lambda_settled = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    // solve (-L_f) x = u on the mean-zero subspace; x carries the warm start
    detail::cg_solve(lap, 0.0, u, x, cfg.elliptic, true);
    norm = std::sqrt(dot(x, x));
    for (std::size_t n = 0; n < nn; ++n) u[n] = x[n] / norm;
    project(u);
    lap.apply(u, lu);
    const double lambda = -dot(u, lu);
    double rsq = 0;
    for (std::size_t n = 0; n < nn; ++n) {
      const double r = -lu[n] - lambda * u[n];
      rsq += w[n] * r * r * cv;
    }
    out.lambda = lambda;
    out.residual = std::sqrt(rsq);
    out.iterations = it + 1;
    lambda_settled = std::fabs(lambda - lambda_prev) <=
                     cfg.tolerance * std::max(std::fabs(lambda), 1e-300);
    lambda_prev = lambda;
    if (lambda_settled && out.residual <= cfg.residual_tolerance) break;
  }
  // a stagnant eigenvalue with a stuck residual means the iterate is still
  // rotating inside a cluster of nearby eigenvalues; lambda is then only
  // accurate to the cluster width
  out.degenerate_gap =
      lambda_settled && out.residual > cfg.residual_tolerance;
  out.u = ScalarField(grid);
  out.u.v = u;
  return out;
}

// Plain Laplace-Beltrami case: uniform weight.
inline EigenResult laplace_eigenpair(const MetricField& m,
                                     const EigenConfig& cfg = {}) {
  return drift_eigenpair(m, ScalarField(m.grid(), 1.0), cfg);
}

}  // namespace crf
