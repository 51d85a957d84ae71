#pragma once

#include "crf/operators.hpp"

// Matrix-free conjugate-gradient solver for positive Helmholtz problems
// (-Delta_g + c) u = F and the conformal-pressure equation.
namespace crf {

struct EllipticConfig {
  double rel_tolerance = 1e-10;
  long max_iterations = -1;  // default 10 N^3
  bool diagonal_preconditioner = true;
};

struct EllipticFailure : std::runtime_error {
  double final_residual;
  EllipticFailure(const std::string& msg, double res)
      : std::runtime_error(msg), final_residual(res) {}
};

namespace detail {

// CG on A = -L + c in the W-weighted inner product, where L is the
// divergence-form operator (self-adjoint in that inner product).
inline void cg_solve(const DivFormOperator& lap, double shift,
                     const std::vector<double>& rhs, std::vector<double>& x,
                     const EllipticConfig& cfg, bool project_mean_zero) {
  const Grid& g = lap.grid();
  const std::size_t nn = g.num_nodes();
  const std::vector<double>& w = lap.weight();
  const double cv = g.cell_volume();
  const long max_it =
      cfg.max_iterations > 0 ? cfg.max_iterations : 10L * (long)nn;

  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t n = 0; n < nn; ++n) acc += w[n] * a[n] * b[n] * cv;
    return acc;
  };
  double wtot = 0;
  for (std::size_t n = 0; n < nn; ++n) wtot += w[n] * cv;
  auto project = [&](std::vector<double>& a) {
    if (!project_mean_zero) return;
    double mean = 0;
    for (std::size_t n = 0; n < nn; ++n) mean += w[n] * a[n] * cv;
    mean /= wtot;
    for (std::size_t n = 0; n < nn; ++n) a[n] -= mean;
  };
  auto apply_a = [&](const std::vector<double>& in, std::vector<double>& out) {
    lap.apply(in, out);
    for (std::size_t n = 0; n < nn; ++n) out[n] = -out[n] + shift * in[n];
  };

  std::vector<double> precond;
  if (cfg.diagonal_preconditioner) {
    precond = lap.diagonal();
    for (std::size_t n = 0; n < nn; ++n)
      precond[n] = 1.0 / (-precond[n] + std::max(shift, 0.0) + 1e-300);
  }

  std::vector<double> b = rhs;
  project(b);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0) {
    x.assign(nn, 0.0);
    return;
  }
  if (x.size() != nn) x.assign(nn, 0.0);
  project(x);

  std::vector<double> r(nn), z(nn), p(nn), ap(nn);
  apply_a(x, ap);
  for (std::size_t n = 0; n < nn; ++n) r[n] = b[n] - ap[n];
  project(r);
  auto precondition = [&](const std::vector<double>& rr,
                          std::vector<double>& zz) {
    if (precond.empty()) {
      zz = rr;
    } else {
      zz.resize(nn);
      for (std::size_t n = 0; n < nn; ++n) zz[n] = precond[n] * rr[n];
      project(zz);
    }
  };
  precondition(r, z);
  p = z;
  double rz = dot(r, z);
  double rnorm = std::sqrt(dot(r, r));
  for (long it = 0; it < max_it && rnorm > cfg.rel_tolerance * bnorm; ++it) {
    apply_a(p, ap);
    const double alpha = rz / dot(p, ap);
    for (std::size_t n = 0; n < nn; ++n) {
      x[n] += alpha * p[n];
      r[n] -= alpha * ap[n];
    }
    project(r);
    precondition(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t n = 0; n < nn; ++n) p[n] = z[n] + beta * p[n];
    rnorm = std::sqrt(dot(r, r));
  }
  if (rnorm > cfg.rel_tolerance * bnorm)
    throw EllipticFailure(
        "cg_solve: no convergence, relative residual " +
            std::to_string(rnorm / bnorm),
        rnorm / bnorm);
}

}  // namespace detail

// Solve (-Delta_g + c) u = F; c > 0 keeps the operator SPD in d mu.
// `guess` (optional) warm-starts the iteration.
inline ScalarField solve_helmholtz(const MetricField& m, double c,
                                   const ScalarField& F,
                                   const EllipticConfig& cfg = {},
                                   const ScalarField* guess = nullptr) {
  if (c <= 0)
    throw std::invalid_argument(
        "solve_helmholtz: shift must be positive (operator loses "
        "definiteness)");
  require_same_grid(m.grid(), F.grid, "solve_helmholtz");
  DivFormOperator lap = make_laplace_beltrami(m);
  ScalarField u = guess ? *guess : ScalarField(F.grid);
  detail::cg_solve(lap, c, F.v, u.v, cfg, false);
  return u;
}

// Conformal-pressure equation (-Delta_g + (m+1)) p = (1/m) |Ric + m g|^2,
// with the Ricci tensor supplied (test seam for synthetic curvature).
inline ScalarField solve_pressure_with_ricci(const MetricField& m,
                                             const SymTensorField& ric,
                                             const EllipticConfig& cfg = {},
                                             const ScalarField* guess =
                                                 nullptr) {
  SymTensorField shifted = ric;
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < shifted.size(); ++n)
      shifted.comp[c][n] += kM * m.g.comp[c][n];
  ScalarField rhs = tensor_norm_sq(shifted, m);
  for (double& x : rhs.v) x /= kM;
  ScalarField p = solve_helmholtz(m, kM + 1, rhs, cfg, guess);
  if (p.min_value() < -1e-8)
    throw std::runtime_error(
        "solve_pressure: maximum principle violated, min p = " +
        std::to_string(p.min_value()));
  return p;
}

inline ScalarField solve_pressure(const MetricField& m,
                                  const EllipticConfig& cfg = {},
                                  const ScalarField* guess = nullptr) {
  return solve_pressure_with_ricci(m, ricci(m), cfg, guess);
}

// General form (n-1) Delta p + R0 p = -|Ric - (R0/n) g|^2, R0 < 0,
// rewritten as (-Delta + |R0|/(n-1)) p = |Ric - (R0/n) g|^2 / (n-1).
inline ScalarField solve_pressure_general(const MetricField& m, double R0,
                                          const EllipticConfig& cfg = {},
                                          const ScalarField* guess = nullptr) {
  if (R0 >= 0)
    throw std::invalid_argument(
        "solve_pressure_general: R0 must be negative, otherwise the "
        "operator (n-1)Delta + R0 is not invertible");
  const int n_dim = kDim;
  SymTensorField shifted = ricci(m);
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < shifted.size(); ++n)
      shifted.comp[c][n] -= (R0 / n_dim) * m.g.comp[c][n];
  ScalarField rhs = tensor_norm_sq(shifted, m);
  for (double& x : rhs.v) x /= (n_dim - 1);
  return solve_helmholtz(m, -R0 / (n_dim - 1), rhs, cfg, guess);
}

// pbar = max_x p, deterministic scan.
inline double p_bar(const ScalarField& p) { return p.max_value(); }

}  // namespace crf
