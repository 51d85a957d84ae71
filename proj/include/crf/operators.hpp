#pragma once

#include "crf/geometry.hpp"

// Divergence-form elliptic operators.  The discrete Laplace-Beltrami and
// drifting Laplacian are assembled as
//   L u = (1/W) [ sum_a Div_a( mu_a(W g^{aa}) D+_a u )
//               + sum_{a<b} ( D0_a(W g^{ab} D0_b u) + D0_b(W g^{ab} D0_a u) ) ]
// with W = sqrt(det g) (plain) or H sqrt(det g) (drifting).  Div_a is the
// exact negative adjoint of D+_a and D0 is exactly skew-adjoint, so L is
// exactly self-adjoint in the W-weighted node-sum inner product.
namespace crf {

class DivFormOperator {
 public:
  DivFormOperator() = default;

  // weight: per-node density W (must be > 0 everywhere).
  DivFormOperator(const MetricField& m, const std::vector<double>& weight)
      : grid_(m.grid()) {
    const std::size_t nn = grid_.num_nodes();
    weight_ = weight;
    inv_weight_.resize(nn);
    for (std::size_t n = 0; n < nn; ++n) inv_weight_[n] = 1.0 / weight[n];

    std::vector<double> coef(nn);
    for (int a = 0; a < 3; ++a) {
      for (std::size_t n = 0; n < nn; ++n)
        coef[n] = weight[n] * m.ginv.comp[sym_index(a, a)][n];
      half_coef_[a].assign(nn, 0.0);
      interp_half(grid_, coef, half_coef_[a], a);
    }
    static constexpr int pair_a[3] = {0, 0, 1};
    static constexpr int pair_b[3] = {1, 2, 2};
    has_mixed_ = false;
    for (int p = 0; p < 3; ++p) {
      mixed_coef_[p].assign(nn, 0.0);
      const int c = sym_index(pair_a[p], pair_b[p]);
      for (std::size_t n = 0; n < nn; ++n)
        mixed_coef_[p][n] = weight[n] * m.ginv.comp[c][n];
      for (std::size_t n = 0; n < nn; ++n)
        if (mixed_coef_[p][n] != 0.0) {
          has_mixed_ = true;
          break;
        }
    }
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& weight() const { return weight_; }

  // out = L in.
  void apply(const std::vector<double>& in, std::vector<double>& out) const {
    const std::size_t nn = grid_.num_nodes();
    out.assign(nn, 0.0);
    std::vector<double> flux(nn), div(nn);
    for (int a = 0; a < 3; ++a) {
      d_staggered_forward(grid_, in, flux, a);
      for (std::size_t n = 0; n < nn; ++n) flux[n] *= half_coef_[a][n];
      staggered_divergence(grid_, flux, div, a);
      for (std::size_t n = 0; n < nn; ++n) out[n] += div[n];
    }
    if (has_mixed_) {
      static constexpr int pair_a[3] = {0, 0, 1};
      static constexpr int pair_b[3] = {1, 2, 2};
      std::array<std::vector<double>, 3> d0;
      for (int a = 0; a < 3; ++a) {
        d0[a].assign(nn, 0.0);
        d_centered(grid_, in, d0[a], a);
      }
      std::vector<double> t(nn), dt(nn);
      for (int p = 0; p < 3; ++p) {
        const int a = pair_a[p], b = pair_b[p];
        for (std::size_t n = 0; n < nn; ++n)
          t[n] = mixed_coef_[p][n] * d0[b][n];
        d_centered(grid_, t, dt, a);
        for (std::size_t n = 0; n < nn; ++n) out[n] += dt[n];
        for (std::size_t n = 0; n < nn; ++n)
          t[n] = mixed_coef_[p][n] * d0[a][n];
        d_centered(grid_, t, dt, b);
        for (std::size_t n = 0; n < nn; ++n) out[n] += dt[n];
      }
    }
    for (std::size_t n = 0; n < nn; ++n) out[n] *= inv_weight_[n];
  }

  // Exact diagonal of L (mixed terms have zero center weight).
  std::vector<double> diagonal() const {
    const std::size_t nn = grid_.num_nodes();
    const int n1 = grid_.n;
    const double h = grid_.spacing;
    std::vector<double> diag(nn, 0.0);
    // (relative half-node index, coefficient of the center node in that flux)
    struct Touch {
      int off;
      double c;
    };
    std::vector<Touch> touches;
    if (grid_.fd_order == 2) {
      touches = {{0, -1.0 / h}, {-1, 1.0 / h}};
    } else {
      touches = {{1, 1.0 / (24 * h)},
                 {0, -27.0 / (24 * h)},
                 {-1, 27.0 / (24 * h)},
                 {-2, -1.0 / (24 * h)}};
    }
    for (int a = 0; a < 3; ++a) {
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j)
          for (int k = 0; k < n1; ++k) {
            const std::size_t n = grid_.index(i, j, k);
            double acc = 0;
            for (const auto& t : touches) {
              int ii = i, jj = j, kk = k;
              (a == 0 ? ii : a == 1 ? jj : kk) += t.off;
              acc -= half_coef_[a][grid_.index(ii, jj, kk)] * t.c * t.c;
            }
            diag[n] += acc;
          }
    }
    for (std::size_t n = 0; n < nn; ++n) diag[n] *= inv_weight_[n];
    return diag;
  }

 private:
  Grid grid_;
  std::vector<double> weight_, inv_weight_;
  std::array<std::vector<double>, 3> half_coef_;   // mu_a(W g^{aa})
  std::array<std::vector<double>, 3> mixed_coef_;  // W g^{ab}, (01),(02),(12)
  bool has_mixed_ = false;
};

inline DivFormOperator make_laplace_beltrami(const MetricField& m) {
  return DivFormOperator(m, m.sqrt_det.v);
}

inline DivFormOperator make_drifting_laplacian(const MetricField& m,
                                               const ScalarField& H) {
  require_same_grid(m.grid(), H.grid, "drifting_laplacian");
  const std::size_t nn = m.grid().num_nodes();
  std::vector<double> w(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    if (H.v[n] <= 0)
      throw std::invalid_argument(
          "drifting_laplacian: H must be positive everywhere");
    w[n] = H.v[n] * m.sqrt_det.v[n];
  }
  return DivFormOperator(m, w);
}

inline ScalarField laplace_beltrami(const ScalarField& u,
                                    const MetricField& m) {
  require_same_grid(u.grid, m.grid(), "laplace_beltrami");
  ScalarField out(u.grid);
  make_laplace_beltrami(m).apply(u.v, out.v);
  return out;
}

inline ScalarField drifting_laplacian(const ScalarField& u,
                                      const MetricField& m,
                                      const ScalarField& H) {
  require_same_grid(u.grid, m.grid(), "drifting_laplacian");
  ScalarField out(u.grid);
  make_drifting_laplacian(m, H).apply(u.v, out.v);
  return out;
}

// Bakry-Emery tensor Ric_f = Ric + Hess f with f = -log H (the spatially
// constant normalization factor of H drops out):
//   Hess f = -(Hess H)/H + (dH x dH)/H^2.
inline SymTensorField bakry_emery(const MetricField& m, const ScalarField& H) {
  require_same_grid(m.grid(), H.grid, "bakry_emery");
  for (double x : H.v)
    if (x <= 0)
      throw std::invalid_argument("bakry_emery: H must be positive");
  SymTensorField out = ricci(m);
  SymTensorField hess_h = hessian(H, m);
  VectorField dh = partials(H);
  for (std::size_t n = 0; n < H.size(); ++n) {
    const double hv = H.v[n];
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        const int c = sym_index(i, j);
        out.comp[c][n] +=
            -hess_h.comp[c][n] / hv + dh.comp[i][n] * dh.comp[j][n] / (hv * hv);
      }
  }
  return out;
}

// Largest generalized eigenvalue of (T, g) maximized over nodes: the
// smallest mu with T <= mu g pointwise.
inline double max_relative_eigenvalue(const SymTensorField& t,
                                      const MetricField& m) {
  double mu = -1e300;
  for (std::size_t n = 0; n < t.size(); ++n) {
    // Cholesky of g: g = L L^T.
    auto a = m.at(n);
    const double l00 = std::sqrt(a[0]);
    const double l10 = a[1] / l00, l20 = a[2] / l00;
    const double l11 = std::sqrt(a[3] - l10 * l10);
    const double l21 = (a[4] - l20 * l10) / l11;
    const double l22 = std::sqrt(a[5] - l20 * l20 - l21 * l21);
    // B = L^{-1} T L^{-T}: solve L X = T, then L Y^T = X^T.
    double tm[3][3] = {{t.value(0, 0, n), t.value(0, 1, n), t.value(0, 2, n)},
                       {t.value(1, 0, n), t.value(1, 1, n), t.value(1, 2, n)},
                       {t.value(2, 0, n), t.value(2, 1, n), t.value(2, 2, n)}};
    double x[3][3];
    for (int c = 0; c < 3; ++c) {
      x[0][c] = tm[0][c] / l00;
      x[1][c] = (tm[1][c] - l10 * x[0][c]) / l11;
      x[2][c] = (tm[2][c] - l20 * x[0][c] - l21 * x[1][c]) / l22;
    }
    double b[3][3];
    for (int r = 0; r < 3; ++r) {
      b[r][0] = x[r][0] / l00;
      b[r][1] = (x[r][1] - l10 * b[r][0]) / l11;
      b[r][2] = (x[r][2] - l20 * b[r][0] - l21 * b[r][1]) / l22;
    }
    auto ev = sym3_eigenvalues({b[0][0], 0.5 * (b[0][1] + b[1][0]),
                                0.5 * (b[0][2] + b[2][0]), b[1][1],
                                0.5 * (b[1][2] + b[2][1]), b[2][2]});
    mu = std::max(mu, ev[2]);
  }
  return mu;
}

// Weighted measure bundle: positive density H, d mu, dV = H d mu, and the
// backward time tau = T - t.  f is derived for reporting only.
struct WeightedMeasure {
  ScalarField H;
  Measure mu;   // sqrt(det g) cellvol
  Measure V;    // H sqrt(det g) cellvol
  double tau = 0;

  static WeightedMeasure make(const MetricField& m, const ScalarField& H,
                              double tau) {
    WeightedMeasure out;
    out.H = H;
    out.mu = measure_mu(m);
    out.V = out.mu;
    for (std::size_t n = 0; n < H.size(); ++n) out.V.w[n] *= H.v[n];
    out.tau = tau;
    return out;
  }

  // f = -log((4 pi tau)^{(m+1)/2} H); only meaningful for tau > 0.
  ScalarField f_report() const {
    if (tau <= 0)
      throw std::domain_error("f_report: tau must be positive");
    ScalarField out(H.grid);
    const double c =
        0.5 * (kM + 1) * std::log(4.0 * 3.14159265358979323846 * tau);
    for (std::size_t n = 0; n < H.size(); ++n)
      out.v[n] = -c - std::log(H.v[n]);
    return out;
  }
};

}  // namespace crf
