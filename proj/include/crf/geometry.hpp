#pragma once

#include "crf/metric.hpp"
#include "crf/stencil.hpp"

// Curvature, first/second covariant derivatives, norms and integration on
// the discrete manifold.  All derivatives use centered stencils of the
// grid's fd_order.
namespace crf {

// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).
inline Rank3Field christoffel(const MetricField& m) {
  const Grid& g = m.grid();
  Rank3Field out(g);
  // dg[a][c] = d_a g_{..c..}
  std::array<std::array<std::vector<double>, 6>, 3> dg;
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 6; ++c) {
      dg[a][c].assign(g.num_nodes(), 0.0);
      d_centered(g, m.g.comp[c], dg[a][c], a);
    }
  const std::size_t nn = g.num_nodes();
  for (std::size_t n = 0; n < nn; ++n) {
    auto inv = m.inv_at(n);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double low[3];  // Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        for (int l = 0; l < 3; ++l)
          low[l] = 0.5 * (dg[i][sym_index(j, l)][n] +
                          dg[j][sym_index(i, l)][n] -
                          dg[l][sym_index(i, j)][n]);
        for (int k = 0; k < 3; ++k) {
          double acc = 0;
          for (int l = 0; l < 3; ++l) acc += inv[sym_index(k, l)] * low[l];
          out.upper[k].comp[sym_index(i, j)][n] = acc;
        }
      }
  }
  return out;
}

// Coordinate Ricci tensor
//   R_ij = d_k Gamma^k_ij - d_i Gamma^k_kj + Gamma^k_kl Gamma^l_ij
//          - Gamma^k_il Gamma^l_kj,
// symmetrized (the second term is symmetric only to stencil error).
inline SymTensorField ricci(const MetricField& m) {
  const Grid& g = m.grid();
  const Rank3Field gam = christoffel(m);
  const std::size_t nn = g.num_nodes();

  // d_k Gamma^k_{ij}, accumulated over k.
  SymTensorField div_gam(g);
  {
    std::vector<double> tmp(nn);
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < 6; ++c) {
        d_centered(g, gam.upper[k].comp[c], tmp, k);
        for (std::size_t n = 0; n < nn; ++n) div_gam.comp[c][n] += tmp[n];
      }
  }
  // trace vector T_j = Gamma^k_{kj} and its derivatives d_i T_j.
  std::array<std::vector<double>, 3> trace;
  for (int j = 0; j < 3; ++j) {
    trace[j].assign(nn, 0.0);
    for (int k = 0; k < 3; ++k)
      for (std::size_t n = 0; n < nn; ++n)
        trace[j][n] += gam.upper[k].comp[sym_index(k, j)][n];
  }
  std::array<std::array<std::vector<double>, 3>, 3> dtrace;  // [i][j]
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      dtrace[i][j].assign(nn, 0.0);
      d_centered(g, trace[j], dtrace[i][j], i);
    }

  SymTensorField out(g);
  for (std::size_t n = 0; n < nn; ++n) {
    double gam_n[3][3][3];
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          gam_n[k][i][j] = gam.upper[k].comp[sym_index(i, j)][n];
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double quad = 0;
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l)
            quad += gam_n[k][k][l] * gam_n[l][i][j] -
                    gam_n[k][i][l] * gam_n[l][k][j];
        const double dtr = 0.5 * (dtrace[i][j][n] + dtrace[j][i][n]);
        out.comp[sym_index(i, j)][n] =
            div_gam.comp[sym_index(i, j)][n] - dtr + quad;
      }
  }
  return out;
}

inline ScalarField scalar_curvature_from(const MetricField& m,
                                         const SymTensorField& ric) {
  ScalarField out(m.grid());
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto inv = m.inv_at(n);
    double r = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r += inv[sym_index(i, j)] * ric.value(i, j, n);
    out.v[n] = r;
  }
  return out;
}

inline ScalarField scalar_curvature(const MetricField& m) {
  return scalar_curvature_from(m, ricci(m));
}

// Partial derivatives (d_1 u, d_2 u, d_3 u) as a lowered co-vector.
inline VectorField partials(const ScalarField& u) {
  VectorField out(u.grid);
  for (int a = 0; a < 3; ++a) d_centered(u.grid, u.v, out.comp[a], a);
  return out;
}

// (grad u)^i = g^{ij} d_j u.
inline VectorField gradient(const ScalarField& u, const MetricField& m) {
  require_same_grid(u.grid, m.grid(), "gradient");
  VectorField du = partials(u);
  VectorField out(u.grid);
  for (std::size_t n = 0; n < u.size(); ++n) {
    auto inv = m.inv_at(n);
    for (int i = 0; i < 3; ++i) {
      double acc = 0;
      for (int j = 0; j < 3; ++j)
        acc += inv[sym_index(i, j)] * du.comp[j][n];
      out.comp[i][n] = acc;
    }
  }
  return out;
}

// |grad u|^2 = g^{ij} d_i u d_j u  (pointwise >= 0 for SPD metrics).
inline ScalarField grad_norm_sq(const ScalarField& u, const MetricField& m) {
  require_same_grid(u.grid, m.grid(), "grad_norm_sq");
  VectorField du = partials(u);
  ScalarField out(u.grid);
  for (std::size_t n = 0; n < u.size(); ++n) {
    auto inv = m.inv_at(n);
    double acc = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        acc += inv[sym_index(i, j)] * du.comp[i][n] * du.comp[j][n];
    out.v[n] = acc;
  }
  return out;
}

// g-inner product of two gradients, <grad u, grad w>_g = g^{ij} d_i u d_j w.
inline ScalarField grad_inner(const ScalarField& u, const ScalarField& w,
                              const MetricField& m) {
  VectorField du = partials(u);
  VectorField dw = partials(w);
  ScalarField out(u.grid);
  for (std::size_t n = 0; n < u.size(); ++n) {
    auto inv = m.inv_at(n);
    double acc = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        acc += inv[sym_index(i, j)] * du.comp[i][n] * dw.comp[j][n];
    out.v[n] = acc;
  }
  return out;
}

// (Hess u)_ij = d_i d_j u - Gamma^k_ij d_k u, exactly symmetric.
inline SymTensorField hessian_from(const ScalarField& u, const Rank3Field& gam) {
  const Grid& g = u.grid;
  const std::size_t nn = g.num_nodes();
  SymTensorField out(g);
  VectorField du = partials(u);
  std::vector<double> tmp(nn);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const int c = sym_index(i, j);
      if (i == j) {
        d2_centered(g, u.v, tmp, i);
      } else {
        d_centered(g, du.comp[j], tmp, i);
      }
      for (std::size_t n = 0; n < nn; ++n) {
        double gterm = 0;
        for (int k = 0; k < 3; ++k)
          gterm += gam.upper[k].comp[c][n] * du.comp[k][n];
        out.comp[c][n] = tmp[n] - gterm;
      }
    }
  return out;
}

inline SymTensorField hessian(const ScalarField& u, const MetricField& m) {
  require_same_grid(u.grid, m.grid(), "hessian");
  return hessian_from(u, christoffel(m));
}

// |T|^2 = g^{ik} g^{jl} T_ij T_kl.
inline ScalarField tensor_norm_sq(const SymTensorField& t,
                                  const MetricField& m) {
  require_same_grid(t.grid, m.grid(), "tensor_norm_sq");
  ScalarField out(t.grid);
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto inv = m.inv_at(n);
    // raise one index: U^i_j = g^{ik} T_kj
    double up[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (int k = 0; k < 3; ++k)
          acc += inv[sym_index(i, k)] * t.value(k, j, n);
        up[i][j] = acc;
      }
    double acc = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) acc += up[i][j] * up[j][i];
    out.v[n] = acc;
  }
  return out;
}

// T(X, X) for a lowered symmetric tensor and a raised vector field.
inline ScalarField tensor_apply(const SymTensorField& t, const VectorField& x) {
  ScalarField out(t.grid);
  for (std::size_t n = 0; n < out.size(); ++n) {
    double acc = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        acc += t.value(i, j, n) * x.comp[i][n] * x.comp[j][n];
    out.v[n] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integration.  A measure is a per-node weight already including the cell
// volume; integrate is a plain fixed-order node sum.

struct Measure {
  Grid grid;
  std::vector<double> w;  // weight per node, includes cell volume

  Measure() = default;
  explicit Measure(const Grid& g) : grid(g), w(g.num_nodes(), 0.0) {}

  double total() const {
    double acc = 0;
    for (double x : w) acc += x;
    return acc;
  }
};

// d mu = sqrt(det g) * cellvol.
inline Measure measure_mu(const MetricField& m) {
  Measure out(m.grid());
  const double cv = m.grid().cell_volume();
  for (std::size_t n = 0; n < out.w.size(); ++n)
    out.w[n] = m.sqrt_det.v[n] * cv;
  return out;
}

inline double integrate(const ScalarField& u, const Measure& mu) {
  require_same_grid(u.grid, mu.grid, "integrate");
  double acc = 0;
  for (std::size_t n = 0; n < u.size(); ++n) acc += u.v[n] * mu.w[n];
  return acc;
}

inline double integrate_product(const ScalarField& u, const ScalarField& w,
                                const Measure& mu) {
  double acc = 0;
  for (std::size_t n = 0; n < u.size(); ++n) acc += u.v[n] * w.v[n] * mu.w[n];
  return acc;
}

}  // namespace crf
