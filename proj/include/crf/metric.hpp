#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include "crf/grid.hpp"

// MetricField: a symmetric positive-definite 2-tensor sampled on the grid,
// with cached inverse and sqrt(det).  Also the initial-data presets.
namespace crf {

inline constexpr double kPdEps = 1e-10;  // smallest admissible eigenvalue

// Eigenvalues of a symmetric 3x3 matrix (ascending), by the standard
// trigonometric closed form.
inline std::array<double, 3> sym3_eigenvalues(const std::array<double, 6>& a) {
  const double a00 = a[0], a01 = a[1], a02 = a[2], a11 = a[3], a12 = a[4],
               a22 = a[5];
  const double q = (a00 + a11 + a22) / 3.0;
  const double b00 = a00 - q, b11 = a11 - q, b22 = a22 - q;
  const double p2 = (b00 * b00 + b11 * b11 + b22 * b22 +
                     2 * (a01 * a01 + a02 * a02 + a12 * a12)) /
                    6.0;
  const double p = std::sqrt(std::max(p2, 0.0));
  if (p < 1e-300) return {q, q, q};
  // det(B)/2 with B = (A - qI)/p
  const double c00 = b00 / p, c01 = a01 / p, c02 = a02 / p, c11 = b11 / p,
               c12 = a12 / p, c22 = b22 / p;
  double detb = c00 * (c11 * c22 - c12 * c12) - c01 * (c01 * c22 - c12 * c02) +
                c02 * (c01 * c12 - c11 * c02);
  double r = detb / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2 * p * std::cos(phi);
  const double e3 = q + 2 * p * std::cos(phi + 2.0 * 3.14159265358979323846 / 3.0);
  const double e2 = 3 * q - e1 - e3;
  return {e3, e2, e1};
}

// det and inverse of a symmetric 3x3 matrix given in sym_index order.
inline double sym3_det(const std::array<double, 6>& a) {
  return a[0] * (a[3] * a[5] - a[4] * a[4]) -
         a[1] * (a[1] * a[5] - a[4] * a[2]) +
         a[2] * (a[1] * a[4] - a[3] * a[2]);
}

inline std::array<double, 6> sym3_inverse(const std::array<double, 6>& a,
                                          double det) {
  std::array<double, 6> inv;
  inv[0] = (a[3] * a[5] - a[4] * a[4]) / det;
  inv[1] = (a[2] * a[4] - a[1] * a[5]) / det;
  inv[2] = (a[1] * a[4] - a[2] * a[3]) / det;
  inv[3] = (a[0] * a[5] - a[2] * a[2]) / det;
  inv[4] = (a[1] * a[2] - a[0] * a[4]) / det;
  inv[5] = (a[0] * a[3] - a[1] * a[1]) / det;
  return inv;
}

struct MetricField {
  SymTensorField g;       // g_ij
  SymTensorField ginv;    // g^ij
  ScalarField sqrt_det;   // sqrt(det g)

  const Grid& grid() const { return g.grid; }

  std::array<double, 6> at(std::size_t node) const {
    return {g.comp[0][node], g.comp[1][node], g.comp[2][node],
            g.comp[3][node], g.comp[4][node], g.comp[5][node]};
  }
  std::array<double, 6> inv_at(std::size_t node) const {
    return {ginv.comp[0][node], ginv.comp[1][node], ginv.comp[2][node],
            ginv.comp[3][node], ginv.comp[4][node], ginv.comp[5][node]};
  }

  // Build caches from components; rejects non-SPD input.
  static MetricField from_components(const SymTensorField& comps) {
    MetricField m;
    m.g = comps;
    m.ginv = SymTensorField(comps.grid);
    m.sqrt_det = ScalarField(comps.grid);
    double worst = 1e300;
    std::size_t worst_node = 0;
    for (std::size_t n = 0; n < comps.size(); ++n) {
      std::array<double, 6> a = {comps.comp[0][n], comps.comp[1][n],
                                 comps.comp[2][n], comps.comp[3][n],
                                 comps.comp[4][n], comps.comp[5][n]};
      auto ev = sym3_eigenvalues(a);
      if (ev[0] < worst) {
        worst = ev[0];
        worst_node = n;
      }
      const double det = sym3_det(a);
      if (det > 0) {
        auto inv = sym3_inverse(a, det);
        for (int c = 0; c < 6; ++c) m.ginv.comp[c][n] = inv[c];
        m.sqrt_det.v[n] = std::sqrt(det);
      }
    }
    if (worst <= kPdEps)
      throw std::invalid_argument(
          "MetricField: not positive definite, worst eigenvalue " +
          std::to_string(worst) + " at node " + std::to_string(worst_node));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Initial-data presets.

inline MetricField metric_flat(const Grid& grid) {
  SymTensorField t(grid);
  std::fill(t.comp[0].begin(), t.comp[0].end(), 1.0);
  std::fill(t.comp[3].begin(), t.comp[3].end(), 1.0);
  std::fill(t.comp[5].begin(), t.comp[5].end(), 1.0);
  return MetricField::from_components(t);
}

// g = e^{2 phi} delta with phi = amplitude * sin(mode . x).
inline MetricField metric_conformal(const Grid& grid, double amplitude,
                                    const std::array<int, 3>& mode = {1, 0,
                                                                      0}) {
  SymTensorField t(grid);
  std::size_t idx = 0;
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j)
      for (int k = 0; k < grid.n; ++k, ++idx) {
        auto x = grid.coords(i, j, k);
        const double phi =
            amplitude * std::sin(mode[0] * x[0] + mode[1] * x[1] +
                                 mode[2] * x[2]);
        const double c = std::exp(2.0 * phi);
        t.comp[0][idx] = c;
        t.comp[3][idx] = c;
        t.comp[5][idx] = c;
      }
  return MetricField::from_components(t);
}

// Diagonal metric with per-axis scale functions a_i(x) = exp(2 s_i sin(x^i)).
inline MetricField metric_anisotropic(const Grid& grid,
                                      const std::array<double, 3>& scales) {
  SymTensorField t(grid);
  std::size_t idx = 0;
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j)
      for (int k = 0; k < grid.n; ++k, ++idx) {
        auto x = grid.coords(i, j, k);
        t.comp[0][idx] = std::exp(2.0 * scales[0] * std::sin(x[0]));
        t.comp[3][idx] = std::exp(2.0 * scales[1] * std::sin(x[1]));
        t.comp[5][idx] = std::exp(2.0 * scales[2] * std::sin(x[2]));
      }
  return MetricField::from_components(t);
}

// Identity plus a seeded trigonometric perturbation of every component.
// amplitude <= 0.3 keeps the result safely positive definite.
inline MetricField metric_random_smooth(const Grid& grid, std::uint64_t seed,
                                        double amplitude, int max_mode = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  struct Mode {
    int c;                 // component
    double a, b;           // cos / sin weights
    std::array<int, 3> k;  // wave vector
  };
  std::vector<Mode> modes;
  for (int c = 0; c < 6; ++c)
    for (int k0 = 0; k0 <= max_mode; ++k0)
      for (int k1 = -max_mode; k1 <= max_mode; ++k1)
        for (int k2 = -max_mode; k2 <= max_mode; ++k2) {
          if (k0 == 0 && k1 == 0 && k2 == 0) continue;
          if (k0 == 0 && (k1 < 0 || (k1 == 0 && k2 < 0))) continue;
          modes.push_back({c, unif(rng), unif(rng), {k0, k1, k2}});
        }
  // Normalize each component so its perturbation sup-norm is <= amplitude;
  // by Gershgorin, amplitude <= 0.3 then keeps the metric positive definite.
  std::array<double, 6> budget{};
  for (const auto& m : modes) budget[m.c] += std::fabs(m.a) + std::fabs(m.b);
  std::array<double, 6> scale{};
  for (int c = 0; c < 6; ++c)
    scale[c] = budget[c] > 0 ? amplitude / budget[c] : 0.0;

  SymTensorField t(grid);
  std::fill(t.comp[0].begin(), t.comp[0].end(), 1.0);
  std::fill(t.comp[3].begin(), t.comp[3].end(), 1.0);
  std::fill(t.comp[5].begin(), t.comp[5].end(), 1.0);
  std::size_t idx = 0;
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j)
      for (int k = 0; k < grid.n; ++k, ++idx) {
        auto x = grid.coords(i, j, k);
        for (const auto& m : modes) {
          const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
          t.comp[m.c][idx] +=
              scale[m.c] * (m.a * std::cos(ph) + m.b * std::sin(ph));
        }
      }
  return MetricField::from_components(t);
}

struct MetricPresetParams {
  double amplitude = 0.1;
  std::array<int, 3> mode = {1, 0, 0};
  std::array<double, 3> scales = {0.1, 0.0, 0.0};
  std::uint64_t seed = 0;
  int max_mode = 2;
};

inline MetricField metric_from_preset(const std::string& preset,
                                      const MetricPresetParams& p,
                                      const Grid& grid) {
  if (preset == "flat") return metric_flat(grid);
  if (preset == "conformal") return metric_conformal(grid, p.amplitude, p.mode);
  if (preset == "anisotropic") return metric_anisotropic(grid, p.scales);
  if (preset == "random-smooth")
    return metric_random_smooth(grid, p.seed, p.amplitude, p.max_mode);
  throw std::invalid_argument("metric_from_preset: unknown preset '" + preset +
                              "'");
}

}  // namespace crf
