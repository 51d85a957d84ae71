#pragma once

#include "crf/grid.hpp"

// Periodic finite-difference stencils.  Three families:
//   d_centered      - centered first derivative at nodes (order 2 or 4)
//   d2_centered     - centered second derivative at nodes
//   staggered D+/div/interp - forward difference to half nodes, half-node
//                     coefficient interpolation, and the exact negative
//                     adjoint of D+ mapping half-node fluxes back to nodes.
// The staggered triple is what makes divergence-form operators exactly
// self-adjoint under the plain node-sum inner product.
namespace crf {

namespace detail {

// Apply a 1-D periodic stencil along `axis`.  offsets/weights are node
// offsets relative to the output node (or half node, see callers).
template <int NOFF>
inline void apply_axis_stencil(const Grid& g, const std::vector<double>& in,
                               std::vector<double>& out, int axis,
                               const std::array<int, NOFF>& offsets,
                               const std::array<double, NOFF>& weights) {
  const int n = g.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int s = 0; s < NOFF; ++s) {
          int ii = i, jj = j, kk = k;
          (axis == 0 ? ii : axis == 1 ? jj : kk) += offsets[s];
          acc += weights[s] * in[g.index(ii, jj, kk)];
        }
        out[g.index(i, j, k)] = acc;
      }
}

}  // namespace detail

// Centered first derivative d/dx^axis.
inline void d_centered(const Grid& g, const std::vector<double>& in,
                       std::vector<double>& out, int axis) {
  const double h = g.spacing;
  if (g.fd_order == 2) {
    detail::apply_axis_stencil<2>(g, in, out, axis, {1, -1},
                                  {0.5 / h, -0.5 / h});
  } else {
    detail::apply_axis_stencil<4>(
        g, in, out, axis, {1, -1, 2, -2},
        {8.0 / (12 * h), -8.0 / (12 * h), -1.0 / (12 * h), 1.0 / (12 * h)});
  }
}

// Centered second derivative d^2/d(x^axis)^2.
inline void d2_centered(const Grid& g, const std::vector<double>& in,
                        std::vector<double>& out, int axis) {
  const double h2 = g.spacing * g.spacing;
  if (g.fd_order == 2) {
    detail::apply_axis_stencil<3>(g, in, out, axis, {1, 0, -1},
                                  {1.0 / h2, -2.0 / h2, 1.0 / h2});
  } else {
    detail::apply_axis_stencil<5>(g, in, out, axis, {2, 1, 0, -1, -2},
                                  {-1.0 / (12 * h2), 16.0 / (12 * h2),
                                   -30.0 / (12 * h2), 16.0 / (12 * h2),
                                   -1.0 / (12 * h2)});
  }
}

// Forward difference to half nodes: out[node i] holds the value at i+1/2.
inline void d_staggered_forward(const Grid& g, const std::vector<double>& in,
                                std::vector<double>& out, int axis) {
  const double h = g.spacing;
  if (g.fd_order == 2) {
    detail::apply_axis_stencil<2>(g, in, out, axis, {1, 0},
                                  {1.0 / h, -1.0 / h});
  } else {
    detail::apply_axis_stencil<4>(
        g, in, out, axis, {1, 0, 2, -1},
        {27.0 / (24 * h), -27.0 / (24 * h), -1.0 / (24 * h), 1.0 / (24 * h)});
  }
}

// Exact negative adjoint of d_staggered_forward: half-node fluxes -> nodes.
inline void staggered_divergence(const Grid& g, const std::vector<double>& in,
                                 std::vector<double>& out, int axis) {
  const double h = g.spacing;
  if (g.fd_order == 2) {
    detail::apply_axis_stencil<2>(g, in, out, axis, {0, -1},
                                  {1.0 / h, -1.0 / h});
  } else {
    detail::apply_axis_stencil<4>(
        g, in, out, axis, {0, -1, 1, -2},
        {27.0 / (24 * h), -27.0 / (24 * h), -1.0 / (24 * h), 1.0 / (24 * h)});
  }
}

// Coefficient interpolation to half nodes, same accuracy as the stencils.
inline void interp_half(const Grid& g, const std::vector<double>& in,
                        std::vector<double>& out, int axis) {
  if (g.fd_order == 2) {
    detail::apply_axis_stencil<2>(g, in, out, axis, {0, 1}, {0.5, 0.5});
  } else {
    detail::apply_axis_stencil<4>(g, in, out, axis, {0, 1, -1, 2},
                                  {9.0 / 16, 9.0 / 16, -1.0 / 16, -1.0 / 16});
  }
}

}  // namespace crf
