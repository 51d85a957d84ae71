#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Periodic structured grid over the 3-torus [0,2pi)^3 and the node-indexed
// field types (scalar / vector / symmetric 2-tensor / rank-3) that every
// other module works with.
namespace crf {

inline constexpr int kDim = 3;            // n = m+1
inline constexpr int kM = 2;              // m
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Linear index of the (i,j) component of a symmetric 3x3 tensor,
// ordered (0,0),(0,1),(0,2),(1,1),(1,2),(2,2).
inline constexpr int sym_index(int i, int j) {
  if (i > j) std::swap(i, j);
  return i * (5 - i) / 2 + j;
}

struct Grid {
  int n = 0;           // nodes per axis, N >= 8
  int fd_order = 4;    // centered stencil order, 2 or 4
  double spacing = 0;  // 2pi / N

  Grid() = default;
  Grid(int nodes_per_axis, int order = 4)
      : n(nodes_per_axis), fd_order(order), spacing(kTwoPi / nodes_per_axis) {
    if (nodes_per_axis < 8)
      throw std::invalid_argument("Grid: need at least 8 nodes per axis");
    if (order != 2 && order != 4)
      throw std::invalid_argument("Grid: fd_order must be 2 or 4");
  }

  std::size_t num_nodes() const {
    return static_cast<std::size_t>(n) * n * n;
  }
  double cell_volume() const { return spacing * spacing * spacing; }

  int wrap(int i) const {
    i %= n;
    return i < 0 ? i + n : i;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(wrap(i)) * n + wrap(j)) * n + wrap(k);
  }
  std::array<double, 3> coords(int i, int j, int k) const {
    return {i * spacing, j * spacing, k * spacing};
  }

  bool operator==(const Grid& o) const {
    return n == o.n && fd_order == o.fd_order;
  }
};

struct ScalarField {
  Grid grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0)
      : grid(g), v(g.num_nodes(), fill) {}

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return v.size(); }

  double& at(int i, int j, int k) { return v[grid.index(i, j, k)]; }
  double at(int i, int j, int k) const { return v[grid.index(i, j, k)]; }

  template <class F>
  static ScalarField sample(const Grid& g, F&& f) {
    ScalarField out(g);
    std::size_t idx = 0;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k, ++idx) {
          auto x = g.coords(i, j, k);
          out.v[idx] = f(x[0], x[1], x[2]);
        }
    return out;
  }

  double max_abs() const {
    double m = 0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }
  double min_value() const {
    double m = v.empty() ? 0.0 : v[0];
    for (double x : v) m = std::min(m, x);
    return m;
  }
  double max_value() const {
    double m = v.empty() ? 0.0 : v[0];
    for (double x : v) m = std::max(m, x);
    return m;
  }
};

struct VectorField {
  Grid grid;
  std::array<std::vector<double>, 3> comp;

  VectorField() = default;
  explicit VectorField(const Grid& g) : grid(g) {
    for (auto& c : comp) c.assign(g.num_nodes(), 0.0);
  }
  std::size_t size() const { return comp[0].size(); }
};

struct SymTensorField {
  Grid grid;
  std::array<std::vector<double>, 6> comp;  // sym_index order

  SymTensorField() = default;
  explicit SymTensorField(const Grid& g) : grid(g) {
    for (auto& c : comp) c.assign(g.num_nodes(), 0.0);
  }
  std::size_t size() const { return comp[0].size(); }

  double value(int i, int j, std::size_t node) const {
    return comp[sym_index(i, j)][node];
  }
  double max_abs() const {
    double m = 0;
    for (const auto& c : comp)
      for (double x : c) m = std::max(m, std::fabs(x));
    return m;
  }
};

// Christoffel symbols Gamma^k_{ij}: one symmetric (i,j) slot per upper index.
struct Rank3Field {
  Grid grid;
  std::array<SymTensorField, 3> upper;  // upper[k] holds Gamma^k_{..}

  Rank3Field() = default;
  explicit Rank3Field(const Grid& g) : grid(g) {
    for (auto& u : upper) u = SymTensorField(g);
  }
};

inline void require_same_grid(const Grid& a, const Grid& b,
                              const char* where) {
  if (!(a == b))
    throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

}  // namespace crf
