#pragma once

#include <functional>
#include <optional>

#include "crf/elliptic.hpp"

// Time integration: RK4 method-of-lines for the metric system (pressure
// re-solved at every stage), the backward conjugate-heat pass for the
// weighted density, and the forward (possibly forced) heat equation.
namespace crf {

struct FlowState {
  double t = 0;
  SymTensorField g;
  ScalarField p;
  double p_bar = 0;
};

struct HeatForcing {
  double a = 1.0;
  double b = 0.0;
  bool active = false;

  void validate() const {
    if (std::fabs(a) > 1.0 || std::fabs(b) > 1.0)
      throw std::invalid_argument("HeatForcing: need |a| <= 1 and |b| <= 1");
  }
};

struct FlowConfig {
  double T = 0.1;
  double dt = 0;            // <= 0: use the step policy
  double safety = 0.25;     // dt = safety h^2 / max trace(g^inv)
  bool general_mode = false;
  double R0 = -6.0;         // only in general mode
  EllipticConfig elliptic;
};

struct FlowAbort : std::runtime_error {
  double t_fail;
  FlowAbort(const std::string& msg, double t)
      : std::runtime_error(msg + " at t = " + std::to_string(t)), t_fail(t) {}
};

// Whole-run record: one snapshot per accepted step.
struct FlowHistory {
  Grid grid;
  double T = 0;
  std::vector<double> times;
  std::vector<SymTensorField> g;
  std::vector<ScalarField> sqrt_det;  // cached per step
  std::vector<ScalarField> p;
  std::vector<double> p_bar;

  bool has_H = false;
  std::vector<ScalarField> H;  // positive density, unit dV mass
  double conjugate_mass_drift = 0;

  bool has_v = false;
  std::size_t v_start = 0;  // first step index with valid v
  std::vector<ScalarField> v;
  HeatForcing forcing;
  // max over nodes of |forcing| - p_bar (|v| + |grad v|), per step
  std::vector<double> forcing_certificate;

  std::size_t steps() const { return times.size(); }

  MetricField metric_at(std::size_t i) const {
    return rebuild_metric(g[i]);
  }
  Measure mu_at(std::size_t i) const {
    Measure out(grid);
    const double cv = grid.cell_volume();
    for (std::size_t n = 0; n < out.w.size(); ++n)
      out.w[n] = sqrt_det[i].v[n] * cv;
    return out;
  }
  Measure dV_at(std::size_t i) const {
    if (!has_H) throw std::logic_error("FlowHistory: no conjugate pass yet");
    Measure out = mu_at(i);
    for (std::size_t n = 0; n < out.w.size(); ++n) out.w[n] *= H[i].v[n];
    return out;
  }
  double tau(std::size_t i) const { return T - times[i]; }

  std::size_t index_at(double t) const {
    // nearest stored time
    std::size_t best = 0;
    double d = 1e300;
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::fabs(times[i] - t) < d) {
        d = std::fabs(times[i] - t);
        best = i;
      }
    return best;
  }

  // Metric caches without the (redundant) SPD re-check; interpolants of
  // stored SPD metrics are SPD.
  static MetricField rebuild_metric(const SymTensorField& comps) {
    MetricField m;
    m.g = comps;
    m.ginv = SymTensorField(comps.grid);
    m.sqrt_det = ScalarField(comps.grid);
    for (std::size_t n = 0; n < comps.size(); ++n) {
      std::array<double, 6> a = {comps.comp[0][n], comps.comp[1][n],
                                 comps.comp[2][n], comps.comp[3][n],
                                 comps.comp[4][n], comps.comp[5][n]};
      const double det = sym3_det(a);
      if (!(det > 0))
        throw std::runtime_error("rebuild_metric: degenerate metric");
      auto inv = sym3_inverse(a, det);
      for (int c = 0; c < 6; ++c) m.ginv.comp[c][n] = inv[c];
      m.sqrt_det.v[n] = std::sqrt(det);
    }
    return m;
  }
};

// d g / dt = -2 (Ric + (m + p) g); in general mode
// d g / dt = -2 (Ric - (R0/n) g) - 2 p g.
inline SymTensorField crf_rhs_from(const MetricField& m,
                                   const SymTensorField& ric,
                                   const ScalarField& p,
                                   bool general_mode = false,
                                   double R0 = -6.0) {
  SymTensorField out(m.grid());
  const double cshift = general_mode ? -R0 / kDim : kM;
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < out.size(); ++n)
      out.comp[c][n] = -2.0 * (ric.comp[c][n] +
                               (cshift + p.v[n]) * m.g.comp[c][n]);
  return out;
}

inline SymTensorField crf_rhs(const MetricField& m, const ScalarField& p) {
  return crf_rhs_from(m, ricci(m), p);
}

namespace detail {

inline double max_inv_trace(const MetricField& m) {
  double mt = 0;
  for (std::size_t n = 0; n < m.ginv.size(); ++n)
    mt = std::max(mt, m.ginv.comp[0][n] + m.ginv.comp[3][n] +
                          m.ginv.comp[5][n]);
  return mt;
}

inline void axpy_tensor(SymTensorField& y, double a, const SymTensorField& x) {
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < y.size(); ++n)
      y.comp[c][n] += a * x.comp[c][n];
}

}  // namespace detail

inline FlowHistory evolve_flow(const MetricField& g0, const FlowConfig& cfg) {
  if (cfg.T <= 0) throw std::invalid_argument("evolve_flow: T must be > 0");
  const Grid& grid = g0.grid();
  FlowHistory hist;
  hist.grid = grid;
  hist.T = cfg.T;

  ScalarField p_warm;  // warm start across all pressure solves
  bool have_warm = false;

  auto solve_p = [&](const MetricField& m, const SymTensorField& ric,
                     double t_now) {
    try {
      ScalarField p =
          cfg.general_mode
              ? solve_pressure_general(m, cfg.R0, cfg.elliptic,
                                       have_warm ? &p_warm : nullptr)
              : solve_pressure_with_ricci(m, ric, cfg.elliptic,
                                          have_warm ? &p_warm : nullptr);
      p_warm = p;
      have_warm = true;
      return p;
    } catch (const EllipticFailure& e) {
      throw FlowAbort(std::string("pressure solve failed: ") + e.what(),
                      t_now);
    }
  };
  // rhs at a stage; p is solved per stage
  auto rhs = [&](const SymTensorField& comps, double t_now,
                 ScalarField* p_out) {
    MetricField m;
    try {
      m = MetricField::from_components(comps);
    } catch (const std::invalid_argument& e) {
      throw FlowAbort(std::string("metric lost positive definiteness: ") +
                          e.what(),
                      t_now);
    }
    SymTensorField ric = ricci(m);
    ScalarField p = solve_p(m, ric, t_now);
    if (p_out) *p_out = p;
    SymTensorField k = crf_rhs_from(m, ric, p, cfg.general_mode, cfg.R0);
    return k;
  };

  MetricField current = g0;
  double t = 0;
  const double eps = 1e-12 * cfg.T;
  // a fixed requested dt is shrunk to divide T exactly, so stored times are
  // uniform and centered time differences keep their full order at the end
  double dt_fixed = 0;
  if (cfg.dt > 0)
    dt_fixed = cfg.T / std::ceil(cfg.T / cfg.dt - eps);
  while (true) {
    double dt = cfg.dt > 0 ? dt_fixed
                           : cfg.safety * grid.spacing * grid.spacing /
                                 detail::max_inv_trace(current);
    dt = std::min(dt, cfg.T - t);

    ScalarField p_node;
    SymTensorField k1 = rhs(current.g, t, &p_node);
    hist.times.push_back(t);
    hist.g.push_back(current.g);
    hist.sqrt_det.push_back(current.sqrt_det);
    hist.p.push_back(p_node);
    hist.p_bar.push_back(p_bar(p_node));
    if (t >= cfg.T - eps) break;

    SymTensorField y2 = current.g;
    detail::axpy_tensor(y2, 0.5 * dt, k1);
    SymTensorField k2 = rhs(y2, t + 0.5 * dt, nullptr);
    SymTensorField y3 = current.g;
    detail::axpy_tensor(y3, 0.5 * dt, k2);
    SymTensorField k3 = rhs(y3, t + 0.5 * dt, nullptr);
    SymTensorField y4 = current.g;
    detail::axpy_tensor(y4, dt, k3);
    SymTensorField k4 = rhs(y4, t + dt, nullptr);

    SymTensorField next = current.g;
    detail::axpy_tensor(next, dt / 6.0, k1);
    detail::axpy_tensor(next, dt / 3.0, k2);
    detail::axpy_tensor(next, dt / 3.0, k3);
    detail::axpy_tensor(next, dt / 6.0, k4);
    try {
      current = MetricField::from_components(next);
    } catch (const std::invalid_argument& e) {
      throw FlowAbort(std::string("metric lost positive definiteness: ") +
                          e.what(),
                      t + dt);
    }
    t += dt;
  }
  return hist;
}

namespace detail {

// Linear interpolation of the stored metric path inside one interval;
// rebuilds caches without re-checking definiteness.
inline MetricField interp_metric(const FlowHistory& hist, std::size_t i,
                                 double theta) {
  if (theta <= 0.0) return FlowHistory::rebuild_metric(hist.g[i]);
  if (theta >= 1.0) return FlowHistory::rebuild_metric(hist.g[i + 1]);
  SymTensorField comps(hist.grid);
  for (int c = 0; c < 6; ++c)
    for (std::size_t n = 0; n < comps.size(); ++n)
      comps.comp[c][n] = (1 - theta) * hist.g[i].comp[c][n] +
                         theta * hist.g[i + 1].comp[c][n];
  return FlowHistory::rebuild_metric(comps);
}

// Largest stable explicit step for the heat operator on this metric.
inline double heat_stable_dt(const Grid& grid, const MetricField& m,
                             double extra_rate = 0.0) {
  const double stencil =
      grid.fd_order == 2 ? 4.0 : 49.0 / 9.0;  // 1-D symbol maximum
  const double lam = stencil * max_inv_trace(m) /
                         (grid.spacing * grid.spacing) +
                     std::fabs(extra_rate);
  // RK4 real-axis limit is ~2.79; the 1.5 factor also absorbs the mixed
  // (off-diagonal) stencil terms not counted by the trace bound.
  return 2.0 / (1.5 * lam);
}

}  // namespace detail

// Backward conjugate-heat pass.  The weighted density P = H sqrt(det g)
// evolves by d P / dt = -(Delta_g H) sqrt(det g), which realizes
// d(dV)/dt = -(Delta H / H) dV and conserves the dV mass exactly; under
// the constant-scalar-curvature constraint this is the conjugate equation
// dH/dt = -Delta H + (m+1) p H.
inline void solve_conjugate_heat(FlowHistory& hist,
                                 const ScalarField& terminal_H) {
  if (hist.steps() < 2)
    throw std::invalid_argument("solve_conjugate_heat: empty history");
  require_same_grid(hist.grid, terminal_H.grid, "solve_conjugate_heat");
  for (double x : terminal_H.v)
    if (x <= 0)
      throw std::invalid_argument(
          "solve_conjugate_heat: terminal H must be positive");
  const Grid& grid = hist.grid;
  const std::size_t nn = grid.num_nodes();
  const double cv = grid.cell_volume();
  const std::size_t last = hist.steps() - 1;

  // normalized terminal density
  std::vector<double> P(nn);
  {
    double mass = 0;
    for (std::size_t n = 0; n < nn; ++n) {
      P[n] = terminal_H.v[n] * hist.sqrt_det[last].v[n];
      mass += P[n] * cv;
    }
    for (std::size_t n = 0; n < nn; ++n) P[n] /= mass;
  }
  hist.H.assign(hist.steps(), ScalarField(grid));
  auto store = [&](std::size_t i) {
    for (std::size_t n = 0; n < nn; ++n) {
      const double h = P[n] / hist.sqrt_det[i].v[n];
      if (h <= 0)
        throw FlowAbort("conjugate heat: density lost positivity",
                        hist.times[i]);
      hist.H[i].v[n] = h;
    }
  };
  store(last);

  // dP/dt at interpolated metric
  std::vector<double> Hbuf(nn), lap(nn);
  auto rate = [&](const std::vector<double>& Pin, const MetricField& m,
                  std::vector<double>& out) {
    for (std::size_t n = 0; n < nn; ++n) Hbuf[n] = Pin[n] / m.sqrt_det.v[n];
    make_laplace_beltrami(m).apply(Hbuf, lap);
    out.resize(nn);
    for (std::size_t n = 0; n < nn; ++n) out[n] = -lap[n] * m.sqrt_det.v[n];
  };

  std::vector<double> k1(nn), k2(nn), k3(nn), k4(nn), y(nn);
  for (std::size_t i = last; i-- > 0;) {
    const double t0 = hist.times[i], t1 = hist.times[i + 1];
    const double span = t1 - t0;
    MetricField m0 = FlowHistory::rebuild_metric(hist.g[i]);
    const double stable = detail::heat_stable_dt(grid, m0);
    const int sub = std::max(1, (int)std::ceil(span / stable));
    const double dt = -span / sub;  // integrating backward in t
    for (int s = 0; s < sub; ++s) {
      const double tc = t1 + s * dt;  // current time, decreasing
      auto theta = [&](double tt) { return (tt - t0) / span; };
      MetricField ma = detail::interp_metric(hist, i, theta(tc));
      MetricField mb = detail::interp_metric(hist, i, theta(tc + 0.5 * dt));
      MetricField mc = detail::interp_metric(hist, i, theta(tc + dt));
      rate(P, ma, k1);
      for (std::size_t n = 0; n < nn; ++n) y[n] = P[n] + 0.5 * dt * k1[n];
      rate(y, mb, k2);
      for (std::size_t n = 0; n < nn; ++n) y[n] = P[n] + 0.5 * dt * k2[n];
      rate(y, mb, k3);
      for (std::size_t n = 0; n < nn; ++n) y[n] = P[n] + dt * k3[n];
      rate(y, mc, k4);
      for (std::size_t n = 0; n < nn; ++n)
        P[n] += dt / 6.0 * (k1[n] + 2 * k2[n] + 2 * k3[n] + k4[n]);
    }
    store(i);
    double mass = 0;
    for (std::size_t n = 0; n < nn; ++n) mass += P[n] * cv;
    hist.conjugate_mass_drift =
        std::max(hist.conjugate_mass_drift, std::fabs(mass - 1.0));
  }
  hist.has_H = true;
}

// Forward heat pass d v/dt = Delta_{g(t)} v + pbar(t) (a v + b |grad v|_g);
// (a, b) = (1, 0) is the plain coupled heat equation.
inline void solve_heat_forced(FlowHistory& hist, const ScalarField& v0,
                              const HeatForcing& forcing,
                              std::size_t start_index = 0) {
  forcing.validate();
  if (hist.steps() < 2)
    throw std::invalid_argument("solve_heat: empty history");
  require_same_grid(hist.grid, v0.grid, "solve_heat");
  if (start_index >= hist.steps() - 1)
    throw std::invalid_argument("solve_heat: start index out of range");
  const Grid& grid = hist.grid;
  const std::size_t nn = grid.num_nodes();

  hist.v.assign(hist.steps(), ScalarField(grid));
  hist.forcing_certificate.assign(hist.steps(), 0.0);
  hist.v_start = start_index;
  hist.forcing = forcing;

  std::vector<double> v = v0.v;
  hist.v[start_index].v = v;

  std::vector<double> lap(nn), gnorm(nn);
  auto grad_norm = [&](const std::vector<double>& in, const MetricField& m,
                       std::vector<double>& out) {
    std::array<std::vector<double>, 3> d;
    for (int a = 0; a < 3; ++a) {
      d[a].assign(nn, 0.0);
      d_centered(grid, in, d[a], a);
    }
    out.resize(nn);
    for (std::size_t n = 0; n < nn; ++n) {
      auto inv = m.inv_at(n);
      double acc = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          acc += inv[sym_index(i, j)] * d[i][n] * d[j][n];
      out[n] = std::sqrt(std::max(acc, 0.0));
    }
  };
  auto rate = [&](const std::vector<double>& in, const MetricField& m,
                  double pbar, std::vector<double>& out) {
    make_laplace_beltrami(m).apply(in, lap);
    out.resize(nn);
    if (forcing.b != 0.0) {
      grad_norm(in, m, gnorm);
      for (std::size_t n = 0; n < nn; ++n)
        out[n] = lap[n] + pbar * (forcing.a * in[n] + forcing.b * gnorm[n]);
    } else {
      for (std::size_t n = 0; n < nn; ++n)
        out[n] = lap[n] + pbar * forcing.a * in[n];
    }
  };
  auto record_certificate = [&](std::size_t i) {
    // residual of |(d_t - Delta) v| <= pbar (|v| + |grad v|) with the
    // integrated forcing substituted for (d_t - Delta) v
    MetricField m = FlowHistory::rebuild_metric(hist.g[i]);
    grad_norm(hist.v[i].v, m, gnorm);
    const double pb = hist.p_bar[i];
    double worst = -1e300;
    for (std::size_t n = 0; n < nn; ++n) {
      const double phi =
          pb * (forcing.a * hist.v[i].v[n] + forcing.b * gnorm[n]);
      worst = std::max(worst, std::fabs(phi) -
                                  pb * (std::fabs(hist.v[i].v[n]) + gnorm[n]));
    }
    hist.forcing_certificate[i] = worst;
  };
  record_certificate(start_index);

  std::vector<double> k1(nn), k2(nn), k3(nn), k4(nn), y(nn);
  for (std::size_t i = start_index; i + 1 < hist.steps(); ++i) {
    const double t0 = hist.times[i], t1 = hist.times[i + 1];
    const double span = t1 - t0;
    const double pb0 = hist.p_bar[i], pb1 = hist.p_bar[i + 1];
    MetricField mend = FlowHistory::rebuild_metric(hist.g[i + 1]);
    const double stable = detail::heat_stable_dt(grid, mend, pb1);
    const int sub = std::max(1, (int)std::ceil(span / stable));
    const double dt = span / sub;
    for (int s = 0; s < sub; ++s) {
      const double tc = t0 + s * dt;
      auto theta = [&](double tt) { return (tt - t0) / span; };
      auto pbar_at = [&](double tt) {
        return (1 - theta(tt)) * pb0 + theta(tt) * pb1;
      };
      MetricField ma = detail::interp_metric(hist, i, theta(tc));
      MetricField mb = detail::interp_metric(hist, i, theta(tc + 0.5 * dt));
      MetricField mc = detail::interp_metric(hist, i, theta(tc + dt));
      rate(v, ma, pbar_at(tc), k1);
      for (std::size_t n = 0; n < nn; ++n) y[n] = v[n] + 0.5 * dt * k1[n];
      rate(y, mb, pbar_at(tc + 0.5 * dt), k2);
      for (std::size_t n = 0; n < nn; ++n) y[n] = v[n] + 0.5 * dt * k2[n];
      rate(y, mb, pbar_at(tc + 0.5 * dt), k3);
      for (std::size_t n = 0; n < nn; ++n) y[n] = v[n] + dt * k3[n];
      rate(y, mc, pbar_at(tc + dt), k4);
      double vmax = 0;
      for (std::size_t n = 0; n < nn; ++n) {
        v[n] += dt / 6.0 * (k1[n] + 2 * k2[n] + 2 * k3[n] + k4[n]);
        vmax = std::max(vmax, std::fabs(v[n]));
      }
      if (vmax > 1e12)
        throw FlowAbort("heat solve: blow-up beyond 1e12", tc + dt);
    }
    hist.v[i + 1].v = v;
    record_certificate(i + 1);
  }
  hist.has_v = true;
}

inline void solve_heat(FlowHistory& hist, const ScalarField& v0,
                       std::size_t start_index = 0) {
  HeatForcing plain;  // a = 1, b = 0
  solve_heat_forced(hist, v0, plain, start_index);
}

}  // namespace crf
