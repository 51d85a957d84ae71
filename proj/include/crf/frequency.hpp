#pragma once

#include "crf/flow.hpp"
#include "crf/spectral.hpp"

// Parabolic frequency: I, E, the corrected ratio Q, its monotonicity
// verdicts, the eigenvalue comparison, the backward-uniqueness bound, and
// the forced-equation inequality suite.
namespace crf {

struct TimeWeight {
  enum class HPreset { constant, linear, exponential };
  HPreset hpreset = HPreset::constant;
  double h0 = 1.0;   // constant: h = h0; linear: h0 + h1 t; exp: h0 e^{h1 t}
  double h1 = 0.0;
  bool k_auto = true;
  double k_const = 0.0;  // used when !k_auto
  double t0 = 0.0, t1 = 0.0;  // observation window

  double h(double t) const {
    switch (hpreset) {
      case HPreset::constant: return h0;
      case HPreset::linear: return h0 + h1 * t;
      default: return h0 * std::exp(h1 * t);
    }
  }
  double hprime(double t) const {
    switch (hpreset) {
      case HPreset::constant: return 0.0;
      case HPreset::linear: return h1;
      default: return h0 * h1 * std::exp(h1 * t);
    }
  }
  // h must be nonvanishing and of constant sign on the window
  void validate() const {
    if (!(t0 < t1))
      throw std::invalid_argument("TimeWeight: need t0 < t1");
    if (h(t0) == 0 || h(t1) == 0 || h(t0) * h(t1) < 0)
      throw std::invalid_argument(
          "TimeWeight: h must be nonvanishing of constant sign on the window");
    if (hpreset == HPreset::linear && h1 != 0) {
      const double root = -h0 / h1;
      if (root > t0 && root < t1)
        throw std::invalid_argument("TimeWeight: h vanishes inside window");
    }
  }
};

struct FrequencyReport {
  std::vector<std::size_t> idx;  // history step indices inside the window
  std::vector<double> t, I, E, E_op, Q, dQdt, k_used, corr_exponent;
  std::vector<double> c, eigen_residual, cauchy_schwarz;
  double max_absQ = 0;
  double epsilon_mono = 0;
  bool vanished = false;
  bool hypothesis_met = true;
  std::string verdict;  // constant / nonincreasing / strictly decreasing /
                        // nondecreasing / hypothesis-unmet / violated / vanished
};

inline double compute_I(const ScalarField& v, const Measure& dV) {
  return integrate_product(v, v, dV);
}

// E = h integral |grad v|^2 dV (gradient form).
inline double compute_E(const ScalarField& v, const MetricField& m,
                        const Measure& dV, double h) {
  ScalarField gsq = grad_norm_sq(v, m);
  return h * integrate(gsq, dV);
}

namespace detail {

// Trapezoid integral of a per-step integrand from step i0 to step i.
inline double trapezoid(const std::vector<double>& times,
                        const std::vector<double>& f, std::size_t i0,
                        std::size_t i) {
  double acc = 0;
  for (std::size_t j = i0; j < i; ++j)
    acc += 0.5 * (f[j] + f[j + 1]) * (times[j + 1] - times[j]);
  return acc;
}

}  // namespace detail

// k(t_i) saturating the curvature hypothesis: k = 2h(m + mu_max) with
// mu_max the largest relative eigenvalue of Ric_f against g over all nodes.
// The same formula applies for either sign of h, since k/(2h) - m = mu_max
// reproduces the hypothesis Ric_f <= mu_max g in both cases.
inline double k_auto_at(const FlowHistory& hist, const TimeWeight& tw,
                        std::size_t i) {
  MetricField m = hist.metric_at(i);
  SymTensorField rf = bakry_emery(m, hist.H[i]);
  const double mu = max_relative_eigenvalue(rf, m);
  return 2.0 * tw.h(hist.times[i]) * (kM + mu);
}

// Full frequency series over the window, with monotonicity verdict and
// rigidity diagnostics.  hypothesis_stride thins the k_auto comparison used
// to validate a user-supplied constant k (the max-check needs no quadrature).
inline FrequencyReport compute_frequency(const FlowHistory& hist,
                                         const TimeWeight& tw,
                                         int hypothesis_stride = 1) {
  tw.validate();
  if (!hist.has_H || !hist.has_v)
    throw std::invalid_argument(
        "compute_frequency: history needs conjugate and heat passes");
  FrequencyReport rep;
  const std::size_t i0 = hist.index_at(tw.t0);
  const std::size_t i1 = hist.index_at(tw.t1);
  if (!(i0 < i1))
    throw std::invalid_argument("compute_frequency: empty window");
  if (hist.v_start > i0)
    throw std::invalid_argument("compute_frequency: v undefined at t0");

  const std::size_t ns = i1 - i0 + 1;
  rep.idx.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) rep.idx[s] = i0 + s;
  rep.t.resize(ns);
  rep.I.resize(ns);
  rep.E.resize(ns);
  rep.E_op.resize(ns);
  rep.k_used.resize(ns);
  rep.c.resize(ns);
  rep.eigen_residual.resize(ns);
  rep.cauchy_schwarz.resize(ns);

  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t i = rep.idx[s];
    const double t = hist.times[i];
    rep.t[s] = t;
    MetricField m = hist.metric_at(i);
    Measure dV = hist.dV_at(i);
    const ScalarField& v = hist.v[i];
    const double h = tw.h(t);

    const double I = compute_I(v, dV);
    rep.I[s] = I;
    if (I < 1e-300) rep.vanished = true;

    ScalarField gsq = grad_norm_sq(v, m);
    const double Eg = integrate(gsq, dV);
    rep.E[s] = h * Eg;

    DivFormOperator op = make_drifting_laplacian(m, hist.H[i]);
    ScalarField lv(hist.grid);
    op.apply(v.v, lv.v);
    const double vlv = integrate_product(v, lv, dV);
    const double lv2 = integrate_product(lv, lv, dV);
    rep.E_op[s] = -h * vlv;

    // Cauchy-Schwarz with the gradient integral evaluated as -int v L_f v dV:
    // literal discrete Cauchy-Schwarz, relative residual >= -roundoff
    rep.cauchy_schwarz[s] =
        (I * lv2 - vlv * vlv) / std::max(I * lv2, 1e-300);

    rep.k_used[s] = tw.k_auto ? k_auto_at(hist, tw, i) : tw.k_const;

    if (!rep.vanished && I > 0) {
      const double c = Eg / I;  // = (Q/h) e^{+corr}
      rep.c[s] = c;
      double rsq = 0;
      for (std::size_t n = 0; n < v.size(); ++n) {
        const double r = -lv.v[n] - c * v.v[n];
        rsq += dV.w[n] * r * r;
      }
      rep.eigen_residual[s] = std::sqrt(rsq / I);
    }
  }

  // hypothesis check for user-supplied k: must dominate k_auto pointwise
  if (!tw.k_auto) {
    for (std::size_t s = 0; s < ns;
         s += std::max(1, hypothesis_stride)) {
      const double ka = k_auto_at(hist, tw, rep.idx[s]);
      const double sign = tw.h(rep.t[s]) > 0 ? 1.0 : -1.0;
      // for h > 0: need k >= k_auto; for h < 0 the division flips it
      if (sign * (tw.k_const - ka) < -1e-6 * (1.0 + std::fabs(ka))) {
        rep.hypothesis_met = false;
        break;
      }
    }
  }

  // correction exponent by trapezoid on the step times
  std::vector<double> integrand(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const double t = rep.t[s];
    integrand[s] = 2.0 * hist.p_bar[rep.idx[s]] +
                   (tw.hprime(t) + rep.k_used[s]) / tw.h(t);
  }
  rep.corr_exponent.resize(ns);
  for (std::size_t s = 0; s < ns; ++s)
    rep.corr_exponent[s] = detail::trapezoid(rep.t, integrand, 0, s);

  rep.Q.assign(ns, 0.0);
  if (!rep.vanished)
    for (std::size_t s = 0; s < ns; ++s)
      rep.Q[s] = (rep.E[s] / rep.I[s]) * std::exp(-rep.corr_exponent[s]);
  for (double q : rep.Q) rep.max_absQ = std::max(rep.max_absQ, std::fabs(q));

  rep.dQdt.assign(ns, 0.0);
  for (std::size_t s = 1; s + 1 < ns; ++s)
    rep.dQdt[s] = (rep.Q[s + 1] - rep.Q[s - 1]) / (rep.t[s + 1] - rep.t[s - 1]);
  if (ns >= 2) {
    rep.dQdt[0] = (rep.Q[1] - rep.Q[0]) / (rep.t[1] - rep.t[0]);
    rep.dQdt[ns - 1] =
        (rep.Q[ns - 1] - rep.Q[ns - 2]) / (rep.t[ns - 1] - rep.t[ns - 2]);
  }

  rep.epsilon_mono = 1e-4 * std::max(rep.max_absQ, 1e-300);
  if (rep.vanished) {
    rep.verdict = "vanished";
  } else if (!rep.hypothesis_met) {
    rep.verdict = "hypothesis-unmet";
  } else {
    const bool hpos = tw.h(tw.t0) > 0;
    bool all_flat = true, all_down = true, all_strict = true, all_up = true;
    for (std::size_t s = 1; s + 1 < ns; ++s) {
      const double d = rep.dQdt[s];
      all_flat &= std::fabs(d) <= rep.epsilon_mono;
      all_down &= d <= rep.epsilon_mono;
      all_strict &= d < -rep.epsilon_mono;
      all_up &= d >= -rep.epsilon_mono;
    }
    if (all_flat)
      rep.verdict = "constant";
    else if (hpos && all_strict)
      rep.verdict = "strictly decreasing";
    else if (hpos && all_down)
      rep.verdict = "nonincreasing";
    else if (!hpos && all_up)
      rep.verdict = "nondecreasing";
    else
      rep.verdict = "violated";
  }
  return rep;
}

// Residuals of I'(t) = 2 pbar I - (2/h) E at interior samples, relative to
// max(|I'|, 1).
inline std::vector<double> check_I_derivative(const FlowHistory& hist,
                                              const TimeWeight& tw,
                                              const FrequencyReport& rep) {
  const std::size_t ns = rep.t.size();
  // uniform sample spacing enables a 4th-order five-point derivative
  bool uniform = ns >= 5;
  const double dt0 = ns >= 2 ? rep.t[1] - rep.t[0] : 0;
  for (std::size_t s = 1; s + 1 < ns && uniform; ++s)
    uniform = std::fabs((rep.t[s + 1] - rep.t[s]) - dt0) <= 1e-12;

  std::vector<double> out;
  for (std::size_t s = 1; s + 1 < ns; ++s) {
    double dIdt;
    if (uniform && s >= 2 && s + 2 < ns)
      dIdt = (-rep.I[s + 2] + 8 * rep.I[s + 1] - 8 * rep.I[s - 1] +
              rep.I[s - 2]) /
             (12 * dt0);
    else if (uniform && s == 1)
      dIdt = (-3 * rep.I[0] - 10 * rep.I[1] + 18 * rep.I[2] - 6 * rep.I[3] +
              rep.I[4]) /
             (12 * dt0);
    else if (uniform && s + 2 == ns)
      dIdt = (3 * rep.I[ns - 1] + 10 * rep.I[ns - 2] - 18 * rep.I[ns - 3] +
              6 * rep.I[ns - 4] - rep.I[ns - 5]) /
             (12 * dt0);
    else
      dIdt = (rep.I[s + 1] - rep.I[s - 1]) / (rep.t[s + 1] - rep.t[s - 1]);
    const double rhs = 2.0 * hist.p_bar[rep.idx[s]] * rep.I[s] -
                       2.0 * rep.E[s] / tw.h(rep.t[s]);
    out.push_back(std::fabs(dIdt - rhs) / std::max(std::fabs(dIdt), 1.0));
  }
  return out;
}

struct BackwardBound {
  double residual = 0;  // log(I(b)/I(a)) - bound exponent, compliant >= -eps
  bool vacuous = false;
  bool endpoint_positive = false;  // I(a) > 0 and finite bound => I(b) > 0
};

// Backward-uniqueness inequality for h < 0:
//   I(b)/I(a) >= exp{ 2 int_a^b pbar - 2 Q(a) int_a^b (1/h) e^{corr} }.
inline BackwardBound backward_uniqueness_bound(const FlowHistory& hist,
                                               const TimeWeight& tw,
                                               const FrequencyReport& rep,
                                               double a, double b) {
  if (tw.h(tw.t0) >= 0)
    throw std::invalid_argument("backward_uniqueness_bound: needs h < 0");
  if (!(a < b))
    throw std::invalid_argument("backward_uniqueness_bound: need a < b");
  // locate a, b among the report samples
  auto sample_of = [&](double t) {
    std::size_t best = 0;
    double d = 1e300;
    for (std::size_t s = 0; s < rep.t.size(); ++s)
      if (std::fabs(rep.t[s] - t) < d) {
        d = std::fabs(rep.t[s] - t);
        best = s;
      }
    return best;
  };
  const std::size_t sa = sample_of(a), sb = sample_of(b);
  BackwardBound out;
  if (rep.I[sa] < 1e-300) {
    out.vacuous = true;
    return out;
  }
  std::vector<double> pbar_s(rep.t.size()), decay(rep.t.size());
  for (std::size_t s = 0; s < rep.t.size(); ++s) {
    pbar_s[s] = hist.p_bar[rep.idx[s]];
    decay[s] = std::exp(rep.corr_exponent[s]) / tw.h(rep.t[s]);
  }
  // Q at a from the operator-form energy: the discrete I dynamics are
  // driven by the divergence-form operator, so this form keeps the bound
  // consistent at the stencil's exactness rather than its truncation order
  const double Qa =
      (rep.E_op[sa] / rep.I[sa]) * std::exp(-rep.corr_exponent[sa]);
  const double rhs = 2.0 * detail::trapezoid(rep.t, pbar_s, sa, sb) -
                     2.0 * Qa * detail::trapezoid(rep.t, decay, sa, sb);
  out.residual = std::log(rep.I[sb] / rep.I[sa]) - rhs;
  out.endpoint_positive = std::isfinite(rhs) && rep.I[sb] > 0;
  return out;
}

struct EigenMonotonicity {
  std::vector<double> t, lambda, corrected;  // h(t) lambda(t) e^{-corr}
  double reference = 0;                       // h(t0) lambda(t0)
  double max_excess = 0;  // max violation of corrected <= reference (h>0)
  bool degenerate_warned = false;
};

// Proof-form eigenvalue comparison: h(t) lambda(t) e^{-corr(t)} stays on the
// h(t0) lambda(t0) side; lambda recomputed independently at each sample.
inline EigenMonotonicity eigen_monotonicity_check(const FlowHistory& hist,
                                                  const TimeWeight& tw,
                                                  const FrequencyReport& rep,
                                                  int stride = 1,
                                                  const EigenConfig& ecfg = {}) {
  EigenMonotonicity out;
  const double sign = tw.h(tw.t0) > 0 ? 1.0 : -1.0;
  for (std::size_t s = 0; s < rep.t.size();
       s += std::max(1, stride)) {
    const std::size_t i = rep.idx[s];
    MetricField m = hist.metric_at(i);
    EigenResult e = drift_eigenpair(m, hist.H[i], ecfg);
    out.degenerate_warned |= e.degenerate_gap;
    out.t.push_back(rep.t[s]);
    out.lambda.push_back(e.lambda);
    out.corrected.push_back(tw.h(rep.t[s]) * e.lambda *
                            std::exp(-rep.corr_exponent[s]));
    if (s == 0) out.reference = tw.h(rep.t[0]) * e.lambda;
  }
  for (double c : out.corrected)
    out.max_excess = std::max(out.max_excess, sign * (c - out.reference));
  return out;
}

struct ForcedInequalityReport {
  bool skipped = false;
  std::string reason;
  // signed residuals, each compliant when >= -eps
  double r_log_I = 0;       // lower bound on (log I)'
  double r_Q_growth = 0;    // Q' <= pbar^2 (Q + h(t0))
  double r_log_Q = 0;       // pbar^2 >= [log(Q + h(t0))]'
  double r_integrated = 0;  // endpoint mass lower bound
  double r_gronwall = 0;    // Q(t) <= (Q(t0)+h(t0)) e^{int pbar^2} - h(t0)
  double certificate_worst = 0;
};

// Inequality suite for the forced equation |(d_t - Delta) v| <=
// pbar (|v| + |grad v|); requires a valid forcing certificate from the run.
inline ForcedInequalityReport forced_inequality_checks(const FlowHistory& hist,
                                      const TimeWeight& tw,
                                      const FrequencyReport& rep) {
  ForcedInequalityReport out;
  if (tw.h(tw.t0) <= 0) {
    out.skipped = true;
    out.reason = "requires h > 0 on the window";
    return out;
  }
  for (std::size_t s = 0; s < rep.idx.size(); ++s)
    out.certificate_worst =
        std::max(out.certificate_worst, hist.forcing_certificate[rep.idx[s]]);
  if (out.certificate_worst > 1e-8) {
    out.skipped = true;
    out.reason = "forcing certificate violated";
    return out;
  }
  const std::size_t ns = rep.t.size();
  const double ht0 = tw.h(rep.t[0]);
  const double Qt0 = rep.Q[0];

  std::vector<double> pbar_s(ns), pbar_sq(ns);
  double sup_pbar = 0;
  for (std::size_t s = 0; s < ns; ++s) {
    pbar_s[s] = hist.p_bar[rep.idx[s]];
    pbar_sq[s] = pbar_s[s] * pbar_s[s];
    sup_pbar = std::max(sup_pbar, pbar_s[s]);
  }
  const double int_pbar_sq = detail::trapezoid(rep.t, pbar_sq, 0, ns - 1);

  double worst_log_mass = 1e300, worst_growth = 1e300, worst_log_freq = 1e300, worst_gronwall = 1e300;
  for (std::size_t s = 1; s + 1 < ns; ++s) {
    const double span = rep.t[s + 1] - rep.t[s - 1];
    const double dlogI =
        (std::log(rep.I[s + 1]) - std::log(rep.I[s - 1])) / span;
    const double h = tw.h(rep.t[s]);
    worst_log_mass = std::min(worst_log_mass, dlogI + 3.0 * pbar_s[s] +
                            (pbar_s[s] + 2.0) / h * rep.Q[s] *
                                std::exp(rep.corr_exponent[s]));
    worst_growth = std::min(worst_growth, pbar_sq[s] * (rep.Q[s] + ht0) - rep.dQdt[s]);
    const double dlogQ = (std::log(rep.Q[s + 1] + ht0) -
                          std::log(rep.Q[s - 1] + ht0)) /
                         span;
    worst_log_freq = std::min(worst_log_freq, pbar_sq[s] - dlogQ);
  }
  for (std::size_t s = 0; s < ns; ++s)
    worst_gronwall = std::min(worst_gronwall,
                    (Qt0 + ht0) * std::exp(int_pbar_sq) - ht0 - rep.Q[s]);

  // endpoint bound, inner exponent taken at the window end as displayed
  std::vector<double> decay(ns);
  const double corr_end = rep.corr_exponent[ns - 1];
  for (std::size_t s = 0; s < ns; ++s)
    decay[s] = std::exp(corr_end) / tw.h(rep.t[s]);
  const double bound_exp =
      -3.0 * (rep.t[ns - 1] - rep.t[0]) * sup_pbar -
      (2.0 + sup_pbar) * (Qt0 + ht0) * std::exp(int_pbar_sq) *
          detail::trapezoid(rep.t, decay, 0, ns - 1);
  out.r_integrated =
      std::log(rep.I[ns - 1]) - std::log(rep.I[0]) - bound_exp;

  out.r_log_I = worst_log_mass;
  out.r_Q_growth = worst_growth;
  out.r_log_Q = worst_log_freq;
  out.r_gronwall = worst_gronwall;
  return out;
}

}  // namespace crf
