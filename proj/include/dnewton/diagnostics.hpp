#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dnewton/objectives.hpp"
#include "dnewton/state.hpp"
#include "dnewton/types.hpp"

namespace dnewton {

/// One row of a run trace. Norms are over the stacked (all-node) quantities.
struct RoundMetrics {
  int iter = 0;
  double rel_err = 0;      // (1/n)||x - x*||^2 / ||x^0 - x*||^2
  double cons_x = 0;       // ||x - W_inf x||
  double track_g = 0;      // ||g - W_inf g||
  double track_H = 0;      // ||H - W_inf H||_F
  double err_E = 0;        // ||E||_F
  double diff_Htilde = 0;  // ||H - H_tilde||_F
  double u1 = 0, u2 = 0, u3 = 0;
  double eps_k = 0, delta_k = 0;
  double alpha_k = 0, c_k = 0;
  int fallback_count = 0;  // nodes that fell back to a gradient direction in the last direction solve
  std::int64_t bits_cum = 0;
  double wall_time = 0;

  // Not part of the CSV schema.
  double asym_H = 0;     // max_i ||H_i - H_i^T||_F
  int cg_iters_max = 0;  // largest per-node CG iteration count in the last direction solve
  double cg_ratio_max = 0;  // max_i ||residual_i|| / ||g_i||
};

/// Everything compute_metrics needs besides the state.
struct MetricContext {
  double sigma = 0;   // second singular value of W
  double delta = 1;   // compressor contraction constant
  ProblemConstants constants;
  Vector<double> x_star;
  double F_star = 0;
  double rel_err_denominator = 1;  // ||x^0 - x*_stacked||^2
};

template <typename Scalar>
MetricContext make_metric_context(const Problem<Scalar>& problem, double sigma, double delta,
                                  const Vector<Scalar>& x_star, const NodeVectors<Scalar>& x0) {
  MetricContext ctx;
  ctx.sigma = sigma;
  ctx.delta = delta;
  ctx.constants = problem.constants();
  ctx.x_star = x_star.template cast<double>();
  ctx.F_star = static_cast<double>(global_value(problem, x_star));
  const double denom = static_cast<double>((x0.colwise() - x_star).squaredNorm());
  ctx.rel_err_denominator = denom > 0 ? denom : 1.0;
  return ctx;
}

namespace detail {

// weight * value with 0 * (anything) = 0, so infinite weights on vanished terms are harmless.
inline double weighted(double weight, double value) { return value == 0.0 ? 0.0 : weight * value; }

}  // namespace detail

/// Lyapunov weights used by u1, u2 and u3.
struct LyapunovWeights {
  double u1[3];
  double u2[3];
  double u3[3];
};

inline LyapunovWeights lyapunov_weights(double sigma, int m, double delta) {
  LyapunovWeights w{};
  const double s2 = 1.0 - sigma * sigma;
  w.u1[0] = 1.0;
  w.u1[1] = s2 * s2 / 50.0;
  w.u1[2] = 2.0 * std::pow(sigma, m - 1);
  w.u2[0] = delta < 1.0 ? delta * (1.0 - sigma) / (8.0 * (1.0 - delta)) : std::numeric_limits<double>::infinity();
  w.u2[1] = (1.0 - sigma) / 4.0;
  w.u2[2] = 1.0;
  w.u3[0] = 1.0;
  w.u3[1] = std::pow(sigma, -m / 4.0);
  w.u3[2] = 0.5 * std::pow(sigma, -3.0 * m / 4.0);
  return w;
}

/// Consensus, tracking and Lyapunov quantities of a state. `m`, `alpha` and `c`
/// are the parameters in effect at this iteration.
template <typename Scalar>
RoundMetrics compute_metrics(const NetworkState<Scalar>& s, const Problem<Scalar>& problem, const MetricContext& ctx,
                             int m, double alpha, double c) {
  RoundMetrics r;
  r.iter = s.k;
  r.alpha_k = alpha;
  r.c_k = c;
  const double n = static_cast<double>(s.n());
  const auto& C = ctx.constants;

  const NodeVectors<double> x = s.x.template cast<double>();
  r.rel_err = (x.colwise() - ctx.x_star).squaredNorm() / n / ctx.rel_err_denominator;
  r.cons_x = static_cast<double>(column_deviation(s.x));
  r.track_g = static_cast<double>(column_deviation(s.g));
  if (s.has_hessian_state()) {
    r.track_H = static_cast<double>(block_deviation(s.H));
    r.err_E = static_cast<double>(frobenius(s.E));
    Scalar diff(0);
    Scalar asym(0);
    for (std::size_t i = 0; i < s.H.size(); ++i) {
      diff += (s.H[i] - s.H_tilde[i]).squaredNorm();
      asym = std::max(asym, (s.H[i] - s.H[i].transpose()).norm());
    }
    using std::sqrt;
    r.diff_Htilde = static_cast<double>(sqrt(diff));
    r.asym_H = static_cast<double>(asym);
  }

  const Vector<Scalar> x_bar = s.x.rowwise().mean();
  const double gap = std::max(0.0, static_cast<double>(global_value(problem, x_bar)) - ctx.F_star);
  const double opt_dist = (x_bar.template cast<double>() - ctx.x_star).norm();

  const LyapunovWeights w = lyapunov_weights(ctx.sigma, m, ctx.delta);
  const double q1[3] = {r.cons_x * r.cons_x, r.track_g * r.track_g / (C.L1 * C.L1), n / C.L1 * gap};
  const double q2[3] = {r.err_E, r.diff_Htilde, r.track_H};
  const double q3[3] = {r.cons_x, r.track_g / C.L1, std::sqrt(n) * opt_dist};
  for (int t = 0; t < 3; ++t) {
    r.u1 += detail::weighted(w.u1[t], q1[t]);
    r.u2 += detail::weighted(w.u2[t], q2[t]);
    r.u3 += detail::weighted(w.u3[t], q3[t]);
  }

  // Local-phase constant M1 = 40 mu / 41.
  const double M1 = 40.0 * C.mu / 41.0;
  r.eps_k = (C.L2 / std::sqrt(n) * r.cons_x + r.track_H / std::sqrt(n) + c * C.mu) / M1;
  r.delta_k = C.L2 / (2.0 * C.mu) * opt_dist;
  return r;
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
  int first = 0, last = 0;  // inclusive iteration window
  double rho_hat = 0;       // per-iteration contraction factor
  double r2 = 0;
  double slope = 0;         // d log(value) / dk
};

class RateFitError : public Error {
 public:
  using Error::Error;
};

/// Least-squares fit of log(values[k]) against k over [first, last].
/// With `squared` the values are squared norms and rho_hat = exp(slope / 2).
inline RateFit fit_geometric(const std::vector<double>& values, int first, int last, bool squared) {
  if (first < 0 || last >= static_cast<int>(values.size()) || last < first)
    throw RateFitError("fit_rate: window [" + std::to_string(first) + ", " + std::to_string(last) +
                       "] is outside the trace");
  const int count = last - first + 1;
  if (count < 5) throw RateFitError("fit_rate: window needs at least 5 points, got " + std::to_string(count));
  double sk = 0, sy = 0;
  for (int k = first; k <= last; ++k) {
    const double v = values[static_cast<std::size_t>(k)];
    if (!(v > 0.0) || !std::isfinite(v))
      throw RateFitError("fit_rate: non-positive value at iteration " + std::to_string(k));
    sk += k;
    sy += std::log(v);
  }
  const double mk = sk / count, my = sy / count;
  double skk = 0, sky = 0, syy = 0;
  for (int k = first; k <= last; ++k) {
    const double dk = k - mk, dy = std::log(values[static_cast<std::size_t>(k)]) - my;
    skk += dk * dk;
    sky += dk * dy;
    syy += dy * dy;
  }
  if (syy <= 1e-24 * count) throw RateFitError("fit_rate: constant trace, r2 undefined");
  RateFit fit;
  fit.first = first;
  fit.last = last;
  fit.slope = sky / skk;
  fit.rho_hat = std::exp(squared ? fit.slope / 2.0 : fit.slope);
  fit.r2 = std::clamp(sky * sky / (skk * syy), 0.0, 1.0);
  return fit;
}

inline RateFit fit_rate(const std::vector<RoundMetrics>& rows, int first, int last) {
  std::vector<double> values(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) values[i] = rows[i].rel_err;
  return fit_geometric(values, first, last, true);
}

/// Fit over the local-phase window: from iteration `from` on, the iterations
/// whose rel_err lies in [lower, upper] (first to last such iteration).
inline RateFit fit_local_rate(const std::vector<RoundMetrics>& rows, int from, double upper = 1e-4,
                              double lower = 1e-18) {
  int first = -1, last = -1;
  for (const auto& r : rows) {
    if (r.iter < from || r.rel_err > upper || r.rel_err < lower) continue;
    if (first < 0) first = r.iter;
    last = r.iter;
  }
  if (first < 0) throw RateFitError("fit_local_rate: no iteration with rel_err in the window");
  return fit_rate(rows, first, last);
}

// ---------------------------------------------------------------------------
// Parameter conditions of the two-phase analysis

struct TheoreticalCaps {
  double sigma = 0, delta = 0;
  int m = 1;
  ProblemConstants constants;
  int n = 0;

  double u1_0 = 0, u2_0 = 0;
  double C = 0;          // NaN when its denominator is not positive
  double u2_tilde_0 = 0;  // max{u2_0 - C, C}
  double M_min = 0;       // smallest admissible regularization
  double M = 0;           // regularization the caps below are evaluated at
  double M1 = 0, M2 = 0;
  double alpha_cap = 0;
  double c_cap = 0;
  double gamma_cap = 0;
  double rate_stage1 = 0;  // 1 - mu alpha / (2 M2)
  double phi = 0;

  double m_threshold = 0;  // local phase: m > 4 log(4 kappa) / (-log sigma)
  double c_cap_stage2 = 0;  // M1' sigma^{m/2} / (40 mu kappa), M1' = 40 mu / 41
  double rate_stage2 = 0;   // sigma^{m/2}
  double K_switch = 0;      // iterations before the local phase (diagnostic only)
  int fixed_point_iterations = 0;
};

/// Evaluates the parameter caps for a given initialization. `gamma` < 0 uses the
/// gamma cap itself when computing C; `M` < 0 uses the smallest admissible M.
template <typename Scalar>
TheoreticalCaps theoretical_caps(const Problem<Scalar>& problem, double sigma, int m, double delta,
                                 const NetworkState<Scalar>& initial, const Vector<Scalar>& x_star,
                                 double gamma = -1.0, double M = -1.0) {
  TheoreticalCaps t;
  t.sigma = sigma;
  t.delta = delta;
  t.m = m;
  t.constants = problem.constants();
  t.n = static_cast<int>(problem.n());
  const double L1 = t.constants.L1, L2 = t.constants.L2, mu = t.constants.mu, kappa = t.constants.kappa();
  const double n = t.n;

  MetricContext ctx = make_metric_context(problem, sigma, delta, x_star, initial.x);
  const RoundMetrics r0 = compute_metrics(initial, problem, ctx, m, 0.0, 0.0);
  t.u1_0 = r0.u1;
  t.u2_0 = r0.u2;

  t.gamma_cap = delta * delta * (1.0 - sigma) / 50.0;
  const double gamma_used = gamma >= 0 ? gamma : t.gamma_cap;
  const double s2 = 1.0 - sigma * sigma;
  const double sig_m1 = std::pow(sigma, m - 1);

  auto evaluate = [&](double u2_tilde) {
    t.u2_tilde_0 = u2_tilde;
    t.M_min = L2 * std::sqrt(t.u1_0 / n) + u2_tilde;
    t.M = M >= 0 ? M : t.M_min;
    t.M1 = mu + t.M - L2 * std::sqrt(t.u1_0 / n) - u2_tilde;
    t.M2 = L1 + t.M + L2 * std::sqrt(t.u1_0 / n) + u2_tilde;
    const double a1 = t.M1 * t.M1 * s2 * s2 * s2 / (100.0 * L1 * t.M2 * sig_m1);
    const double a2 = t.M1 * t.M1 / (200.0 * L1 * t.M2);
    t.alpha_cap = std::min(a1, a2);
    t.c_cap = t.M1 / (4.0 * t.M2 * std::sqrt(2.0 * kappa));
    t.rate_stage1 = 1.0 - mu * t.alpha_cap / (2.0 * t.M2);
    t.phi = std::max(1.0 - gamma_used / 2.0 * (1.0 - sigma), 1.0 - mu * t.alpha_cap / (4.0 * t.M2));
  };

  // C depends on alpha and M2, which depend on u2_tilde = max{u2_0 - C, C}: iterate to a fixed point.
  double u2_tilde = t.u2_0;
  evaluate(u2_tilde);
  t.C = 0.0;
  if (L2 > 0.0) {
    for (int it = 0; it < 100; ++it) {
      t.fixed_point_iterations = it + 1;
      const double denom = std::sqrt(1.0 - mu * t.alpha_cap / (2.0 * t.M2)) - (1.0 - gamma_used * (1.0 - sigma) / 2.0);
      if (!(denom > 0.0)) {
        t.C = std::numeric_limits<double>::quiet_NaN();
        evaluate(t.u2_0);
        break;
      }
      t.C = 3.75 * L2 * std::sqrt(std::pow(sigma, -(m - 1)) * t.u1_0) / denom;
      const double next = std::max(t.u2_0 - t.C, t.C);
      const bool settled = std::abs(next - u2_tilde) <= 1e-12 * std::max(1.0, next);
      u2_tilde = next;
      evaluate(u2_tilde);
      if (settled) break;
    }
  }

  t.m_threshold = 4.0 * std::log(4.0 * kappa) / (-std::log(sigma));
  t.c_cap_stage2 = (40.0 * mu / 41.0) * std::pow(sigma, m / 2.0) / (40.0 * mu * kappa);
  t.rate_stage2 = std::pow(sigma, m / 2.0);
  const double inner = t.u2_tilde_0 + 52.0 * L2 * kappa * std::sqrt(kappa) * std::pow(sigma, -5.0 * m / 4.0) /
                                          ((1.0 - std::pow(sigma, m / 2.0)) * s2) * std::sqrt(t.u1_0);
  t.K_switch = (m / 2.0 * std::log(sigma) - std::log(41.0 * kappa / (mu * std::sqrt(n)) * inner)) / std::log(t.phi);
  return t;
}

inline std::string to_text(const TheoreticalCaps& t) {
  std::ostringstream os;
  os.precision(6);
  os << "constants:  L1=" << t.constants.L1 << "  L2=" << t.constants.L2 << "  mu=" << t.constants.mu
     << "  kappa_F=" << t.constants.kappa() << "  n=" << t.n << "\n";
  os << "network:    sigma=" << t.sigma << "  m=" << t.m << "  delta=" << t.delta << "\n";
  os << "initial:    u1_0=" << t.u1_0 << "  u2_0=" << t.u2_0 << "  C=" << t.C << "  u2_tilde_0=" << t.u2_tilde_0
     << "\n";
  os << "global phase (small step):\n";
  os << "  M       >= " << t.M_min << "   (evaluated at M=" << t.M << ", M1=" << t.M1 << ", M2=" << t.M2 << ")\n";
  os << "  alpha   <= " << t.alpha_cap << "\n";
  os << "  c_k     <= " << t.c_cap << "\n";
  os << "  gamma   <= " << t.gamma_cap << "\n";
  os << "  rate on u1: " << t.rate_stage1 << " per iteration;  phi=" << t.phi << "\n";
  os << "local phase (unit step, M=0):\n";
  os << "  m       >  " << t.m_threshold << "\n";
  os << "  c_k     <= " << t.c_cap_stage2 << "\n";
  os << "  rate on u3: " << t.rate_stage2 << " per iteration\n";
  os << "  switch iteration K >= " << t.K_switch << "   (diagnostic only)\n";
  return os.str();
}

}  // namespace dnewton
