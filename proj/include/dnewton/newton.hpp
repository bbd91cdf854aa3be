#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "dnewton/cg.hpp"
#include "dnewton/compress.hpp"
#include "dnewton/diagnostics.hpp"
#include "dnewton/graph.hpp"
#include "dnewton/objectives.hpp"
#include "dnewton/state.hpp"
#include "dnewton/trace.hpp"

namespace dnewton {

/// alpha_k: constant, or the geometric ramp min{alpha_max, a r^k}.
struct StepSchedule {
  enum class Kind { constant, ramp };
  Kind kind = Kind::ramp;
  double value = 1.0;  // constant
  double a = 0.02, r = 1.1, alpha_max = 1.0;  // ramp

  static StepSchedule constant(double alpha) { return {Kind::constant, alpha, 0, 0, 0}; }
  static StepSchedule ramp(double a, double r, double alpha_max = 1.0) { return {Kind::ramp, 0, a, r, alpha_max}; }

  double at(int k) const {
    if (kind == Kind::constant) return value;
    return std::min(alpha_max, a * std::pow(r, k));
  }
  /// First k at which the ramp saturates (k = 0 for a constant schedule).
  int saturation() const {
    if (kind == Kind::constant) return 0;
    int k = 0;
    while (a * std::pow(r, k) < alpha_max && k < 100000) ++k;
    return k;
  }
};

/// Consensus rounds per iteration: fixed m, or m_k = max(1, k).
struct RoundsSchedule {
  enum class Kind { fixed, iteration };
  Kind kind = Kind::fixed;
  int m = 1;

  static RoundsSchedule fixed(int m) { return {Kind::fixed, m}; }
  static RoundsSchedule per_iteration() { return {Kind::iteration, 1}; }
  int at(int k) const { return kind == Kind::fixed ? m : std::max(1, k); }
};

/// Local phase of the two-phase regime: from iteration `start` on, alpha = 1,
/// M = 0 and the CG tolerance switches to `cg_tol`.
struct LocalPhase {
  int start = 0;
  double cg_tol = 1e-10;
};

enum class Variant { reference, efficient };

struct AlgoParams {
  StepSchedule alpha = StepSchedule::ramp(0.02, 1.1);
  double gamma = 0.03;
  RoundsSchedule rounds = RoundsSchedule::fixed(15);
  double M = 0.0;
  double cg_tol = 1e-10;
  std::optional<LocalPhase> local_phase;
  CompressorSpec compressor;
  int max_iters = 2000;
  double stop_tol = 1e-10;  // on rel_err; 0 disables early stopping
  double settle_tol = 0;    // if > 0, stopping also requires ||E||_F and ||H - H_tilde||_F <= settle_tol
  double divergence_threshold = 1e6;
  Variant variant = Variant::efficient;

  bool done(const RoundMetrics& r) const {
    if (!(stop_tol > 0) || !(r.rel_err <= stop_tol)) return false;
    return !(settle_tol > 0) || (r.err_E <= settle_tol && r.diff_Htilde <= settle_tol);
  }

  bool in_local_phase(int k) const { return local_phase && k >= local_phase->start; }
  double alpha_at(int k) const { return in_local_phase(k) ? 1.0 : alpha.at(k); }
  double M_at(int k) const { return in_local_phase(k) ? 0.0 : M; }
  double cg_tol_at(int k) const { return in_local_phase(k) ? local_phase->cg_tol : cg_tol; }
  int m_at(int k) const { return rounds.at(k); }

  void validate() const {
    if (!(alpha.kind == StepSchedule::Kind::constant ? alpha.value >= 0 : alpha.a > 0 && alpha.r > 0))
      throw Error("AlgoParams: step sizes must be nonnegative");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("AlgoParams: gamma must lie in [0,1]");
    if (rounds.kind == RoundsSchedule::Kind::fixed && rounds.m < 1) throw Error("AlgoParams: m must be >= 1");
    if (!(M >= 0.0)) throw Error("AlgoParams: M must be >= 0");
    if (!(cg_tol >= 0.0 && cg_tol <= 1.0)) throw Error("AlgoParams: cg_tol must lie in [0,1]");
    if (local_phase && !(local_phase->cg_tol >= 0.0 && local_phase->cg_tol <= 1.0))
      throw Error("AlgoParams: local-phase cg_tol must lie in [0,1]");
    if (max_iters < 0) throw Error("AlgoParams: max_iters must be >= 0");
    if (!(stop_tol >= 0.0) || !(settle_tol >= 0.0)) throw Error("AlgoParams: tolerances must be >= 0");
    compressor.validate();
  }
};

/// Side information of one iteration.
struct StepReport {
  int m = 1;
  double alpha = 0, c = 0;
  std::int64_t bits = 0;
  int fallback_count = 0;
  int cg_unconverged = 0;
  int cg_iters_max = 0;
  int cg_replacements_max = 0;
  double cg_ratio_max = 0;  // max_i ||residual_i|| / ||g_i||
};

namespace detail {

template <typename Scalar>
void check_finite(const NetworkState<Scalar>& s, int k) {
  bool ok = s.x.allFinite() && s.g.allFinite();
  for (const auto& h : s.H) ok = ok && h.allFinite();
  if (!ok) throw Error("non-finite state at iteration " + std::to_string(k));
}

// Lines x and g: m rounds of consensus, local oracle refresh, gradient tracking.
template <typename Scalar>
void primal_and_gradient_update(NetworkState<Scalar>& s, const Problem<Scalar>& problem, const Matrix<Scalar>& Wm,
                                Scalar alpha, bool with_hessian, NodeMatrices<Scalar>* hess_increment) {
  const Index n = s.n();
  s.x = mix(Wm, NodeVectors<Scalar>(s.x - alpha * s.d));
  NodeVectors<Scalar> grad_new(s.x.rows(), n);
  for (Index i = 0; i < n; ++i) grad_new.col(i) = problem.gradient(i, s.x.col(i));
  s.g = mix(Wm, NodeVectors<Scalar>(s.g + (grad_new - s.grad)));
  s.grad = std::move(grad_new);
  if (with_hessian) {
    hess_increment->resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      Matrix<Scalar> h = problem.hessian(i, s.x.col(i));
      (*hess_increment)[k] = h - s.hess[k];
      s.hess[k] = std::move(h);
    }
  }
}

// Direction line: CG on the symmetrized H_i + M I for every node.
template <typename Scalar>
void direction_update(NetworkState<Scalar>& s, const ProblemConstants& constants, Scalar M, Scalar c, int k,
                      StepReport& report) {
  const Index n = s.n();
  for (Index i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(i);
    Matrix<Scalar> A = Scalar(0.5) * (s.H[b] + s.H[b].transpose());
    A.diagonal().array() += M;
    const Vector<Scalar> rhs = s.g.col(i);
    CgResult<Scalar> cg;
    try {
      cg = cg_solve<Scalar>(A, rhs, c);
    } catch (const CgBreakdown& e) {
      throw CgBreakdown(std::string(e.what()) + " (iteration " + std::to_string(k) + ", node " + std::to_string(i) + ")");
    }
    report.cg_iters_max = std::max(report.cg_iters_max, cg.iterations);
    report.cg_replacements_max = std::max(report.cg_replacements_max, cg.replacements);
    if (cg.status == CgStatus::nonpositive_curvature) {
      s.d.col(i) = rhs / static_cast<Scalar>(constants.L1);
      ++report.fallback_count;
      continue;
    }
    if (cg.status == CgStatus::max_iterations) ++report.cg_unconverged;
    const Scalar gn = rhs.norm();
    if (gn > Scalar(0)) report.cg_ratio_max = std::max(report.cg_ratio_max, static_cast<double>(cg.residual_norm / gn));
    s.d.col(i) = cg.x;
  }
}

}  // namespace detail

/// One iteration of the reference form: Hat{H} is mixed directly, which costs
/// an uncompressed d x d exchange per node.
template <typename Scalar>
StepReport step_reference(NetworkState<Scalar>& s, const Problem<Scalar>& problem, MixingPowers<Scalar>& powers,
                          const AlgoParams& params, int k) {
  StepReport rep;
  rep.m = params.m_at(k);
  rep.alpha = params.alpha_at(k);
  const Index n = s.n(), d = s.d_dim();
  const auto& Wm = powers.power(rep.m);

  NodeMatrices<Scalar> hess_inc;
  detail::primal_and_gradient_update(s, problem, Wm, static_cast<Scalar>(rep.alpha), true, &hess_inc);

  const Scalar gamma = static_cast<Scalar>(params.gamma);
  NodeMatrices<Scalar> H_hat(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < H_hat.size(); ++i) {
    const Matrix<Scalar> A = s.E[i] + s.H[i] - s.H_tilde[i];
    const Matrix<Scalar> Q_hat = apply(params.compressor, A);
    const Matrix<Scalar> Q = apply(params.compressor, Matrix<Scalar>(s.H[i] - s.H_tilde[i]));
    s.E[i] = A - Q_hat;
    H_hat[i] = s.H_tilde[i] + Q_hat;
    s.H_tilde[i] = s.H_tilde[i] + Q;
  }
  const NodeMatrices<Scalar> W_H_hat = mix(powers.base(), H_hat);
  for (std::size_t i = 0; i < H_hat.size(); ++i)
    s.H[i] = s.H[i] - gamma * (H_hat[i] - W_H_hat[i]) + hess_inc[i];
  // Keep the auxiliary W * H_tilde consistent so either variant can continue from this state.
  s.H_tilde_w = mix(powers.base(), s.H_tilde);

  const int k_next = k + 1;
  rep.c = params.cg_tol_at(k_next);
  detail::direction_update(s, problem.constants(), static_cast<Scalar>(params.M_at(k_next)), static_cast<Scalar>(rep.c),
                           k, rep);
  s.k = k_next;
  detail::check_finite(s, k);
  rep.bits = n * (d * d * 64 + static_cast<std::int64_t>(rep.m) * 2 * d * 64);
  return rep;
}

/// One iteration of the communication-efficient form: nodes exchange only the
/// compressed Q and Hat{Q}, and W * H_tilde is tracked in H_tilde_w.
template <typename Scalar>
StepReport step_efficient(NetworkState<Scalar>& s, const Problem<Scalar>& problem, MixingPowers<Scalar>& powers,
                          const AlgoParams& params, int k) {
  StepReport rep;
  rep.m = params.m_at(k);
  rep.alpha = params.alpha_at(k);
  const Index n = s.n(), d = s.d_dim();
  const auto& Wm = powers.power(rep.m);

  NodeMatrices<Scalar> hess_inc;
  detail::primal_and_gradient_update(s, problem, Wm, static_cast<Scalar>(rep.alpha), true, &hess_inc);

  const Scalar gamma = static_cast<Scalar>(params.gamma);
  NodeMatrices<Scalar> Q(static_cast<std::size_t>(n)), Q_hat(static_cast<std::size_t>(n));
  std::int64_t payload = 0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    auto c1 = compress(params.compressor, Matrix<Scalar>(s.H[i] - s.H_tilde[i]));
    const Matrix<Scalar> A = s.E[i] + s.H[i] - s.H_tilde[i];
    auto c2 = compress(params.compressor, A);
    payload += c1.bits + c2.bits;
    Q[i] = std::move(c1.dense);
    Q_hat[i] = std::move(c2.dense);
    s.E[i] = A - Q_hat[i];
  }
  const NodeMatrices<Scalar> W_Q = mix(powers.base(), Q);
  const NodeMatrices<Scalar> W_Q_hat = mix(powers.base(), Q_hat);
  for (std::size_t i = 0; i < Q.size(); ++i) {
    const Matrix<Scalar> H_hat = s.H_tilde[i] + Q_hat[i];
    const Matrix<Scalar> H_hat_w = s.H_tilde_w[i] + W_Q_hat[i];
    s.H_tilde[i] = s.H_tilde[i] + Q[i];
    s.H_tilde_w[i] = s.H_tilde_w[i] + W_Q[i];
    s.H[i] = s.H[i] - gamma * (H_hat - H_hat_w) + hess_inc[i];
  }

  const int k_next = k + 1;
  rep.c = params.cg_tol_at(k_next);
  detail::direction_update(s, problem.constants(), static_cast<Scalar>(params.M_at(k_next)), static_cast<Scalar>(rep.c),
                           k, rep);
  s.k = k_next;
  detail::check_finite(s, k);
  rep.bits = payload + n * static_cast<std::int64_t>(rep.m) * 2 * d * 64;
  return rep;
}

template <typename Scalar>
StepReport step(NetworkState<Scalar>& s, const Problem<Scalar>& problem, MixingPowers<Scalar>& powers,
                const AlgoParams& params, int k) {
  return params.variant == Variant::reference ? step_reference(s, problem, powers, params, k)
                                              : step_efficient(s, problem, powers, params, k);
}

/// Iterates until params.done() (converged), max_iters (max_iters), or
/// rel_err exceeds the divergence threshold / the state turns non-finite
/// (diverged). Row k of the trace describes the state after k iterations.
template <typename Scalar>
Trace run(const Problem<Scalar>& problem, const MixingMatrix<Scalar>& mixing, const AlgoParams& params,
          const NodeVectors<Scalar>& x0, const Vector<Scalar>& x_star, RunObserver<Scalar> observer = nullptr) {
  params.validate();
  if (params.compressor.d != problem.d()) throw Error("run: compressor dimension does not match the problem");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  MixingPowers<Scalar> powers(mixing.W);
  const MetricContext ctx = make_metric_context(problem, static_cast<double>(mixing.sigma), delta_bound(params.compressor),
                                                x_star, x0);
  NetworkState<Scalar> state = init_state(problem, x0, true);
  Trace trace;
  RoundMetrics row = compute_metrics(state, problem, ctx, params.m_at(0), params.alpha_at(0), params.cg_tol_at(0));
  row.wall_time = elapsed();
  trace.rows.push_back(row);
  bool keep_going = !observer || observer(state, row);

  std::int64_t bits = 0;
  for (int k = 0; k < params.max_iters && keep_going; ++k) {
    if (params.done(trace.rows.back())) break;
    StepReport rep;
    try {
      rep = step(state, problem, powers, params, k);
    } catch (const CgBreakdown&) {
      throw;
    } catch (const Error& e) {
      trace.status = RunStatus::diverged;
      trace.message = e.what();
      return trace;
    }
    bits += rep.bits;
    row = compute_metrics(state, problem, ctx, params.m_at(k + 1), params.alpha_at(k + 1), rep.c);
    row.fallback_count = rep.fallback_count;
    row.cg_iters_max = rep.cg_iters_max;
    row.cg_ratio_max = rep.cg_ratio_max;
    row.bits_cum = bits;
    row.wall_time = elapsed();
    trace.rows.push_back(row);
    if (!std::isfinite(row.rel_err) || row.rel_err > params.divergence_threshold) {
      trace.status = RunStatus::diverged;
      trace.message = "relative error " + format_real(row.rel_err) + " at iteration " + std::to_string(row.iter) +
                      " exceeds the divergence threshold";
      return trace;
    }
    if (observer && !observer(state, row)) break;
  }
  const double last = trace.rows.back().rel_err;
  trace.status = params.done(trace.rows.back()) ? RunStatus::converged : RunStatus::max_iters;
  trace.message = to_string(trace.status) + " after " + std::to_string(trace.iterations()) + " iterations, rel_err " +
                  format_real(last);
  return trace;
}

}  // namespace dnewton
