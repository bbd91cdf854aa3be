#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "dnewton/diagnostics.hpp"
#include "dnewton/graph.hpp"
#include "dnewton/objectives.hpp"
#include "dnewton/state.hpp"
#include "dnewton/trace.hpp"

namespace dnewton {

/// First-order gradient tracking:
///   x' = W^m (x - alpha g),   g' = W^m (g + grad f(x') - grad f(x)).
struct GTParams {
  double alpha = 1e-2;
  int m = 1;
  int max_iters = 100000;
  double stop_tol = 1e-10;
  double divergence_threshold = 1e6;

  void validate() const {
    if (!(alpha >= 0.0)) throw Error("GTParams: alpha must be >= 0");
    if (m < 1) throw Error("GTParams: m must be >= 1");
    if (max_iters < 0) throw Error("GTParams: max_iters must be >= 0");
  }
};

/// One step on the (x, g) part of `s`. The cached gradients in `s.grad` are refreshed.
template <typename Scalar>
void gt_step(NetworkState<Scalar>& s, const Problem<Scalar>& problem, const Matrix<Scalar>& Wm, Scalar alpha) {
  s.x = mix(Wm, NodeVectors<Scalar>(s.x - alpha * s.g));
  NodeVectors<Scalar> grad_new(s.x.rows(), s.x.cols());
  for (Index i = 0; i < s.n(); ++i) grad_new.col(i) = problem.gradient(i, s.x.col(i));
  s.g = mix(Wm, NodeVectors<Scalar>(s.g + (grad_new - s.grad)));
  s.grad = std::move(grad_new);
  ++s.k;
  if (!s.x.allFinite() || !s.g.allFinite()) throw Error("gt_step: non-finite state at iteration " + std::to_string(s.k));
}

template <typename Scalar>
Trace gt_run(const Problem<Scalar>& problem, const MixingMatrix<Scalar>& mixing, const GTParams& params,
             const NodeVectors<Scalar>& x0, const Vector<Scalar>& x_star, RunObserver<Scalar> observer = nullptr) {
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  MixingPowers<Scalar> powers(mixing.W);
  const auto& Wm = powers.power(params.m);
  const MetricContext ctx = make_metric_context(problem, static_cast<double>(mixing.sigma), 1.0, x_star, x0);
  NetworkState<Scalar> s = init_state(problem, x0, false);
  const std::int64_t bits_per_iter = problem.n() * static_cast<std::int64_t>(params.m) * 2 * problem.d() * 64;

  Trace trace;
  RoundMetrics row = compute_metrics(s, problem, ctx, params.m, params.alpha, 0.0);
  trace.rows.push_back(row);
  bool keep_going = !observer || observer(s, row);
  for (int k = 0; k < params.max_iters && keep_going; ++k) {
    if (params.stop_tol > 0 && trace.rows.back().rel_err <= params.stop_tol) break;
    try {
      gt_step(s, problem, Wm, static_cast<Scalar>(params.alpha));
    } catch (const Error& e) {
      trace.status = RunStatus::diverged;
      trace.message = e.what();
      return trace;
    }
    row = compute_metrics(s, problem, ctx, params.m, params.alpha, 0.0);
    row.bits_cum = bits_per_iter * (k + 1);
    row.wall_time = elapsed();
    trace.rows.push_back(row);
    if (!std::isfinite(row.rel_err) || row.rel_err > params.divergence_threshold) {
      trace.status = RunStatus::diverged;
      trace.message = "relative error diverged at iteration " + std::to_string(row.iter);
      return trace;
    }
    if (observer && !observer(s, row)) break;
  }
  const double last = trace.rows.back().rel_err;
  trace.status = (params.stop_tol > 0 && last <= params.stop_tol) ? RunStatus::converged : RunStatus::max_iters;
  trace.message = to_string(trace.status) + " after " + std::to_string(trace.iterations()) + " iterations";
  return trace;
}

/// Iterations until rel_err <= tol, or -1 if not reached within `budget`
/// (or on divergence). Only the relative error is tracked.
template <typename Scalar>
int gt_iterations_to(const Problem<Scalar>& problem, const Matrix<Scalar>& Wm, double alpha,
                     const NodeVectors<Scalar>& x0, const Vector<Scalar>& x_star, double tol, int budget) {
  NetworkState<Scalar> s = init_state(problem, x0, false);
  const double n = static_cast<double>(problem.n());
  double denom = static_cast<double>((x0.colwise() - x_star).squaredNorm());
  if (denom == 0) denom = 1;
  auto rel = [&] { return static_cast<double>((s.x.colwise() - x_star).squaredNorm()) / n / denom; };
  if (rel() <= tol) return 0;
  for (int k = 1; k <= budget; ++k) {
    s.x = mix(Wm, NodeVectors<Scalar>(s.x - static_cast<Scalar>(alpha) * s.g));
    NodeVectors<Scalar> grad_new(s.x.rows(), s.x.cols());
    for (Index i = 0; i < s.n(); ++i) grad_new.col(i) = problem.gradient(i, s.x.col(i));
    s.g = mix(Wm, NodeVectors<Scalar>(s.g + (grad_new - s.grad)));
    s.grad = std::move(grad_new);
    const double e = rel();
    if (!std::isfinite(e) || e > 1e6) return -1;
    if (e <= tol) return k;
  }
  return -1;
}

struct TunedStep {
  double alpha = 0;
  int iterations = -1;  // to the tuning tolerance; -1 if no candidate reached it
  int evaluations = 0;
};

/// Step size minimizing iterations-to-tol: a log grid over [lo, hi] followed by
/// golden-section refinement in log(alpha) around the best grid point. Each
/// evaluation is capped at the best count so far.
template <typename Scalar>
TunedStep tune_gt_step(const Problem<Scalar>& problem, const MixingMatrix<Scalar>& mixing, int m,
                       const NodeVectors<Scalar>& x0, const Vector<Scalar>& x_star, double tol, int budget,
                       double lo, double hi, int grid_points = 13, int golden_steps = 12) {
  MixingPowers<Scalar> powers(mixing.W);
  const auto& Wm = powers.power(m);
  TunedStep best;
  int cap = budget;
  auto evaluate = [&](double log_alpha) {
    const double alpha = std::exp(log_alpha);
    ++best.evaluations;
    const int its = gt_iterations_to(problem, Wm, alpha, x0, x_star, tol, cap);
    if (its >= 0 && (best.iterations < 0 || its < best.iterations || (its == best.iterations && alpha > best.alpha))) {
      best.iterations = its;
      best.alpha = alpha;
      cap = its;
    }
    return its < 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(its);
  };

  const double llo = std::log(lo), lhi = std::log(hi);
  std::vector<double> grid(static_cast<std::size_t>(grid_points)), cost(grid.size());
  // Largest steps first: unstable ones fail fast and good ones tighten the cap early.
  for (int i = grid_points - 1; i >= 0; --i) {
    grid[static_cast<std::size_t>(i)] = llo + (lhi - llo) * i / (grid_points - 1);
    cost[static_cast<std::size_t>(i)] = evaluate(grid[static_cast<std::size_t>(i)]);
  }
  if (best.iterations < 0) return best;

  std::size_t ib = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (cost[i] <= cost[ib]) ib = i;
  double a = grid[ib == 0 ? 0 : ib - 1];
  double b = grid[std::min(ib + 1, grid.size() - 1)];
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = evaluate(c), fd = evaluate(d);
  for (int it = 0; it < golden_steps; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = evaluate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = evaluate(d);
    }
  }
  return best;
}

}  // namespace dnewton
