#pragma once

#include <cmath>
#include <string>

#include "dnewton/types.hpp"

namespace dnewton {

enum class CgStatus {
  converged,
  nonpositive_curvature,  // p^T A p <= 0: the matrix is not positive definite
  max_iterations,
};

template <typename Scalar>
struct CgResult {
  Vector<Scalar> x;
  Scalar residual_norm = Scalar(0);  // true residual ||A x - b||
  int iterations = 0;
  int replacements = 0;  // residual replacements past the first d iterations
  CgStatus status = CgStatus::converged;
};

class CgBreakdown : public Error {
 public:
  explicit CgBreakdown(const std::string& what) : Error(what) {}
};

/// Conjugate gradients for A x = b with A symmetric positive definite.
///
/// Terminates once ||A x - b|| <= c ||b||. In exact arithmetic this happens
/// within dim(b) iterations. In floating point the recurrences lose
/// orthogonality, so the iteration may continue past dim(b): every dim(b)
/// iterations the recursive residual is replaced by the true one, and the total
/// is capped at `max_sweeps` * dim(b). With c = 0 the solve runs to the
/// round-off floor (it stops once a sweep no longer halves the true residual).
/// Nonpositive curvature stops the solve and is reported through `status`.
template <typename Scalar>
CgResult<Scalar> cg_solve(const Matrix<Scalar>& A, const Vector<Scalar>& b, Scalar c, int max_sweeps = 10) {
  const Index d = b.size();
  if (A.rows() != d || A.cols() != d) throw Error("cg_solve: dimension mismatch");
  if (!(c >= Scalar(0) && c <= Scalar(1))) throw Error("cg_solve: tolerance c must lie in [0,1]");
  if (!A.allFinite() || !b.allFinite()) throw CgBreakdown("cg_solve: non-finite input");

  CgResult<Scalar> res;
  res.x = Vector<Scalar>::Zero(d);
  const Scalar bnorm = b.norm();
  if (bnorm == Scalar(0)) return res;
  const Scalar target = c * bnorm;

  Vector<Scalar> r = b;
  Vector<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  Scalar previous = bnorm;
  const Index cap = d * std::max(1, max_sweeps);
  using std::sqrt;
  for (Index it = 1; it <= cap; ++it) {
    const Vector<Scalar> Ap = A * p;
    const Scalar curvature = p.dot(Ap);
    if (!(curvature > Scalar(0))) {
      res.status = CgStatus::nonpositive_curvature;
      res.residual_norm = (b - A * res.x).norm();
      return res;
    }
    const Scalar step = rr / curvature;
    res.x.noalias() += step * p;
    r.noalias() -= step * Ap;
    ++res.iterations;

    const bool sweep_end = it % d == 0;
    if (sweep_end || sqrt(r.squaredNorm()) <= target) {
      const Vector<Scalar> true_r = b - A * res.x;
      res.residual_norm = true_r.norm();
      if (res.residual_norm <= target) return res;
      if (sweep_end) {
        if (c == Scalar(0) && res.residual_norm > Scalar(0.5) * previous) return res;
        previous = res.residual_norm;
        r = true_r;
        ++res.replacements;
      }
    }
    const Scalar rr_next = r.squaredNorm();
    if (rr_next == Scalar(0)) {
      res.residual_norm = (b - A * res.x).norm();
      return res;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  res.residual_norm = (b - A * res.x).norm();
  res.status = res.residual_norm <= target ? CgStatus::converged : CgStatus::max_iterations;
  return res;
}

}  // namespace dnewton
