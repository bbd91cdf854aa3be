#pragma once

#include "dnewton/objectives.hpp"
#include "dnewton/types.hpp"

namespace dnewton {

/// Per-node iterates of the decentralized method. Vectors are column-stacked
/// (column i belongs to node i); matrices hold one block per node.
template <typename Scalar>
struct NetworkState {
  NodeVectors<Scalar> x;  // local copies of the decision variable
  NodeVectors<Scalar> g;  // gradient trackers
  NodeVectors<Scalar> d;  // local directions

  NodeMatrices<Scalar> H;        // Hessian trackers
  NodeMatrices<Scalar> H_tilde;  // compressed counterparts of H
  NodeMatrices<Scalar> E;        // accumulated compression error
  NodeMatrices<Scalar> H_tilde_w;  // i-th block of W * H_tilde (communication-efficient variant)

  // Local oracle values at the current x, reused by the tracking increments.
  NodeVectors<Scalar> grad;
  NodeMatrices<Scalar> hess;

  int k = 0;

  Index n() const { return x.cols(); }
  Index d_dim() const { return x.rows(); }
  bool has_hessian_state() const { return !H.empty(); }
};

/// x0 has one column per node. With `with_hessian` false only x, g, d (and the
/// cached gradients) are populated, which is all first-order methods need.
template <typename Scalar>
NetworkState<Scalar> init_state(const Problem<Scalar>& problem, const NodeVectors<Scalar>& x0,
                                bool with_hessian = true) {
  if (x0.cols() != problem.n() || x0.rows() != problem.d())
    throw Error("init_state: x0 must be " + std::to_string(problem.d()) + " x " + std::to_string(problem.n()) +
                " (one column per node), got " + std::to_string(x0.rows()) + " x " + std::to_string(x0.cols()));
  const Index n = problem.n(), d = problem.d();
  NetworkState<Scalar> s;
  s.x = x0;
  s.d = NodeVectors<Scalar>::Zero(d, n);
  s.grad.resize(d, n);
  for (Index i = 0; i < n; ++i) s.grad.col(i) = problem.gradient(i, x0.col(i));
  s.g = s.grad;
  if (with_hessian) {
    s.hess.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) s.hess[static_cast<std::size_t>(i)] = problem.hessian(i, x0.col(i));
    s.H = s.hess;
    s.H_tilde = zero_blocks<Scalar>(n, d);
    s.E = zero_blocks<Scalar>(n, d);
    s.H_tilde_w = zero_blocks<Scalar>(n, d);
  }
  return s;
}

}  // namespace dnewton
