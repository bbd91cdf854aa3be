#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnewton/types.hpp"

namespace dnewton {

/// Smoothness and convexity constants of a finite-sum objective.
struct ProblemConstants {
  double L1 = 0.0;  // gradient Lipschitz constant of each f_i
  double L2 = 0.0;  // Hessian Lipschitz constant of each f_i
  double mu = 0.0;  // strong convexity of the average F
  double kappa() const { return L1 / mu; }
};

/// F(x) = (1/n) sum_i f_i(x), with one private f_i per node.
template <typename Scalar>
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string family() const = 0;
  virtual Index n() const = 0;
  virtual Index d() const = 0;

  virtual Scalar value(Index i, const Vector<Scalar>& x) const = 0;
  virtual Vector<Scalar> gradient(Index i, const Vector<Scalar>& x) const = 0;
  virtual Matrix<Scalar> hessian(Index i, const Vector<Scalar>& x) const = 0;

  const ProblemConstants& constants() const { return constants_; }
  std::uint64_t seed() const { return seed_; }

 protected:
  void check_node(Index i) const {
    if (i < 0 || i >= n())
      throw Error("node index " + std::to_string(i) + " out of range [0, " + std::to_string(n()) + ")");
  }
  void check_point(const Vector<Scalar>& x) const {
    if (x.size() != d())
      throw Error("point has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(d()));
  }

  ProblemConstants constants_;
  std::uint64_t seed_ = 0;
};

template <typename Scalar>
Scalar eval_value(const Problem<Scalar>& p, Index i, const Vector<Scalar>& x) { return p.value(i, x); }
template <typename Scalar>
Vector<Scalar> eval_gradient(const Problem<Scalar>& p, Index i, const Vector<Scalar>& x) { return p.gradient(i, x); }
template <typename Scalar>
Matrix<Scalar> eval_hessian(const Problem<Scalar>& p, Index i, const Vector<Scalar>& x) { return p.hessian(i, x); }

template <typename Scalar>
Scalar global_value(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  Scalar s(0);
  for (Index i = 0; i < p.n(); ++i) s += p.value(i, x);
  return s / static_cast<Scalar>(p.n());
}

template <typename Scalar>
Vector<Scalar> global_gradient(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  Vector<Scalar> g = Vector<Scalar>::Zero(p.d());
  for (Index i = 0; i < p.n(); ++i) g += p.gradient(i, x);
  return g / static_cast<Scalar>(p.n());
}

template <typename Scalar>
Matrix<Scalar> global_hessian(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  Matrix<Scalar> h = Matrix<Scalar>::Zero(p.d(), p.d());
  for (Index i = 0; i < p.n(); ++i) h += p.hessian(i, x);
  return h / static_cast<Scalar>(p.n());
}

// ---------------------------------------------------------------------------
// Quadratic: f_i(x) = 1/2 x^T Q_i x + p_i^T x

template <typename Scalar>
class QuadraticProblem final : public Problem<Scalar> {
 public:
  QuadraticProblem(std::vector<Matrix<Scalar>> Q, std::vector<Vector<Scalar>> p, std::uint64_t seed = 0)
      : Q_(std::move(Q)), p_(std::move(p)) {
    if (Q_.empty() || Q_.size() != p_.size()) throw Error("QuadraticProblem: need one (Q_i, p_i) pair per node");
    const Index d = Q_.front().rows();
    for (std::size_t i = 0; i < Q_.size(); ++i) {
      if (Q_[i].rows() != d || Q_[i].cols() != d || p_[i].size() != d)
        throw Error("QuadraticProblem: inconsistent dimensions at node " + std::to_string(i));
      if ((Q_[i] - Q_[i].transpose()).norm() > Scalar(1e-12) * (Scalar(1) + Q_[i].norm()))
        throw Error("QuadraticProblem: Q_" + std::to_string(i) + " is not symmetric");
    }
    this->seed_ = seed;
    this->constants_ = compute_constants();
  }

  std::string family() const override { return "quadratic"; }
  Index n() const override { return static_cast<Index>(Q_.size()); }
  Index d() const override { return Q_.front().rows(); }

  Scalar value(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    const auto k = static_cast<std::size_t>(i);
    return Scalar(0.5) * x.dot(Q_[k] * x) + p_[k].dot(x);
  }
  Vector<Scalar> gradient(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    const auto k = static_cast<std::size_t>(i);
    return Q_[k] * x + p_[k];
  }
  Matrix<Scalar> hessian(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    return Q_[static_cast<std::size_t>(i)];
  }

  const std::vector<Matrix<Scalar>>& Q() const { return Q_; }
  const std::vector<Vector<Scalar>>& p() const { return p_; }

  Matrix<Scalar> mean_Q() const {
    Matrix<Scalar> m = Matrix<Scalar>::Zero(d(), d());
    for (const auto& q : Q_) m += q;
    return m / static_cast<Scalar>(n());
  }
  Vector<Scalar> mean_p() const {
    Vector<Scalar> m = Vector<Scalar>::Zero(d());
    for (const auto& v : p_) m += v;
    return m / static_cast<Scalar>(n());
  }

 private:
  ProblemConstants compute_constants() const {
    ProblemConstants c;
    for (const auto& q : Q_) {
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(q, Eigen::EigenvaluesOnly);
      c.L1 = std::max(c.L1, static_cast<double>(es.eigenvalues().maxCoeff()));
    }
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(mean_Q(), Eigen::EigenvaluesOnly);
    c.mu = static_cast<double>(es.eigenvalues().minCoeff());
    c.L2 = 0.0;
    return c;
  }

  std::vector<Matrix<Scalar>> Q_;
  std::vector<Vector<Scalar>> p_;
};

// ---------------------------------------------------------------------------
// Logistic: f_i(x) = (rho/2)||x||^2 + n * sum_j ln(1 + exp(-(o_ij^T x) p_ij)),
// so that (1/n) sum_i f_i = (rho/2)||x||^2 + sum_{i,j} ln(1 + exp(-(o_ij^T x) p_ij)).

template <typename Scalar>
class LogisticProblem final : public Problem<Scalar> {
 public:
  /// samples[i] is m_i x d (one sample per row); labels[i] holds +-1.
  LogisticProblem(std::vector<Matrix<Scalar>> samples, std::vector<Vector<Scalar>> labels, Scalar rho,
                  std::uint64_t seed = 0)
      : samples_(std::move(samples)), labels_(std::move(labels)), rho_(rho) {
    if (samples_.empty() || samples_.size() != labels_.size())
      throw Error("LogisticProblem: need one (samples, labels) pair per node");
    if (!(rho_ > Scalar(0))) throw Error("LogisticProblem: rho must be > 0");
    const Index d = samples_.front().cols();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (samples_[i].cols() != d || samples_[i].rows() != labels_[i].size() || samples_[i].rows() < 1)
        throw Error("LogisticProblem: inconsistent sample shapes at node " + std::to_string(i));
      for (Index j = 0; j < labels_[i].size(); ++j)
        if (labels_[i](j) != Scalar(1) && labels_[i](j) != Scalar(-1))
          throw Error("LogisticProblem: labels must be -1 or +1");
    }
    this->seed_ = seed;
    this->constants_ = compute_constants();
  }

  std::string family() const override { return "logistic"; }
  Index n() const override { return static_cast<Index>(samples_.size()); }
  Index d() const override { return samples_.front().cols(); }

  Scalar value(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    const auto k = static_cast<std::size_t>(i);
    const Vector<Scalar> t = labels_[k].cwiseProduct(samples_[k] * x);
    Scalar loss(0);
    using std::abs;
    using std::exp;
    using std::log1p;
    using std::max;
    for (Index j = 0; j < t.size(); ++j) loss += max(-t(j), Scalar(0)) + log1p(exp(-abs(t(j))));
    return Scalar(0.5) * rho_ * x.squaredNorm() + scale() * loss;
  }

  Vector<Scalar> gradient(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    const auto k = static_cast<std::size_t>(i);
    const Vector<Scalar> t = labels_[k].cwiseProduct(samples_[k] * x);
    Vector<Scalar> w(t.size());
    for (Index j = 0; j < t.size(); ++j) w(j) = -scale() * labels_[k](j) * sigmoid(-t(j));
    return rho_ * x + samples_[k].transpose() * w;
  }

  Matrix<Scalar> hessian(Index i, const Vector<Scalar>& x) const override {
    this->check_node(i);
    this->check_point(x);
    const auto k = static_cast<std::size_t>(i);
    const Vector<Scalar> t = labels_[k].cwiseProduct(samples_[k] * x);
    Vector<Scalar> w(t.size());
    for (Index j = 0; j < t.size(); ++j) w(j) = scale() * sigmoid(t(j)) * sigmoid(-t(j));
    Matrix<Scalar> h = samples_[k].transpose() * w.asDiagonal() * samples_[k];
    h.diagonal().array() += rho_;
    return Scalar(0.5) * (h + h.transpose());
  }

  const std::vector<Matrix<Scalar>>& samples() const { return samples_; }
  const std::vector<Vector<Scalar>>& labels() const { return labels_; }
  Scalar rho() const { return rho_; }

 private:
  Scalar scale() const { return static_cast<Scalar>(n()); }

  static Scalar sigmoid(Scalar t) {
    using std::exp;
    if (t >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-t));
    const Scalar e = exp(t);
    return e / (Scalar(1) + e);
  }

  ProblemConstants compute_constants() const {
    ProblemConstants c;
    const double nn = static_cast<double>(n());
    double max_curv = 0.0, max_cubic = 0.0;
    for (const auto& O : samples_) {
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(O.transpose() * O, Eigen::EigenvaluesOnly);
      max_curv = std::max(max_curv, 0.25 * static_cast<double>(es.eigenvalues().maxCoeff()));
      double cubic = 0.0;
      for (Index j = 0; j < O.rows(); ++j) cubic += std::pow(static_cast<double>(O.row(j).norm()), 3.0);
      max_cubic = std::max(max_cubic, cubic);
    }
    c.L1 = static_cast<double>(rho_) + nn * max_curv;
    c.mu = static_cast<double>(rho_);
    // |d^3/dt^3 ln(1 + e^{-t})| <= 1/(6 sqrt 3)
    c.L2 = nn * max_cubic / (6.0 * std::sqrt(3.0));
    return c;
  }

  std::vector<Matrix<Scalar>> samples_;
  std::vector<Vector<Scalar>> labels_;
  Scalar rho_;
};

// ---------------------------------------------------------------------------
// Generators

namespace detail {

template <typename Scalar>
Matrix<Scalar> gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = static_cast<Scalar>(normal(rng));
  return m;
}

template <typename Scalar>
Matrix<Scalar> random_orthogonal(Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix<Scalar>> qr(gaussian_matrix<Scalar>(d, d, rng));
  Matrix<Scalar> Q = qr.householderQ();
  const Matrix<Scalar> R = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Index c = 0; c < d; ++c)
    if (R(c, c) < Scalar(0)) Q.col(c) = -Q.col(c);
  return Q;
}

}  // namespace detail

/// Quadratic instance whose average Hessian has condition number kappa_target.
///
/// The nodes share a base matrix B = U diag(lambda) U^T (U random orthogonal,
/// lambda log-uniform in [1, kappa] with both endpoints pinned) and perturb it
/// multiplicatively: Q_i = B^{1/2} (I + S_i) B^{1/2}, where the S_i are
/// symmetric Gaussian, centered across nodes and scaled to spectral norm at
/// most `heterogeneity` < 1. Hence mean(Q_i) = B exactly and each Q_i is SPD.
template <typename Scalar = double>
std::unique_ptr<QuadraticProblem<Scalar>> make_quadratic(Index n, Index d, double kappa_target, std::uint64_t seed,
                                                         double heterogeneity = 0.5) {
  if (!(kappa_target >= 1.0)) throw Error("make_quadratic: kappa_target must be >= 1");
  if (n < 1 || d < 1) throw Error("make_quadratic: need n >= 1 and d >= 1");
  if (!(heterogeneity >= 0.0 && heterogeneity < 1.0)) throw Error("make_quadratic: heterogeneity must lie in [0,1)");
  std::mt19937_64 rng(seed);
  const Matrix<Scalar> U = detail::random_orthogonal<Scalar>(d, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector<Scalar> lambda(d);
  const double log_kappa = std::log(kappa_target);
  for (Index k = 0; k < d; ++k) lambda(k) = static_cast<Scalar>(std::exp(unit(rng) * log_kappa));
  lambda(0) = Scalar(1);
  if (d > 1) lambda(d - 1) = static_cast<Scalar>(kappa_target);
  const Matrix<Scalar> root = U * lambda.cwiseSqrt().asDiagonal() * U.transpose();

  std::vector<Matrix<Scalar>> S(static_cast<std::size_t>(n));
  Matrix<Scalar> S_mean = Matrix<Scalar>::Zero(d, d);
  for (auto& s : S) {
    const Matrix<Scalar> G = detail::gaussian_matrix<Scalar>(d, d, rng);
    s = Scalar(0.5) * (G + G.transpose());
    S_mean += s;
  }
  S_mean /= static_cast<Scalar>(n);
  double max_norm = 0.0;
  for (auto& s : S) {
    s -= S_mean;
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(s, Eigen::EigenvaluesOnly);
    max_norm = std::max(max_norm, static_cast<double>(es.eigenvalues().cwiseAbs().maxCoeff()));
  }
  const Scalar shrink = max_norm > 0.0 ? static_cast<Scalar>(heterogeneity / max_norm) : Scalar(0);

  std::vector<Matrix<Scalar>> Q(static_cast<std::size_t>(n));
  std::vector<Vector<Scalar>> p(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < Q.size(); ++i) {
    Matrix<Scalar> inner = shrink * S[i];
    inner.diagonal().array() += Scalar(1);
    const Matrix<Scalar> q = root * inner * root;
    Q[i] = Scalar(0.5) * (q + q.transpose());
    p[i] = detail::gaussian_matrix<Scalar>(d, 1, rng);
  }
  return std::make_unique<QuadraticProblem<Scalar>>(std::move(Q), std::move(p), seed);
}

/// Logistic regression with standard Gaussian features and uniform +-1 labels.
template <typename Scalar = double>
std::unique_ptr<LogisticProblem<Scalar>> make_logistic(Index n, Index d, Index m_per_node, double rho,
                                                       std::uint64_t seed) {
  if (m_per_node < 1) throw Error("make_logistic: m_per_node must be >= 1");
  if (!(rho > 0.0)) throw Error("make_logistic: rho must be > 0");
  if (n < 1 || d < 1) throw Error("make_logistic: need n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<Matrix<Scalar>> samples(static_cast<std::size_t>(n));
  std::vector<Vector<Scalar>> labels(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = detail::gaussian_matrix<Scalar>(m_per_node, d, rng);
    labels[i].resize(m_per_node);
    for (Index j = 0; j < m_per_node; ++j) labels[i](j) = coin(rng) ? Scalar(1) : Scalar(-1);
  }
  return std::make_unique<LogisticProblem<Scalar>>(std::move(samples), std::move(labels), static_cast<Scalar>(rho),
                                                   seed);
}

template <typename Scalar>
ProblemConstants estimate_constants(const Problem<Scalar>& problem) {
  return problem.constants();
}

// ---------------------------------------------------------------------------
// Centralized reference solver

template <typename Scalar>
struct CentralizedResult {
  Vector<Scalar> x;
  Scalar gradient_norm = Scalar(0);
  int iterations = 0;
};

/// Damped Newton with Armijo backtracking on F, started from x = 0.
/// Stops once ||grad F|| <= tol. If round-off stalls progress first, the result
/// is accepted when ||grad F|| <= tol * max(1, ||grad F(0)||); otherwise throws.
template <typename Scalar>
CentralizedResult<Scalar> centralized_solve(const Problem<Scalar>& problem, double tol = 1e-12,
                                            int max_iters = 200) {
  if (!(tol > 0.0)) throw Error("centralized_solve: tol must be > 0");
  Vector<Scalar> x = Vector<Scalar>::Zero(problem.d());
  Vector<Scalar> g = global_gradient(problem, x);
  const Scalar g0 = g.norm();
  const Scalar relaxed = static_cast<Scalar>(tol) * std::max(Scalar(1), g0);
  Scalar best = g0;
  int stall = 0;
  CentralizedResult<Scalar> res;
  for (int it = 0; it < max_iters; ++it) {
    const Scalar gnorm = g.norm();
    if (gnorm <= static_cast<Scalar>(tol)) {
      res.x = x;
      res.gradient_norm = gnorm;
      res.iterations = it;
      return res;
    }
    if (gnorm < best * Scalar(0.5)) {
      best = gnorm;
      stall = 0;
    } else if (++stall >= 4 && gnorm <= relaxed) {
      res.x = x;
      res.gradient_norm = gnorm;
      res.iterations = it;
      return res;
    }
    const Matrix<Scalar> H = global_hessian(problem, x);
    const Vector<Scalar> step = H.ldlt().solve(g);
    const Scalar f0 = global_value(problem, x);
    const Scalar slope = g.dot(step);
    Scalar t(1);
    Vector<Scalar> trial = x - step;
    for (int ls = 0; ls < 60; ++ls) {
      if (global_value(problem, trial) <= f0 - Scalar(1e-4) * t * slope) break;
      t *= Scalar(0.5);
      trial = x - t * step;
    }
    x = trial;
    g = global_gradient(problem, x);
    if (!g.allFinite()) throw Error("centralized_solve: non-finite gradient");
  }
  if (g.norm() <= relaxed) {
    res.x = x;
    res.gradient_norm = g.norm();
    res.iterations = max_iters;
    return res;
  }
  throw Error("centralized_solve: no convergence after " + std::to_string(max_iters) +
              " iterations (||grad F|| = " + std::to_string(static_cast<double>(g.norm())) + ")");
}

}  // namespace dnewton
