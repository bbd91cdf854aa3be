#include "doctest.h"
#include "support.hpp"

#include "dnewton/objectives.hpp"

using namespace dnewton;

namespace {

double relative_gap(const Matrix<double>& a, const Matrix<double>& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

Vector<double> fd_gradient(const Problem<double>& p, Index i, const Vector<double>& x, double h = 1e-6) {
  Vector<double> g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vector<double> a = x, b = x;
    a(k) += h;
    b(k) -= h;
    g(k) = (p.value(i, a) - p.value(i, b)) / (2 * h);
  }
  return g;
}

Matrix<double> fd_hessian(const Problem<double>& p, Index i, const Vector<double>& x, double h = 1e-6) {
  Matrix<double> H(x.size(), x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vector<double> a = x, b = x;
    a(k) += h;
    b(k) -= h;
    H.col(k) = (p.gradient(i, a) - p.gradient(i, b)) / (2 * h);
  }
  return H;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("quadratic generator hits the condition number") {
    for (double kappa : {10.0, 100.0, 1e4}) {
      const auto q = make_quadratic(10, 30, kappa, 2);
      const Eigen::SelfAdjointEigenSolver<Matrix<double>> es(q->mean_Q(), Eigen::EigenvaluesOnly);
      const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
      CHECK(cond >= 0.99 * kappa);
      CHECK(cond <= 1.01 * kappa);
      for (const auto& Qi : q->Q()) {
        CHECK(Qi == Qi.transpose());
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix<double>>(Qi, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0);
      }
      CHECK(q->constants().kappa() >= kappa * (1 - 1e-9));
    }
  }

  TEST_CASE("quadratic generator is deterministic and validates input") {
    const auto a = make_quadratic(4, 6, 50, 9), b = make_quadratic(4, 6, 50, 9), c = make_quadratic(4, 6, 50, 10);
    CHECK(a->Q()[2] == b->Q()[2]);
    CHECK(a->p()[3] == b->p()[3]);
    CHECK(a->Q()[2] != c->Q()[2]);
    CHECK_THROWS_AS(make_quadratic(4, 6, 0.5, 1), Error);
    CHECK_THROWS_AS(make_quadratic(4, 6, 10, 1, 1.0), Error);
  }

  TEST_CASE("quadratic derivatives") {
    const auto q = make_quadratic(5, 8, 20, 3);
    std::mt19937_64 rng(1);
    const Vector<double> zero = Vector<double>::Zero(8);
    for (Index i = 0; i < 5; ++i) {
      CHECK(q->gradient(i, zero) == q->p()[static_cast<std::size_t>(i)]);
      const Vector<double> x = testing::gaussian(8, 1, rng).col(0), y = testing::gaussian(8, 1, rng).col(0);
      CHECK(q->hessian(i, x) == q->Q()[static_cast<std::size_t>(i)]);
      CHECK(q->hessian(i, x) == q->hessian(i, y));
    }
    CHECK_THROWS_AS(q->gradient(5, zero), Error);
    CHECK_THROWS_AS(q->hessian(-1, zero), Error);
    CHECK_THROWS_AS(q->value(0, Vector<double>(Vector<double>::Zero(3))), Error);
  }

  TEST_CASE("logistic gradient at the origin") {
    const auto p = make_logistic(4, 5, 7, 1e-2, 3);
    const double n = 4;
    for (Index i = 0; i < 4; ++i) {
      const auto& O = p->samples()[static_cast<std::size_t>(i)];
      const auto& y = p->labels()[static_cast<std::size_t>(i)];
      Vector<double> expected = Vector<double>::Zero(5);
      for (Index j = 0; j < O.rows(); ++j) expected += n * (-0.5) * y(j) * O.row(j).transpose();
      CHECK((p->gradient(i, Vector<double>::Zero(5)) - expected).norm() < 1e-12);
    }
  }

  TEST_CASE("derivatives match finite differences") {
    const auto logit = make_logistic(6, 5, 10, 1e-3, 4);
    const auto quad = make_quadratic(6, 5, 30, 4);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> node(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
      const Index i = node(rng);
      const Vector<double> x = 0.5 * testing::gaussian(5, 1, rng).col(0);
      for (const Problem<double>* p : {static_cast<const Problem<double>*>(logit.get()),
                                       static_cast<const Problem<double>*>(quad.get())}) {
        CHECK(relative_gap(p->gradient(i, x), fd_gradient(*p, i, x)) <= 1e-6);
        const Matrix<double> H = p->hessian(i, x);
        CHECK(relative_gap(H, fd_hessian(*p, i, x)) <= 1e-5);
        CHECK(H == H.transpose());
      }
    }
  }

  TEST_CASE("logistic curvature is bounded below by the regularizer") {
    const double rho = 1e-3;
    const auto p = make_logistic(30, 20, 100, rho, 2);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector<double> x = 3.0 * testing::gaussian(20, 1, rng).col(0);
      const Index i = trial % 30;
      const double local =
          Eigen::SelfAdjointEigenSolver<Matrix<double>>(p->hessian(i, x), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      CHECK(local >= rho * (1 - 1e-8));
      const double global =
          Eigen::SelfAdjointEigenSolver<Matrix<double>>(global_hessian(*p, x), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      CHECK(global >= p->constants().mu * (1 - 1e-8));
    }
  }

  TEST_CASE("strong convexity witness for quadratics") {
    const auto q = make_quadratic(10, 30, 100, 2);
    const double lmin =
        Eigen::SelfAdjointEigenSolver<Matrix<double>>(global_hessian(*q, Vector<double>(Vector<double>::Zero(30))),
                                                      Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    CHECK(lmin >= q->constants().mu * (1 - 1e-8));
  }

  TEST_CASE("centralized solve on a quadratic matches the direct solve") {
    const auto q = make_quadratic(10, 30, 1e4, 2);
    const auto res = centralized_solve(*q, 1e-12);
    Vector<double> p_bar = Vector<double>::Zero(30);
    for (const auto& p : q->p()) p_bar += p;
    p_bar /= 10.0;
    const Vector<double> direct = -q->mean_Q().fullPivLu().solve(p_bar);
    CHECK((res.x - direct).norm() <= 1e-10 * std::max(1.0, direct.norm()));
    CHECK(global_gradient(*q, res.x).norm() <= 1e-12);
    Vector<double> avg = Vector<double>::Zero(30);
    for (Index i = 0; i < 10; ++i) avg += q->gradient(i, res.x);
    CHECK((avg / 10.0).norm() <= 1e-8);
    CHECK_THROWS_AS(centralized_solve(*q, 0.0), Error);
  }

  TEST_CASE("centralized solve on logistic problems") {
    const auto p = make_logistic(30, 20, 100, 1e-3, 2);
    const auto res = centralized_solve(*p, 1e-12);
    CHECK(global_gradient(*p, res.x).norm() <= std::max(1e-12, res.gradient_norm));
    CHECK(res.gradient_norm <= 1e-12 * std::max(1.0, global_gradient(*p, Vector<double>(Vector<double>::Zero(20))).norm()));
  }

  TEST_CASE("one-sample logistic problem solved by bisection") {
    // f(x) = (1/2)||x||^2 + ln(1 + exp(-y o^T x)). The minimizer is x = t y o, where
    // t = sigmoid(-t ||o||^2), a strictly monotone scalar equation.
    Matrix<double> O(1, 2);
    O << 0.8, -1.7;
    Vector<double> y(1);
    y << -1;
    LogisticProblem<double> p({O}, {y}, 1.0);
    const double s = O.squaredNorm();
    double lo = 0, hi = 1;
    for (int it = 0; it < 200; ++it) {
      const double t = 0.5 * (lo + hi);
      (t - 1.0 / (1.0 + std::exp(t * s)) > 0 ? hi : lo) = t;
    }
    const Vector<double> expected = 0.5 * (lo + hi) * y(0) * O.row(0).transpose();
    const auto res = centralized_solve<double>(p, 1e-13);
    CHECK((res.x - expected).norm() < 1e-12);
    CHECK(global_gradient<double>(p, res.x).norm() <= 1e-13);
  }

  TEST_CASE("problem constants") {
    std::vector<Matrix<double>> Q(3, Matrix<double>::Identity(4, 4));
    std::vector<Vector<double>> pv(3, Vector<double>::Ones(4));
    const QuadraticProblem<double> unit(Q, pv);
    CHECK(estimate_constants(unit).L1 == doctest::Approx(1.0));
    CHECK(estimate_constants(unit).L2 == 0.0);
    CHECK(estimate_constants(unit).mu == doctest::Approx(1.0));

    const auto q10 = make_quadratic(10, 30, 10, 2);
    CHECK(q10->constants().L1 / q10->constants().mu >= 10.0 * (1 - 1e-9));

    const double rho = 1e-3;
    const auto logit = make_logistic(5, 6, 20, rho, 8);
    const ProblemConstants c = logit->constants();
    CHECK(c.mu >= rho);
    double curv = 0;
    for (const auto& O : logit->samples())
      curv = std::max(curv, 0.25 * Eigen::SelfAdjointEigenSolver<Matrix<double>>(O.transpose() * O).eigenvalues().maxCoeff());
    CHECK(c.L1 == doctest::Approx(rho + 5 * curv).epsilon(1e-12));
    CHECK(c.L2 > 0);
  }

  TEST_CASE("invalid problems are rejected") {
    CHECK_THROWS_AS(make_logistic(3, 4, 0, 1e-3, 1), Error);
    CHECK_THROWS_AS(make_logistic(3, 4, 5, 0.0, 1), Error);
    Matrix<double> O = Matrix<double>::Ones(2, 2);
    Vector<double> bad(2);
    bad << 1, 0;
    CHECK_THROWS_AS(LogisticProblem<double>({O}, {bad}, 1.0), Error);
    Matrix<double> asym = Matrix<double>::Identity(2, 2);
    asym(0, 1) = 1;
    CHECK_THROWS_AS(QuadraticProblem<double>({asym}, {Vector<double>(Vector<double>::Zero(2))}), Error);
  }
}
