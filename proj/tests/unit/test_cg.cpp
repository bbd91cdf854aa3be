#include <limits>

#include <Eigen/Dense>

#include "doctest.h"
#include "support.hpp"

#include "dnewton/cg.hpp"

using namespace dnewton;

TEST_SUITE("cg") {
  TEST_CASE("identity system") {
    std::mt19937_64 rng(1);
    const Vector<double> g = testing::gaussian(7, 1, rng).col(0);
    const auto r = cg_solve<double>(Matrix<double>::Identity(7, 7), g, 0.0);
    CHECK(r.status == CgStatus::converged);
    CHECK((r.x - g).norm() == 0.0);
    CHECK(r.residual_norm == 0.0);
    CHECK(r.iterations == 1);
  }

  TEST_CASE("diagonal system") {
    Matrix<double> A = Matrix<double>::Zero(3, 3);
    A.diagonal() << 1, 2, 4;
    const auto r = cg_solve<double>(A, Vector<double>::Ones(3), 0.0);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.x(1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.x(2) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.iterations <= 3);
  }

  TEST_CASE("random SPD systems match a direct solve") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const Index d = 5 + trial % 26;
      const Matrix<double> A = testing::random_spd(d, rng, 0.5);
      const Vector<double> b = testing::gaussian(d, 1, rng).col(0);
      const Vector<double> direct = A.ldlt().solve(b);
      const auto r = cg_solve<double>(A, b, 0.0);
      CHECK((r.x - direct).norm() <= 1e-8 * direct.norm());
    }
  }

  TEST_CASE("inexact solves meet the relative residual") {
    std::mt19937_64 rng(3);
    for (double c : {1e-1, 1e-4, 1e-10}) {
      const Matrix<double> A = testing::random_spd(20, rng, 1.0);
      const Vector<double> b = testing::gaussian(20, 1, rng).col(0);
      const auto r = cg_solve<double>(A, b, c);
      CHECK(r.status == CgStatus::converged);
      CHECK((A * r.x - b).norm() == doctest::Approx(r.residual_norm).epsilon(1e-9));
      CHECK(r.residual_norm <= c * b.norm());
    }
  }

  TEST_CASE("ill-conditioned systems use residual replacement") {
    const Index d = 30;
    Matrix<double> A = Matrix<double>::Zero(d, d);
    for (Index i = 0; i < d; ++i) A(i, i) = std::pow(1e4, static_cast<double>(i) / (d - 1));
    std::mt19937_64 rng(4);
    const Matrix<double> U = Eigen::HouseholderQR<Matrix<double>>(testing::gaussian(d, d, rng)).householderQ();
    const Matrix<double> S = U * A * U.transpose();
    const Matrix<double> Ssym = 0.5 * (S + S.transpose());
    const Vector<double> b = testing::gaussian(d, 1, rng).col(0);
    const auto r = cg_solve<double>(Ssym, b, 1e-10);
    CHECK(r.status == CgStatus::converged);
    CHECK(r.residual_norm <= 1e-10 * b.norm());
    CHECK(r.iterations <= 10 * d);
  }

  TEST_CASE("zero right-hand side") {
    const auto r = cg_solve<double>(Matrix<double>::Identity(3, 3), Vector<double>::Zero(3), 0.5);
    CHECK(r.x.isZero());
    CHECK(r.iterations == 0);
  }

  TEST_CASE("breakdown and invalid input") {
    Matrix<double> indefinite = Matrix<double>::Identity(2, 2);
    indefinite(1, 1) = -1;
    Vector<double> b(2);
    b << 0, 1;
    CHECK(cg_solve<double>(indefinite, b, 0.0).status == CgStatus::nonpositive_curvature);

    Matrix<double> nan = Matrix<double>::Identity(2, 2);
    nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cg_solve<double>(nan, b, 0.0), CgBreakdown);
    CHECK_THROWS_AS(cg_solve<double>(Matrix<double>::Identity(2, 2), b, 1.5), Error);
    CHECK_THROWS_AS(cg_solve<double>(Matrix<double>::Identity(3, 3), b, 0.1), Error);
  }
}
