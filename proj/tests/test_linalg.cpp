#include "doctest.h"
#include "oracles.hpp"
#include "specsense/error.hpp"
#include "specsense/linalg.hpp"

#include <limits>

using namespace specsense;

namespace {

double orthonormality_error(const Matrix& Q) {
  return (Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols())).norm();
}

Matrix random_rank(int rows, int cols, int r, Rng& rng) {
  return oracle::gaussian(rows, r, rng) * oracle::gaussian(r, cols, rng);
}

}  // namespace

TEST_CASE("svd of the identity") {
  const auto f = svd(Matrix::Identity(3, 3));
  CHECK(f.sigma.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(f.sigma(i) == doctest::Approx(1.0));
}

TEST_CASE("svd of a diagonal matrix gives signed permutations") {
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = 3.0;
  A(1, 1) = 1.0;
  const auto f = svd(A);
  CHECK(f.sigma(0) == doctest::Approx(3.0));
  CHECK(f.sigma(1) == doctest::Approx(1.0));
  CHECK(f.U.cwiseAbs().isApprox(Matrix::Identity(2, 2)));
  CHECK(f.V.cwiseAbs().isApprox(Matrix::Identity(2, 2)));
  // Sign convention: first nonzero entry of each U column is nonnegative.
  CHECK(f.U(0, 0) > 0.0);
  CHECK(f.U(1, 1) > 0.0);
}

TEST_CASE("svd factor invariants on random shapes") {
  Rng rng(11);
  for (auto [p, m] : {std::pair{6, 4}, std::pair{4, 6}, std::pair{70, 20}, std::pair{20, 90}}) {
    const Matrix A = oracle::gaussian(p, m, rng);
    const auto f = svd(A);
    CHECK(f.rank() == std::min(p, m));
    CHECK((A - f.reconstruct()).norm() / A.norm() <= 1e-10);
    CHECK(orthonormality_error(f.U) <= 1e-10);
    CHECK(orthonormality_error(f.V) <= 1e-10);
    for (Eigen::Index i = 0; i < f.sigma.size(); ++i) {
      CHECK(f.sigma(i) >= 0.0);
      if (i > 0) CHECK(f.sigma(i) <= f.sigma(i - 1));
    }
    CHECK(f.sigma.sum() == doctest::Approx(oracle::nuclear_norm_eig(A)).epsilon(1e-9));
  }
}

TEST_CASE("svd rejects non-finite input") {
  Matrix A = Matrix::Ones(2, 2);
  A(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(A), Error);
  try {
    svd(A);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("truncated svd of an exact rank-one matrix") {
  Rng rng(3);
  const Vector u = oracle::gaussian(7, 1, rng);
  const Vector v = oracle::gaussian(5, 1, rng);
  const Matrix A = u * v.transpose();
  const auto f = truncated_svd(A, 1);
  CHECK(f.sigma(0) == doctest::Approx(u.norm() * v.norm()).epsilon(1e-12));
  CHECK((A - f.reconstruct()).norm() <= 1e-12 * A.norm());
}

TEST_CASE("truncated svd of diag(5,3,1) at rank two") {
  Matrix A = Matrix::Zero(3, 3);
  A(0, 0) = 5;
  A(1, 1) = 3;
  A(2, 2) = 1;
  const auto f = truncated_svd(A, 2);
  REQUIRE(f.sigma.size() == 2);
  CHECK(f.sigma(0) == doctest::Approx(5.0));
  CHECK(f.sigma(1) == doctest::Approx(3.0));
}

TEST_CASE("truncated svd matches the best rank-r approximation") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix A = random_rank(10, 8, 3, rng) + 1e-8 * oracle::gaussian(10, 8, rng);
    const auto full = svd(A);
    const auto t = truncated_svd(A, 3);
    Matrix best = full.U.leftCols(3) * full.sigma.head(3).asDiagonal() * full.V.leftCols(3).transpose();
    CHECK((t.reconstruct() - best).norm() / best.norm() <= 1e-6);
    for (int i = 0; i < 3; ++i) CHECK(t.sigma(i) == doctest::Approx(full.sigma(i)).epsilon(1e-6));
  }
}

TEST_CASE("truncated svd at full rank agrees with svd") {
  Rng rng(8);
  const Matrix A = oracle::gaussian(9, 6, rng);
  const auto full = svd(A);
  const auto t = truncated_svd(A, 6);
  CHECK((t.sigma - full.sigma).cwiseAbs().maxCoeff() <= 1e-8 * full.sigma(0));
}

TEST_CASE("truncated svd rank out of range") {
  const Matrix A = Matrix::Ones(4, 3);
  CHECK_THROWS_AS(truncated_svd(A, 0), Error);
  CHECK_THROWS_AS(truncated_svd(A, 4), Error);
}

TEST_CASE("truncated svd is deterministic for a fixed sketch seed") {
  Rng rng(21);
  const Matrix A = oracle::gaussian(12, 9, rng);
  const auto a = truncated_svd(A, 4);
  const auto b = truncated_svd(A, 4);
  CHECK(a.U == b.U);
  CHECK(a.sigma == b.sigma);
}

TEST_CASE("shrink on diagonal input") {
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = 3.0;
  A(1, 1) = 1.0;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 2.0;
  CHECK((shrink(A, 1.0) - expected).norm() <= 1e-12);
}

TEST_CASE("shrink with zero threshold is the identity") {
  Rng rng(4);
  const Matrix A = oracle::gaussian(5, 3, rng);
  CHECK((shrink(A, 0.0) - A).norm() <= 1e-12 * A.norm());
}

TEST_CASE("shrink rejects a negative threshold") {
  CHECK_THROWS_AS(shrink(Matrix::Ones(2, 2), -0.1), Error);
}

TEST_CASE("shrink vanishes above the top singular value") {
  Rng rng(6);
  const Matrix A = oracle::gaussian(6, 4, rng);
  const double s1 = svd(A).sigma(0);
  CHECK(shrink(A, s1).norm() == 0.0);
  CHECK(shrink(A, 2.0 * s1).norm() == 0.0);
}

TEST_CASE("shrink passes the local optimality probe") {
  Rng rng(7);
  const Matrix A = oracle::gaussian(4, 3, rng);
  const double alpha = 0.5;
  const Matrix X = shrink(A, alpha);
  const double base = oracle::prox_objective(X, A, alpha);
  int failures = 0;
  for (int k = 0; k < 1000; ++k) {
    Matrix D = oracle::gaussian(4, 3, rng);
    D *= 1e-3 / D.norm();
    if (oracle::prox_objective(X + D, A, alpha) < base - 1e-14) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("shrink is nonexpansive") {
  Rng rng(9);
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    const Matrix A = oracle::gaussian(5, 4, rng);
    const Matrix B = oracle::gaussian(5, 4, rng);
    const double alpha = rng.uniform(0.0, 2.0);
    if ((shrink(A, alpha) - shrink(B, alpha)).norm() > (A - B).norm() * (1.0 + 1e-12)) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("shrink rank is nonincreasing in the threshold") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix A = oracle::gaussian(7, 5, rng);
    const double s1 = svd(A).sigma(0);
    Eigen::Index previous = numerical_rank(A);
    for (int k = 0; k <= 40; ++k) {
      const Eigen::Index r = numerical_rank(shrink(A, k == 40 ? s1 : s1 * k / 40.0));
      CHECK(r <= previous);
      previous = r;
    }
    CHECK(previous == 0);
  }
}

TEST_CASE("shrink on truncated factors") {
  Rng rng(12);
  const Matrix A = random_rank(8, 6, 2, rng);
  const auto f = truncated_svd(A, 2);
  CHECK((shrink(f, 0.1) - shrink(A, 0.1)).norm() <= 1e-8 * A.norm());
}

TEST_CASE("numerical rank and nuclear norm") {
  Rng rng(13);
  CHECK(numerical_rank(random_rank(9, 7, 3, rng)) == 3);
  CHECK(numerical_rank(Matrix::Zero(3, 3)) == 0);
  const Matrix A = oracle::gaussian(5, 5, rng);
  CHECK(nuclear_norm(A) == doctest::Approx(oracle::nuclear_norm_eig(A)).epsilon(1e-10));
  CHECK(all_finite(A));
}
