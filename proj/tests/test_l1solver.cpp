#include "doctest.h"
#include "oracles.hpp"
#include "specsense/error.hpp"
#include "specsense/l1solver.hpp"

#include <limits>

using namespace specsense;

namespace {

L1Options with(EqualityMethod method) {
  L1Options o;
  o.method = method;
  return o;
}

// KKT certificate for the ball program: with r = b - A x and the multiplier
// mu read off the support, A^T r <= mu w everywhere with equality on the
// support, and the residual sits on the ball boundary.
bool ball_kkt(const Matrix& A, const Vector& b, const Vector& w, double radius, const Vector& x) {
  const Vector g = A.transpose() * (b - A * x);
  double mu = -1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) > 0.0 && w(i) > 0.0) mu = std::max(mu, g(i) / w(i));
  if (mu <= 0.0) return false;
  const double scale = g.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (g(i) > mu * w(i) + 1e-6 * scale) return false;
    if (x(i) > 0.0 && std::abs(g(i) - mu * w(i)) > 1e-6 * scale) return false;
  }
  return std::abs((A * x - b).norm() - radius) <= 1e-6 * radius;
}

}  // namespace

TEST_CASE("zero measurements give the zero vector") {
  Rng rng(1);
  const Matrix A = oracle::gaussian(4, 10, rng);
  const auto r = solve_weighted_l1(A, Vector::Zero(4), Vector::Ones(10), 0.0);
  CHECK(r.x.norm() == 0.0);
  CHECK(r.objective == 0.0);
}

TEST_CASE("single occupied channel from four Gaussian rows") {
  Rng rng(2);
  int planted_optimal = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix A = oracle::gaussian(4, 12, rng);
    const int k = static_cast<int>(rng.below(12));
    const double g = rng.uniform(0.1, 2.0);
    const Vector b = g * A.col(k);
    const auto r = solve_weighted_l1(A, b, Vector::Ones(12), 0.0);
    const double best = oracle::brute_force_lp(A, b, Vector::Ones(12));
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(r.objective <= g * (1.0 + 1e-12));
    // Whenever the planted vector is the optimum it is the vertex returned.
    if (best >= g * (1.0 - 1e-9)) {
      ++planted_optimal;
      Vector truth = Vector::Zero(12);
      truth(k) = g;
      CHECK((r.x - truth).norm() <= 1e-9 * g);
    }
  }
  CHECK(planted_optimal > 0);
}

TEST_CASE("off-T mass is free") {
  Rng rng(3);
  const Matrix A = oracle::gaussian(6, 12, rng);
  Vector truth = Vector::Zero(12);
  truth(2) = 1.5;
  truth(7) = 0.5;
  const Vector b = A * truth;
  Vector w = Vector::Ones(12);
  w(2) = 0.0;
  w(7) = 0.0;
  const auto r = solve_weighted_l1(A, b, w, 0.0);
  CHECK(r.objective == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((A * r.x - b).norm() <= 1e-9 * b.norm());
  CHECK((r.x - truth).norm() <= 1e-8);
}

TEST_CASE("simplex and continuation agree with vertex enumeration") {
  Rng rng(4);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 3;
    const int n = 8;
    const Matrix A = oracle::gaussian(p, n, rng);
    Vector x0 = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
      if (rng.bernoulli(0.4)) x0(i) = rng.uniform(0.0, 1.0);
    Vector w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0.5, 2.0);
    const Vector b = A * x0;
    const double best = oracle::brute_force_lp(A, b, w);
    if (!std::isfinite(best)) continue;  // only when x0 = 0 with free columns is not at play
    ++checked;
    const auto simplex = solve_weighted_l1(A, b, w, 0.0, with(EqualityMethod::Simplex));
    const auto cont = solve_weighted_l1(A, b, w, 0.0, with(EqualityMethod::Continuation));
    const double tol = 1e-7 * std::max(1.0, best);
    CHECK(simplex.objective == doctest::Approx(best).epsilon(tol));
    CHECK(cont.objective == doctest::Approx(best).epsilon(tol));
    CHECK(simplex.residual <= 1e-8 * std::max(1.0, b.norm()));
    CHECK(cont.residual <= 1e-8 * std::max(1.0, b.norm()));
    CHECK(simplex.x.minCoeff() >= 0.0);
    CHECK(cont.x.minCoeff() >= 0.0);
  }
  CHECK(checked > 150);
}

TEST_CASE("infeasible equality systems are reported") {
  Matrix A(2, 3);
  A << 1, 1, 1, 1, 1, 1;
  Vector b(2);
  b << 1, -1;
  for (auto m : {EqualityMethod::Simplex, EqualityMethod::Continuation}) {
    try {
      solve_weighted_l1(A, b, Vector::Ones(3), 0.0, with(m));
      FAIL("expected infeasibility");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Infeasible);
    }
  }
  // Nonnegative cone misses a negative target.
  Matrix P = Matrix::Identity(2, 2);
  Vector neg(2);
  neg << -1, 0.5;
  CHECK_THROWS_AS(solve_weighted_l1(P, neg, Vector::Ones(2), 0.0), Error);
  CHECK_THROWS_AS(solve_weighted_l1(P, neg, Vector::Ones(2), 0.5), Error);
}

TEST_CASE("argument validation") {
  const Matrix A = Matrix::Identity(3, 3);
  const Vector b = Vector::Ones(3);
  auto kind = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Unrecoverable;
  };
  CHECK(kind([&] { solve_weighted_l1(A, Vector::Ones(2), Vector::Ones(3), 0.0); }) == ErrorKind::InvalidInput);
  CHECK(kind([&] { solve_weighted_l1(A, b, Vector::Ones(2), 0.0); }) == ErrorKind::InvalidInput);
  CHECK(kind([&] { solve_weighted_l1(A, b, -Vector::Ones(3), 0.0); }) == ErrorKind::InvalidInput);
  CHECK(kind([&] { solve_weighted_l1(A, b, Vector::Ones(3), -1.0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("ball solutions satisfy the optimality conditions") {
  Rng rng(5);
  int certified = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix A = oracle::gaussian(10, 30, rng);
    Vector x0 = Vector::Zero(30);
    for (int k = 0; k < 3; ++k) x0(static_cast<Eigen::Index>(rng.below(30))) = rng.uniform(0.5, 2.0);
    Vector b = A * x0;
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += 0.01 * rng.normal();
    const double radius = 0.05 * b.norm();
    const Vector w = Vector::Ones(30);
    const auto r = solve_weighted_l1(A, b, w, radius);
    CHECK(r.residual <= radius * (1.0 + 1e-9));
    CHECK(r.x.minCoeff() >= 0.0);
    if (ball_kkt(A, b, w, radius, r.x)) ++certified;
    // Widening the ball never raises the optimum; the equality optimum bounds it.
    const auto wider = solve_weighted_l1(A, b, w, 2.0 * radius);
    CHECK(wider.objective <= r.objective * (1.0 + 1e-9));
  }
  CHECK(certified == 50);
}

TEST_CASE("a ball containing the origin returns zero") {
  const Matrix A = Matrix::Identity(2, 2);
  Vector b(2);
  b << 0.3, 0.4;
  const auto r = solve_weighted_l1(A, b, Vector::Ones(2), 0.5);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("ball solver approaches the equality optimum as the radius shrinks") {
  Rng rng(6);
  const Matrix A = oracle::gaussian(8, 20, rng);
  Vector x0 = Vector::Zero(20);
  x0(3) = 1.0;
  x0(11) = 0.4;
  const Vector b = A * x0;
  const auto eq = solve_weighted_l1(A, b, Vector::Ones(20), 0.0);
  const auto ball = solve_weighted_l1(A, b, Vector::Ones(20), 1e-9 * b.norm());
  CHECK(ball.objective <= eq.objective * (1.0 + 1e-9));
  CHECK(ball.objective >= eq.objective * (1.0 - 1e-6));
}

TEST_CASE("NNLS with a linear term matches its optimality conditions") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix A = oracle::gaussian(12, 8, rng);
    const Vector b = oracle::gaussian(12, 1, rng);
    Vector c = Vector::Zero(8);
    if (trial % 2) c = 0.1 * Vector::Ones(8);
    const Vector x = nnls_with_linear_term(A, b, c);
    const Vector g = A.transpose() * (A * x - b) + c;  // gradient
    CHECK(x.minCoeff() >= 0.0);
    for (Eigen::Index i = 0; i < 8; ++i) {
      CHECK(g(i) >= -1e-9);
      if (x(i) > 0.0) CHECK(std::abs(g(i)) <= 1e-9);
    }
  }
}

TEST_CASE("continuation handles systems too large for the tableau") {
  Rng rng(8);
  const int p = 300;
  const int n = 500;
  Matrix A = oracle::gaussian(p, n, rng) / std::sqrt(static_cast<double>(p));
  Vector x0 = Vector::Zero(n);
  for (int k = 0; k < 15; ++k) x0(static_cast<Eigen::Index>(rng.below(n))) = rng.uniform(1e-5, 1e-3);
  const Vector b = A * x0;
  const auto r = solve_weighted_l1(A, b, Vector::Ones(n), 0.0);
  CHECK((r.x - x0).norm() <= 1e-9 * x0.norm());
}
