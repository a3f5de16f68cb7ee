#pragma once

#include "specsense/linalg.hpp"

namespace specsense {

/// Weighted nonnegative l1 program
///
///     minimize    w^T x
///     subject to  ||A x - b||_2 <= radius,   x >= 0
///
/// with radius == 0 meaning the equality system A x = b. Zero weights mark
/// free (unpenalized) coordinates, so a 0/1 weight vector is the truncated
/// l1 objective over the set {i : w_i = 1}.
///
/// The equality case is solved exactly, either by a two-phase dense simplex
/// whose final basis is re-solved with a QR factorization, or for larger
/// systems by continuation on the Lagrangian form below with mu -> 0 followed
/// by an exact solve on the support it settles on. The ball case is solved
/// through its Lagrangian form, min w^T x + 1/(2 mu) ||A x - b||^2 over
/// x >= 0, with an active-set (Lawson-Hanson style) inner solver and a
/// bisection on mu until the residual meets the radius from below.
enum class EqualityMethod { Auto, Simplex, Continuation };

struct L1Options {
  EqualityMethod method = EqualityMethod::Auto;  // Auto: simplex for small tableaus
  double pivot_tol = 1e-9;
  double feas_tol = 1e-9;
  int max_pivots = 0;       // 0: 50 * (rows + cols)
  int max_bisections = 200;
};

struct L1Result {
  Vector x;
  double objective = 0.0;
  double residual = 0.0;  // ||A x - b||_2
  int iterations = 0;     // simplex pivots or active-set steps
};

/// Throws Error(Infeasible) when no x >= 0 meets the constraint and
/// Error(InvalidInput) on shape mismatch, negative weights or radius.
L1Result solve_weighted_l1(const Matrix& A, const Vector& b, const Vector& weights,
                           double radius, const L1Options& options = {});

/// Active-set solver for min 1/2 ||A x - b||^2 + c^T x over x >= 0.
/// Exposed for testing; c may be zero (plain NNLS).
Vector nnls_with_linear_term(const Matrix& A, const Vector& b, const Vector& c,
                             int* steps = nullptr);

}  // namespace specsense
