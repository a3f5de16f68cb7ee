#pragma once

#include <Eigen/Dense>

namespace specsense {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD factors: A ~= U * diag(sigma) * V^T.
///
/// sigma is nonincreasing and nonnegative. Each column of U has its first
/// nonzero entry nonnegative (the sign of the matching V column follows).
struct SvdFactors {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const;
  Eigen::Index rank() const { return sigma.size(); }
};

/// Relative cutoff used wherever numerical rank is measured.
inline constexpr double kRankCutoff = 1e-10;

/// Full thin SVD (r = min(rows, cols)). Throws InvalidInput on non-finite A.
SvdFactors svd(const Matrix& A);

/// Parameters of the randomized range finder used by truncated_svd.
struct SketchParams {
  int oversampling = 5;
  int power_steps = 2;
  unsigned long long seed = 0x5eed5eedULL;
};

/// Rank-r approximation of the top singular triplets via a Gaussian sketch
/// with power iteration. Deterministic for a fixed SketchParams::seed.
SvdFactors truncated_svd(const Matrix& A, Eigen::Index r,
                         const SketchParams& params = {});

/// Singular-value soft thresholding: U diag(max(sigma - alpha, 0)) V^T.
/// This is the proximal map of alpha * nuclear norm.
Matrix shrink(const Matrix& A, double alpha);

/// Shrinkage applied to precomputed factors (lets callers reuse a truncated SVD).
Matrix shrink(const SvdFactors& factors, double alpha);

/// Number of singular values above kRankCutoff * sigma_1.
Eigen::Index numerical_rank(const Matrix& A);

double nuclear_norm(const Matrix& A);

bool all_finite(const Matrix& A);

}  // namespace specsense
