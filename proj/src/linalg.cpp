#include "specsense/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specsense/error.hpp"
#include "specsense/rng.hpp"

namespace specsense {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::InvalidGeometry: return "invalid-geometry";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::DecodeFailure: return "decode-failure";
    case ErrorKind::Unrecoverable: return "unrecoverable";
  }
  return "unknown";
}

namespace {

// First nonzero entry of each U column made nonnegative; V flips with it.
void canonicalize_signs(SvdFactors& f) {
  for (Eigen::Index k = 0; k < f.U.cols(); ++k) {
    for (Eigen::Index i = 0; i < f.U.rows(); ++i) {
      const double u = f.U(i, k);
      if (u == 0.0) continue;
      if (u < 0.0) {
        f.U.col(k) = -f.U.col(k);
        f.V.col(k) = -f.V.col(k);
      }
      break;
    }
  }
}

SvdFactors exact_svd(const Matrix& A) {
  SvdFactors f;
  if (A.rows() == 0 || A.cols() == 0) {
    f.U = Matrix(A.rows(), 0);
    f.V = Matrix(A.cols(), 0);
    f.sigma = Vector(0);
    return f;
  }
  // Jacobi is the accurate choice at the sizes the decoders use.
  if (std::min(A.rows(), A.cols()) <= 64) {
    Eigen::JacobiSVD<Matrix> solver(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    f.U = solver.matrixU();
    f.sigma = solver.singularValues();
    f.V = solver.matrixV();
  } else {
    Eigen::BDCSVD<Matrix> solver(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    f.U = solver.matrixU();
    f.sigma = solver.singularValues();
    f.V = solver.matrixV();
  }
  canonicalize_signs(f);
  return f;
}

Matrix orthonormal_basis(const Matrix& Y) {
  Eigen::HouseholderQR<Matrix> qr(Y);
  return qr.householderQ() * Matrix::Identity(Y.rows(), Y.cols());
}

}  // namespace

Matrix SvdFactors::reconstruct() const {
  return U * sigma.asDiagonal() * V.transpose();
}

bool all_finite(const Matrix& A) { return A.allFinite(); }

SvdFactors svd(const Matrix& A) {
  require(all_finite(A), ErrorKind::InvalidInput, "svd: matrix has non-finite entries");
  return exact_svd(A);
}

SvdFactors truncated_svd(const Matrix& A, Eigen::Index r, const SketchParams& params) {
  require(all_finite(A), ErrorKind::InvalidInput,
          "truncated_svd: matrix has non-finite entries");
  const Eigen::Index full = std::min(A.rows(), A.cols());
  require(r >= 1 && r <= full, ErrorKind::InvalidInput,
          "truncated_svd: rank budget " + std::to_string(r) + " outside [1, " +
              std::to_string(full) + "]");

  const Eigen::Index width = std::min<Eigen::Index>(r + params.oversampling, full);

  Rng rng(params.seed, Stream::Sketch);
  Matrix omega(A.cols(), width);
  for (Eigen::Index j = 0; j < width; ++j)
    for (Eigen::Index i = 0; i < A.cols(); ++i) omega(i, j) = rng.normal();

  Matrix Q = orthonormal_basis(A * omega);
  for (int step = 0; step < params.power_steps; ++step) {
    Matrix W = orthonormal_basis(A.transpose() * Q);
    Q = orthonormal_basis(A * W);
  }

  SvdFactors small = exact_svd(Q.transpose() * A);
  SvdFactors f;
  f.U = (Q * small.U).leftCols(r);
  f.sigma = small.sigma.head(r);
  f.V = small.V.leftCols(r);
  canonicalize_signs(f);
  return f;
}

Matrix shrink(const SvdFactors& factors, double alpha) {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidInput,
          "shrink: threshold must be finite and >= 0");
  const Vector kept = (factors.sigma.array() - alpha).max(0.0).matrix();
  Eigen::Index live = 0;
  while (live < kept.size() && kept(live) > 0.0) ++live;
  if (live == 0) return Matrix::Zero(factors.U.rows(), factors.V.rows());
  return factors.U.leftCols(live) * kept.head(live).asDiagonal() *
         factors.V.leftCols(live).transpose();
}

Matrix shrink(const Matrix& A, double alpha) {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidInput,
          "shrink: threshold must be finite and >= 0");
  if (alpha == 0.0) {
    require(all_finite(A), ErrorKind::InvalidInput, "shrink: matrix has non-finite entries");
    return A;
  }
  return shrink(svd(A), alpha);
}

Eigen::Index numerical_rank(const Matrix& A) {
  const Vector s = svd(A).sigma;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = kRankCutoff * s(0);
  return (s.array() > cutoff).count();
}

double nuclear_norm(const Matrix& A) { return svd(A).sigma.sum(); }

}  // namespace specsense
