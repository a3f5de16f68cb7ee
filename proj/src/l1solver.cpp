#include "specsense/l1solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "specsense/error.hpp"

namespace specsense {

namespace {

// Above this many tableau entries the equality case uses continuation.
constexpr Eigen::Index kTableauLimit = 40000;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SimplexStatus { Optimal, Unbounded, IterationLimit };

void pivot(RowMatrix& t, int row, int col) {
  t.row(row) /= t(row, col);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (i == row) continue;
    const double f = t(i, col);
    if (f != 0.0) t.row(i) -= f * t.row(row);
  }
}

// Minimizes over the reduced-cost row (last row) with entering columns
// restricted to [0, allowed). Dantzig pricing, Bland's rule after a run of
// degenerate pivots.
SimplexStatus run_simplex(RowMatrix& t, std::vector<int>& basis, int allowed,
                          double cost_tol, const L1Options& opt, int max_pivots,
                          int& pivots) {
  const int rows = static_cast<int>(t.rows()) - 1;
  const int rhs = static_cast<int>(t.cols()) - 1;
  int degenerate_run = 0;
  bool bland = false;
  while (pivots < max_pivots) {
    int enter = -1;
    double best = -cost_tol;
    for (int j = 0; j < allowed; ++j) {
      const double d = t(rows, j);
      if (bland) {
        if (d < -cost_tol) {
          enter = j;
          break;
        }
      } else if (d < best) {
        best = d;
        enter = j;
      }
    }
    if (enter < 0) return SimplexStatus::Optimal;

    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    double leave_coef = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double a = t(i, enter);
      if (a <= opt.pivot_tol) continue;
      const double r = std::max(t(i, rhs), 0.0) / a;
      const bool better = r < ratio - 1e-12;
      const bool tie = !better && r <= ratio + 1e-12;
      if (better || (tie && (bland ? basis[i] < basis[leave] : a > leave_coef))) {
        ratio = r;
        leave = i;
        leave_coef = a;
      }
    }
    if (leave < 0) return SimplexStatus::Unbounded;

    degenerate_run = t(leave, rhs) <= opt.feas_tol ? degenerate_run + 1 : 0;
    if (degenerate_run > 50) bland = true;
    pivot(t, leave, enter);
    basis[static_cast<std::size_t>(leave)] = enter;
    ++pivots;
  }
  return SimplexStatus::IterationLimit;
}

L1Result solve_equality(const Matrix& A, const Vector& b, const Vector& w,
                        const L1Options& opt) {
  const int p = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  L1Result out;
  out.x = Vector::Zero(n);

  const double bscale = b.cwiseAbs().maxCoeff();
  if (p == 0 || bscale == 0.0) return out;

  // Row scaling keeps pivots O(1); the b scaling makes x scale exactly.
  RowMatrix t = RowMatrix::Zero(p + 1, n + p + 1);
  const int rhs = n + p;
  for (int i = 0; i < p; ++i) {
    const double rs = A.row(i).cwiseAbs().maxCoeff();
    double bi = b(i) / bscale;
    if (rs == 0.0) {
      require(std::abs(bi) <= opt.feas_tol, ErrorKind::Infeasible,
              "l1: zero filter row with nonzero measurement");
      continue;
    }
    double sign = 1.0;
    bi /= rs;
    if (bi < 0.0) sign = -1.0;
    t.row(i).head(n) = (sign / rs) * A.row(i);
    t(i, n + i) = 1.0;
    t(i, rhs) = sign * bi;
  }
  std::vector<int> basis(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  const int max_pivots = opt.max_pivots > 0 ? opt.max_pivots : 50 * (p + n);
  int pivots = 0;

  // Phase I: drive the artificial sum to zero.
  for (int i = 0; i < p; ++i) {
    t.row(p).head(n) -= t.row(i).head(n);
    t(p, rhs) -= t(i, rhs);
  }
  auto status = run_simplex(t, basis, n, opt.pivot_tol, opt, max_pivots, pivots);
  require(status == SimplexStatus::Optimal, ErrorKind::Infeasible,
          "l1: phase I did not terminate");
  const double infeasibility = -t(p, rhs);
  require(infeasibility <= 1e-8 * std::max(1.0, t.col(rhs).head(p).cwiseAbs().sum()),
          ErrorKind::Infeasible, "l1: measurements are not reachable with nonnegative powers");

  // Pivot remaining artificials out; rows that cannot be pivoted are redundant.
  std::vector<bool> redundant(static_cast<std::size_t>(p), false);
  for (int i = 0; i < p; ++i) {
    if (basis[static_cast<std::size_t>(i)] < n) continue;
    Eigen::Index col = 0;
    const double best = t.row(i).head(n).cwiseAbs().maxCoeff(&col);
    if (best > opt.pivot_tol) {
      pivot(t, i, static_cast<int>(col));
      basis[static_cast<std::size_t>(i)] = static_cast<int>(col);
    } else {
      redundant[static_cast<std::size_t>(i)] = true;
    }
  }

  // Phase II.
  const double wmax = std::max(1.0, w.maxCoeff());
  t.row(p).setZero();
  t.row(p).head(n) = w.transpose() / wmax;
  for (int i = 0; i < p; ++i) {
    const int bj = basis[static_cast<std::size_t>(i)];
    if (bj < n && w(bj) != 0.0) t.row(p) -= (w(bj) / wmax) * t.row(i);
  }
  status = run_simplex(t, basis, n, opt.pivot_tol, opt, max_pivots, pivots);
  require(status == SimplexStatus::Optimal, ErrorKind::Infeasible,
          "l1: phase II did not terminate");

  std::vector<int> cols;
  for (int i = 0; i < p; ++i) {
    const int bj = basis[static_cast<std::size_t>(i)];
    if (bj < n && !redundant[static_cast<std::size_t>(i)]) {
      out.x(bj) = std::max(t(i, rhs), 0.0) * bscale;
      cols.push_back(bj);
    }
  }

  // Re-solve the final basis against the unscaled system.
  if (!cols.empty()) {
    Matrix AB(p, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) AB.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Vector z = AB.colPivHouseholderQr().solve(b);
    if (z.allFinite() && z.minCoeff() >= -1e-9 * std::max(1e-300, z.cwiseAbs().maxCoeff())) {
      Vector polished = Vector::Zero(n);
      for (std::size_t k = 0; k < cols.size(); ++k) polished(cols[k]) = std::max(z(static_cast<Eigen::Index>(k)), 0.0);
      if ((A * polished - b).norm() <= (A * out.x - b).norm()) out.x = polished;
    }
  }

  out.iterations = pivots;
  return out;
}

Vector nnls_impl(const Matrix& A, const Vector& b, const Vector& c,
                 const std::vector<int>* warm, int* steps_out) {
  const int n = static_cast<int>(A.cols());
  Vector x = Vector::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  const Vector Atb = A.transpose() * b;
  const double scale = std::max(Atb.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff());
  const double tol = 1e-11 * std::max(scale, 1e-300);
  int steps = 0;

  auto passive_list = [&] {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    return idx;
  };
  // Unconstrained minimizer restricted to the passive columns.
  auto solve_on = [&](const std::vector<int>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Matrix AP(A.rows(), k);
    Vector rhs(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      AP.col(j) = A.col(idx[static_cast<std::size_t>(j)]);
      rhs(j) = Atb(idx[static_cast<std::size_t>(j)]) - c(idx[static_cast<std::size_t>(j)]);
    }
    const Matrix gram = AP.transpose() * AP;
    Eigen::LDLT<Matrix> ldlt(gram);
    Vector z;
    if (ldlt.info() == Eigen::Success) z = ldlt.solve(rhs);
    if (z.size() != k || !z.allFinite()) z = gram.colPivHouseholderQr().solve(rhs);
    return z;
  };

  auto columns = [&](const std::vector<int>& idx) {
    Matrix AP(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) AP.col(static_cast<Eigen::Index>(j)) = A.col(idx[j]);
    return AP;
  };
  auto independent = [&](const std::vector<int>& idx) {
    if (static_cast<Eigen::Index>(idx.size()) > A.rows()) return false;
    Eigen::ColPivHouseholderQR<Matrix> qr(columns(idx));
    qr.setThreshold(1e-10);
    return qr.rank() == static_cast<Eigen::Index>(idx.size());
  };
  // When the entering column lies in the span of the passive ones, the
  // objective is linear along the null direction (d_enter = 1, A d = 0) and
  // strictly decreasing, so slide until a passive coordinate reaches zero.
  auto degenerate_step = [&](int enter) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (passive[static_cast<std::size_t>(i)] && i != enter) idx.push_back(i);
    if (idx.empty()) return true;
    const Matrix AP = columns(idx);
    Eigen::ColPivHouseholderQR<Matrix> qr(AP);
    const Vector beta = qr.solve(A.col(enter));
    const double an = A.col(enter).norm();
    if ((AP * beta - A.col(enter)).norm() > 1e-10 * std::max(an, 1e-300)) return true;
    double t = std::numeric_limits<double>::infinity();
    std::size_t hit = idx.size();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double bj = beta(static_cast<Eigen::Index>(j));
      if (bj > 0.0 && x(idx[j]) / bj < t) {
        t = x(idx[j]) / bj;
        hit = j;
      }
    }
    if (hit == idx.size()) return false;
    for (std::size_t j = 0; j < idx.size(); ++j) x(idx[j]) = std::max(0.0, x(idx[j]) - t * beta(static_cast<Eigen::Index>(j)));
    x(enter) = t;
    x(idx[hit]) = 0.0;
    passive[static_cast<std::size_t>(idx[hit])] = 0;
    return true;
  };

  if (warm != nullptr && !warm->empty()) {
    for (int i : *warm) passive[static_cast<std::size_t>(i)] = 1;
    for (int guard = 0; guard <= n; ++guard) {
      const auto idx = passive_list();
      if (idx.empty()) break;
      const Vector z = solve_on(idx);
      bool ok = true;
      for (std::size_t j = 0; j < idx.size(); ++j)
        if (!(z(static_cast<Eigen::Index>(j)) > 0.0)) {
          passive[static_cast<std::size_t>(idx[j])] = 0;
          ok = false;
        }
      if (ok) {
        for (std::size_t j = 0; j < idx.size(); ++j) x(idx[j]) = z(static_cast<Eigen::Index>(j));
        break;
      }
    }
    const auto idx = passive_list();
    if (!idx.empty() && !independent(idx)) {
      std::fill(passive.begin(), passive.end(), 0);
      x.setZero();
    }
  }

  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    const Vector dual = Atb - A.transpose() * (A * x) - c;
    int enter = -1;
    double best = tol;
    for (int i = 0; i < n; ++i) {
      if (passive[static_cast<std::size_t>(i)] || blocked[static_cast<std::size_t>(i)]) continue;
      if (dual(i) > best) {
        best = dual(i);
        enter = i;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = 1;
    ++steps;
    if (!degenerate_step(enter)) {
      passive[static_cast<std::size_t>(enter)] = 0;
      blocked[static_cast<std::size_t>(enter)] = 1;
      continue;
    }

    for (int inner = 0; inner <= n; ++inner) {
      const auto idx = passive_list();
      const Vector z = solve_on(idx);
      bool positive = true;
      for (Eigen::Index j = 0; j < z.size(); ++j)
        if (!(z(j) > 0.0)) positive = false;
      if (positive) {
        for (std::size_t j = 0; j < idx.size(); ++j) x(idx[j]) = z(static_cast<Eigen::Index>(j));
        std::fill(blocked.begin(), blocked.end(), 0);
        break;
      }
      double alpha = 1.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double zj = z(static_cast<Eigen::Index>(j));
        if (zj <= 0.0) {
          const double xj = x(idx[j]);
          alpha = std::min(alpha, xj / (xj - zj));
        }
      }
      if (inner == 0 && alpha <= 0.0) {
        // Entering coordinate cannot move; rounding noise in its dual value.
        passive[static_cast<std::size_t>(enter)] = 0;
        blocked[static_cast<std::size_t>(enter)] = 1;
        break;
      }
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const int i = idx[j];
        x(i) += alpha * (z(static_cast<Eigen::Index>(j)) - x(i));
        if (x(i) <= 1e-15 * std::max(1.0, std::abs(z(static_cast<Eigen::Index>(j))))) {
          x(i) = 0.0;
          passive[static_cast<std::size_t>(i)] = 0;
        }
      }
    }
  }
  if (steps_out != nullptr) *steps_out += steps;
  return x;
}

L1Result solve_ball(const Matrix& A, const Vector& b, const Vector& w, double radius,
                    const L1Options& opt) {
  const int n = static_cast<int>(A.cols());
  L1Result out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm <= radius) {
    out.residual = bnorm;
    return out;
  }

  int steps = 0;
  std::vector<int> support;
  auto evaluate = [&](double mu, Vector& x) {
    x = nnls_impl(A, b, mu * w, &support, &steps);
    support.clear();
    for (int i = 0; i < n; ++i)
      if (x(i) > 0.0) support.push_back(i);
    return (A * x - b).norm();
  };

  double mu_hi = 0.0;
  for (int i = 0; i < n; ++i)
    if (w(i) > 0.0) mu_hi = std::max(mu_hi, 2.0 * A.col(i).norm() * bnorm / w(i));

  Vector x_hi;
  const double r_top = evaluate(mu_hi > 0.0 ? mu_hi : 1.0, x_hi);
  if (r_top <= radius || mu_hi == 0.0) {
    require(r_top <= radius * (1.0 + 1e-12), ErrorKind::Infeasible,
            "l1: noise ball unreachable with the free channels");
    out.x = x_hi;
    out.residual = r_top;
    out.iterations = steps;
    return out;
  }

  double hi = mu_hi;
  double lo = -1.0;
  Vector x_lo;
  double r_lo = 0.0;
  for (double mu = mu_hi / 8.0; mu > mu_hi * 1e-16; mu /= 8.0) {
    Vector x;
    const double r = evaluate(mu, x);
    if (r <= radius) {
      lo = mu;
      x_lo = x;
      r_lo = r;
      break;
    }
    hi = mu;
  }
  if (lo < 0.0) {
    Vector x;
    const double r = evaluate(0.0, x);
    require(r <= radius * (1.0 + 1e-12), ErrorKind::Infeasible,
            "l1: noise ball does not meet the nonnegative cone");
    lo = 0.0;
    x_lo = x;
    r_lo = r;
  }

  for (int k = 0; k < opt.max_bisections; ++k) {
    if (radius - r_lo <= 1e-9 * radius) break;
    if (lo > 0.0 && hi / lo < 1.0 + 1e-12) break;
    const double mid = lo > 0.0 ? std::sqrt(lo * hi) : hi / 8.0;
    Vector x;
    const double r = evaluate(mid, x);
    if (r <= radius) {
      lo = mid;
      x_lo = std::move(x);
      r_lo = r;
    } else {
      hi = mid;
    }
  }
  out.x = x_lo;
  out.residual = r_lo;
  out.iterations = steps;
  return out;
}

// Equality program by continuation on the Lagrangian form: as mu falls the
// minimizer of mu w^T x + 1/2 ||A x - b||^2 over x >= 0 tends to the least
// weighted-l1 exact solution. The support found that way is then solved
// exactly. Used where the dense tableau would be too large or too degenerate.
L1Result solve_equality_path(const Matrix& A, const Vector& b, const Vector& w,
                             const L1Options& opt) {
  const int n = static_cast<int>(A.cols());
  L1Result out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;
  const double target = 1e-11 * bnorm;

  int steps = 0;
  std::vector<int> support;
  auto evaluate = [&](double mu, Vector& x) {
    x = nnls_impl(A, b, mu * w, &support, &steps);
    support.clear();
    for (int i = 0; i < n; ++i)
      if (x(i) > 0.0) support.push_back(i);
    return (A * x - b).norm();
  };
  // Exact solve on the current support; accepted only if it stays nonnegative.
  auto polish = [&](Vector& x) {
    if (support.empty()) return false;
    Matrix AS(A.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) AS.col(static_cast<Eigen::Index>(k)) = A.col(support[k]);
    const Vector z = AS.colPivHouseholderQr().solve(b);
    if (!z.allFinite() || z.minCoeff() < 0.0) return false;
    Vector cand = Vector::Zero(n);
    for (std::size_t k = 0; k < support.size(); ++k) cand(support[k]) = z(static_cast<Eigen::Index>(k));
    if ((A * cand - b).norm() > target) return false;
    x = cand;
    return true;
  };

  double mu = 0.0;
  for (int i = 0; i < n; ++i)
    if (w(i) > 0.0) mu = std::max(mu, A.col(i).dot(b) / w(i));
  if (!(mu > 0.0)) mu = 1.0;
  const double floor = mu * 1e-18;
  Vector x;
  double r = std::numeric_limits<double>::infinity();
  for (; mu > floor; mu /= 8.0) {
    r = evaluate(mu, x);
    Vector exact;
    if (polish(exact)) {
      out.x = exact;
      out.iterations = steps;
      return out;
    }
  }
  r = evaluate(0.0, x);
  require(r <= std::max(target, opt.feas_tol * bnorm), ErrorKind::Infeasible,
          "l1: measurements are not reachable with nonnegative powers");
  out.x = x;
  out.iterations = steps;
  return out;
}

}  // namespace

Vector nnls_with_linear_term(const Matrix& A, const Vector& b, const Vector& c, int* steps) {
  require(b.size() == A.rows() && c.size() == A.cols(), ErrorKind::InvalidInput,
          "nnls: dimension mismatch");
  return nnls_impl(A, b, c, nullptr, steps);
}

L1Result solve_weighted_l1(const Matrix& A, const Vector& b, const Vector& weights,
                           double radius, const L1Options& options) {
  require(b.size() == A.rows(), ErrorKind::InvalidInput, "l1: b length differs from row count");
  require(weights.size() == A.cols(), ErrorKind::InvalidInput,
          "l1: weight length differs from column count");
  require(weights.allFinite() && (weights.array() >= 0.0).all(), ErrorKind::InvalidInput,
          "l1: weights must be finite and nonnegative");
  require(radius >= 0.0 && std::isfinite(radius), ErrorKind::InvalidInput,
          "l1: radius must be finite and >= 0");
  require(A.allFinite() && b.allFinite(), ErrorKind::InvalidInput, "l1: non-finite data");

  L1Result out;
  if (radius > 0.0)
    out = solve_ball(A, b, weights, radius, options);
  else if (options.method == EqualityMethod::Simplex ||
           (options.method == EqualityMethod::Auto &&
            A.rows() * (A.rows() + A.cols()) <= kTableauLimit))
    out = solve_equality(A, b, weights, options);
  else
    out = solve_equality_path(A, b, weights, options);
  out.objective = weights.dot(out.x);
  out.residual = (A * out.x - b).norm();
  return out;
}

}  // namespace specsense
