#include "specsense/completion.hpp"

#include <algorithm>
#include <cmath>

#include "specsense/error.hpp"

namespace specsense {

void FpcaParams::validate() const {
  require(delta > 0.0 && delta < 2.0, ErrorKind::InvalidConfig, "fpca: delta must lie in (0, 2)");
  require(mtol > 0.0, ErrorKind::InvalidConfig, "fpca: mtol must be > 0");
  require(max_iters >= 1, ErrorKind::InvalidConfig, "fpca: max_iters must be >= 1");
  require(rank_budget >= 0, ErrorKind::InvalidConfig, "fpca: rank_budget must be >= 0");
  if (tau_schedule.empty()) {
    require(tau_final > 0.0 && tau_initial >= tau_final, ErrorKind::InvalidConfig,
            "fpca: need 0 < tau_final <= tau_initial");
    require(eta > 0.0 && eta < 1.0, ErrorKind::InvalidConfig, "fpca: eta must lie in (0, 1)");
  } else {
    for (std::size_t k = 0; k < tau_schedule.size(); ++k) {
      require(tau_schedule[k] > 0.0, ErrorKind::InvalidConfig, "fpca: tau values must be > 0");
      if (k > 0)
        require(tau_schedule[k] < tau_schedule[k - 1], ErrorKind::InvalidConfig,
                "fpca: tau schedule must be strictly decreasing");
    }
  }
}

std::vector<double> FpcaParams::schedule() const {
  if (!tau_schedule.empty()) return tau_schedule;
  std::vector<double> taus;
  for (double tau = tau_initial; tau > tau_final; tau *= eta) taus.push_back(tau);
  taus.push_back(tau_final);
  return taus;
}

CompletedMatrix fpca_complete(const MeasurementSet& ms, const FpcaParams& params) {
  params.validate();
  require(ms.observed_count() >= 1, ErrorKind::InvalidInput, "fpca: no observed entries");
  require(ms.values.allFinite(), ErrorKind::InvalidInput, "fpca: non-finite measurements");

  const Matrix observed_mask = ms.observed.cast<double>();
  const Matrix data = ms.values.cwiseProduct(observed_mask);  // P* M^E
  const double scale = data.norm();

  CompletedMatrix out;
  out.values = Matrix::Zero(ms.p(), ms.m());
  if (scale == 0.0) {
    out.converged = true;
    return out;
  }

  const Matrix target = data / scale;
  const double sigma1 = svd(target).sigma(0);
  const auto taus = params.schedule();
  const Eigen::Index full_rank = std::min(target.rows(), target.cols());
  const bool truncated = params.rank_budget > 0 && params.rank_budget < full_rank;

  auto objective = [&](const Matrix& M, double tau) {
    const double misfit = (M - target).cwiseProduct(observed_mask).squaredNorm();
    return tau * nuclear_norm(M) + 0.5 * misfit;
  };

  Matrix M = Matrix::Zero(target.rows(), target.cols());
  bool converged = false;
  for (std::size_t stage = 0; stage < taus.size(); ++stage) {
    const double tau = taus[stage] * sigma1;
    converged = false;
    for (int k = 0; k < params.max_iters; ++k) {
      const Matrix Y = M - params.delta * (M - target).cwiseProduct(observed_mask);
      Matrix next = truncated ? shrink(truncated_svd(Y, params.rank_budget), tau * params.delta)
                              : shrink(svd(Y), tau * params.delta);
      const double change = (next - M).norm() / std::max(1.0, M.norm());
      M = std::move(next);
      ++out.iterations;
      if (params.record_trace)
        out.trace.push_back({static_cast<int>(stage), tau, objective(M, tau), change});
      if (change < params.mtol) {
        converged = true;
        break;
      }
    }
  }

  out.values = M * scale;
  out.converged = converged;
  out.final_residual = (out.values - data).cwiseProduct(observed_mask).norm();
  return out;
}

DecodeResult decode_occupancy(const Matrix& completed, const FilterBank& filters,
                              const DecodeParams& params) {
  require(!filters.banks.empty() && filters.shared(), ErrorKind::InvalidInput,
          "decode_occupancy: needs one shared filter bank");
  const Matrix& F = filters.banks.front();
  require(F.rows() == completed.rows(), ErrorKind::InvalidInput,
          "decode_occupancy: filter rows differ from report rows");
  require(completed.allFinite(), ErrorKind::InvalidInput, "decode_occupancy: non-finite reports");
  require(params.max_iters >= 1, ErrorKind::InvalidConfig, "decode_occupancy: max_iters must be >= 1");

  const int n = static_cast<int>(F.cols());
  const int m = static_cast<int>(completed.cols());
  const int p = static_cast<int>(F.rows());
  const double radius = noise_ball_radius(params.noise_sigma, p);
  const std::vector<int> counts(static_cast<std::size_t>(m), p);

  DecodeResult out;
  out.final_weights = Vector::Ones(n);
  out.X = Matrix::Zero(n, m);
  ChannelMask detected(static_cast<std::size_t>(n), 0);
  std::vector<int> detected_order;
  int stagnation = 0;
  // Freed channels stay within what p reports can pin down, as in qualify_crs.
  const int budget = exclusion_budget(p, params.qualify_factor, n);

  // Alignment of each filter column with the range of the reports. When the
  // reports are rank deficient, occupied channels score 1 and free channels
  // generically score less, so this orders the channels freed on stagnation.
  Vector alignment = Vector::Ones(n);
  {
    const SvdFactors f = svd(completed);
    const double cutoff = f.sigma.size() > 0 ? kRankCutoff * f.sigma(0) : 0.0;
    const Eigen::Index r = (f.sigma.array() > cutoff).count();
    if (r > 0 && r < p) {
      const Matrix U = f.U.leftCols(r);
      for (int i = 0; i < n; ++i) {
        const double norm = F.col(i).norm();
        if (norm > 0.0) alignment(i) = (U.transpose() * F.col(i)).norm() / norm;
      }
    }
  }

  for (int iter = 1; iter <= params.max_iters; ++iter) {
    out.iterations = iter;
    Matrix X = Matrix::Zero(n, m);
    std::vector<int> solved;
    out.skipped_columns.clear();
    out.relaxed_columns.clear();
    for (int j = 0; j < m; ++j) {
      const Vector b = completed.col(j);
      try {
        X.col(j) = solve_weighted_l1(F, b, out.final_weights, radius, params.l1).x;
        solved.push_back(j);
        continue;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
      }
      // A completed column carries small interpolation error, and a sparse
      // nonnegative combination sits on a face of the cone spanned by F, so
      // the exact program is often infeasible. Widen the ball just enough to
      // reach the cone.
      const Vector x0 = nnls_with_linear_term(F, b, Vector::Zero(n));
      const double reach = (F * x0 - b).norm();
      if (reach > params.relax_limit * std::max(b.norm(), 1e-300)) {
        out.skipped_columns.push_back(j);
        continue;
      }
      try {
        const double widened = std::max(radius, reach * (1.0 + 1e-6) + 1e-12 * b.norm());
        X.col(j) = solve_weighted_l1(F, b, out.final_weights, widened, params.l1).x;
        solved.push_back(j);
        out.relaxed_columns.push_back(j);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        out.skipped_columns.push_back(j);
      }
    }
    require(!solved.empty(), ErrorKind::DecodeFailure,
            "decode_occupancy: every column program is infeasible");
    out.X = X;

    const auto trusted = select_trusted(X, solved, counts, params.trust_eps);
    const Detection det = detect_channels(X, trusted, detected, params.peak_frac, params.vote_threshold);
    out.detections.push_back(det.channels);
    out.forced.emplace_back();
    if (!det.channels.empty()) {
      stagnation = 0;
      for (int c : det.channels) {
        detected[static_cast<std::size_t>(c)] = 1;
        detected_order.push_back(c);
        out.final_weights(c) = 0.0;
      }
      continue;
    }

    ChannelMask weighted(static_cast<std::size_t>(n), 0);
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i)
      if (out.final_weights(i) > 0.0) {
        weighted[static_cast<std::size_t>(i)] = 1;
        candidates.push_back(i);
      }
    double tol = params.tail_tol;
    if (params.noise_sigma > 0.0) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i)
        if (!weighted[static_cast<std::size_t>(i)]) mass += X.row(i).norm();
      if (mass > 0.0) tol = std::max(tol, 2.0 * params.noise_sigma * std::sqrt(static_cast<double>(m)) / mass);
    }
    if (candidates.empty() || tail_size(X, weighted) < tol) {
      out.converged = true;
      break;
    }

    ++stagnation;
    const int cap = std::max(1, n / std::max(1, params.forced_cap_divisor));
    int wanted = stagnation >= 30 ? cap : std::min(cap, 1 << stagnation);
    wanted = std::min(wanted, budget - (n - static_cast<int>(candidates.size())));
    if (wanted <= 0) break;
    const Vector norms = X.rowwise().norm();
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int a, int b) {
                       if (alignment(a) != alignment(b)) return alignment(a) > alignment(b);
                       return norms(a) > norms(b);
                     });
    const int take = std::min<int>(wanted, static_cast<int>(candidates.size()));
    for (int k = 0; k < take; ++k) {
      const int c = candidates[static_cast<std::size_t>(k)];
      out.final_weights(c) = 0.0;
      out.forced.back().push_back(c);
    }
  }

  out.occupancy = OccupancyVector::from_support(n, detected_order);
  return out;
}

}  // namespace specsense
