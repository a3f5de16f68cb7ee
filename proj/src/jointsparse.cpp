#include "specsense/jointsparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specsense/error.hpp"
#include "specsense/parallel.hpp"

namespace specsense {

int mask_count(const ChannelMask& mask) {
  return static_cast<int>(std::count_if(mask.begin(), mask.end(), [](char c) { return c != 0; }));
}

void SolverParams::validate() const {
  require(noise_sigma >= 0.0, ErrorKind::InvalidConfig, "noise_sigma must be >= 0");
  require(tail_tol > 0.0, ErrorKind::InvalidConfig, "tail_tol must be > 0");
  require(qualify_factor >= 0.0, ErrorKind::InvalidConfig, "qualify_factor must be >= 0");
  require(trust_eps > 0.0 && trust_eps < 1.0, ErrorKind::InvalidConfig, "trust_eps must lie in (0, 1)");
  require(peak_frac > 0.0 && peak_frac <= 1.0, ErrorKind::InvalidConfig, "peak_frac must lie in (0, 1]");
  require(vote_threshold > 0.0 && vote_threshold <= 1.0, ErrorKind::InvalidConfig,
          "vote_threshold must lie in (0, 1]");
  require(forced_cap_divisor >= 1, ErrorKind::InvalidConfig, "forced_cap_divisor must be >= 1");
  require(max_outer_iters >= 0, ErrorKind::InvalidConfig, "max_outer_iters must be >= 0");
}

double noise_ball_radius(double noise_sigma, int count) {
  if (noise_sigma <= 0.0 || count <= 0) return 0.0;
  const double k = static_cast<double>(count);
  return noise_sigma * std::sqrt(k + 2.0 * std::sqrt(2.0 * k));
}

Vector independence_recovery(const Matrix& filter_rows, const Vector& measurements,
                             const ChannelMask& in_T, double sigma, const L1Options& options) {
  require(static_cast<Eigen::Index>(in_T.size()) == filter_rows.cols(), ErrorKind::InvalidInput,
          "independence_recovery: T mask length differs from n");
  Vector weights(filter_rows.cols());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = in_T[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return solve_weighted_l1(filter_rows, measurements, weights, sigma, options).x;
}

std::vector<int> qualify_crs(const std::vector<int>& counts, int n, int t_size, int detected_count,
                             double qualify_factor) {
  const double need = qualify_factor * static_cast<double>(std::max(detected_count, n - t_size));
  std::vector<int> out;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const int c = counts[j];
    if (c >= 1 && static_cast<double>(c) >= need) out.push_back(static_cast<int>(j));
  }
  return out;
}

namespace {

int support_size(const Matrix& X, int col, double trust_eps) {
  const double peak = X.col(col).cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0;
  return static_cast<int>((X.col(col).array().abs() > trust_eps * peak).count());
}

}  // namespace

std::vector<TrustedColumn> select_trusted(const Matrix& X, const std::vector<int>& candidates,
                                          const std::vector<int>& counts, double trust_eps) {
  std::vector<TrustedColumn> out;
  for (int j : candidates) {
    const int k = support_size(X, j, trust_eps);
    const int p = counts[static_cast<std::size_t>(j)];
    if (2 * k <= p) out.push_back({j, k, p, trust_eps * X.col(j).cwiseAbs().maxCoeff()});
  }
  return out;
}

Detection detect_channels(const Matrix& X, const std::vector<TrustedColumn>& trusted,
                          const ChannelMask& detected, double peak_frac, double vote_threshold) {
  const auto n = X.rows();
  Detection d;
  d.scores = Vector::Zero(n);
  double total = 0.0;
  for (const auto& col : trusted) {
    if (col.support == 0) continue;  // zero column: no votes, no weight
    const double weight = static_cast<double>(col.measurements) / col.support;
    // Peak over channels still undetected, so weak users are not drowned out
    // by the ones already found.
    double peak = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!detected[static_cast<std::size_t>(i)]) peak = std::max(peak, X(i, col.cr));
    total += weight;  // a column with nothing new above its cutoff votes for no one
    for (Eigen::Index i = 0; i < n; ++i)
      if (!detected[static_cast<std::size_t>(i)] && X(i, col.cr) >= peak_frac * peak &&
          X(i, col.cr) > col.cutoff)
        d.scores(i) += weight;
  }
  if (total <= 0.0) {
    d.scores.setZero();
    return d;
  }
  d.scores /= total;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!detected[static_cast<std::size_t>(i)] && d.scores(i) >= vote_threshold)
      d.channels.push_back(static_cast<int>(i));
  return d;
}

double tail_size(const Matrix& X, const ChannelMask& in_T, double p_norm) {
  double inside = 0.0;
  double outside = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double norm = p_norm == 2.0 ? X.row(i).norm()
                                      : std::pow(X.row(i).array().abs().pow(p_norm).sum(), 1.0 / p_norm);
    (in_T[static_cast<std::size_t>(i)] ? inside : outside) += norm;
  }
  if (inside == 0.0) return 0.0;
  if (outside == 0.0) return std::numeric_limits<double>::infinity();
  return inside / outside;
}

JointState JointState::initial(int n, int m) {
  JointState s;
  s.in_T.assign(static_cast<std::size_t>(n), 1);
  s.detected_mask.assign(static_cast<std::size_t>(n), 0);
  s.forced.assign(static_cast<std::size_t>(n), 0);
  s.X = Matrix::Zero(n, m);
  return s;
}

int exclusion_budget(int count, double qualify_factor, int n) {
  if (qualify_factor <= 0.0) return n;
  return std::min(n, static_cast<int>(std::floor(count / qualify_factor + 1e-9)));
}

void update_T(JointState& state, const std::vector<int>& new_detections, bool stopping_met,
              int forced_cap_divisor, int max_excluded) {
  const int n = static_cast<int>(state.in_T.size());
  for (int c : new_detections) {
    if (state.detected_mask[static_cast<std::size_t>(c)]) continue;
    state.detected_mask[static_cast<std::size_t>(c)] = 1;
    state.detected.push_back(c);
    state.in_T[static_cast<std::size_t>(c)] = 0;
    state.forced[static_cast<std::size_t>(c)] = 0;
  }

  if (new_detections.empty() && !stopping_met) {
    ++state.stagnation_count;
    const int cap = std::max(1, n / std::max(1, forced_cap_divisor));
    int wanted = state.stagnation_count >= 30 ? cap : std::min(cap, 1 << state.stagnation_count);
    if (max_excluded >= 0) wanted = std::min(wanted, max_excluded - (n - mask_count(state.in_T)));
    if (wanted <= 0) state.stalled = true;
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i)
      if (state.in_T[static_cast<std::size_t>(i)]) candidates.push_back(i);
    const Vector norms = state.X.rowwise().norm();
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int a, int b) { return norms(a) > norms(b); });
    const int take = std::min<int>(wanted, static_cast<int>(candidates.size()));
    for (int k = 0; k < take; ++k) {
      const auto c = static_cast<std::size_t>(candidates[static_cast<std::size_t>(k)]);
      state.in_T[c] = 0;
      state.forced[c] = 1;
    }
  } else if (!new_detections.empty()) {
    state.stagnation_count = 0;
  }
  if (mask_count(state.in_T) == 0) state.exhausted = true;
}

JointResult joint_recover(const MeasurementSet& ms, const FilterBank& filters,
                          const SolverParams& params) {
  params.validate();
  require(!filters.banks.empty(), ErrorKind::InvalidInput, "joint_recover: empty filter bank");
  const int n = filters.n();
  const int m = ms.m();
  require(filters.p() == ms.p(), ErrorKind::InvalidInput,
          "joint_recover: filter rows differ from measurement rows");
  require(filters.shared() || static_cast<int>(filters.banks.size()) == m, ErrorKind::InvalidInput,
          "joint_recover: need one filter bank or one per CR");

  // Per-CR systems restricted to received reports.
  const std::vector<int> counts = ms.counts_per_cr();
  std::vector<Matrix> rows(static_cast<std::size_t>(m));
  std::vector<Vector> rhs(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto idx = ms.observed_rows(j);
    const Matrix& F = filters.for_cr(j);
    Matrix A(static_cast<Eigen::Index>(idx.size()), n);
    Vector b(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      A.row(static_cast<Eigen::Index>(k)) = F.row(idx[k]);
      b(static_cast<Eigen::Index>(k)) = ms.values(idx[k], j);
    }
    rows[static_cast<std::size_t>(j)] = std::move(A);
    rhs[static_cast<std::size_t>(j)] = std::move(b);
  }

  // Forcing never pushes n - |T| past what the best-served CR can qualify for.
  const int budget = exclusion_budget(*std::max_element(counts.begin(), counts.end()),
                                      params.qualify_factor, n);
  JointState state = JointState::initial(n, m);
  JointResult result;
  const int max_outer = params.max_outer_iters > 0 ? params.max_outer_iters : n;

  for (int iter = 1; iter <= max_outer; ++iter) {
    state.iteration = iter;
    JointIteration it;
    it.t_size = mask_count(state.in_T);

    const auto qualified = qualify_crs(counts, n, it.t_size, static_cast<int>(state.detected.size()),
                                       params.qualify_factor);
    it.qualified = static_cast<int>(qualified.size());
    if (qualified.empty()) {
      require(iter > 1, ErrorKind::Unrecoverable, "joint_recover: no CR has enough measurements");
      result.trace.push_back(it);
      break;
    }

    Matrix X = Matrix::Zero(n, m);
    std::vector<char> infeasible(qualified.size(), 0);
    parallel_for(static_cast<int>(qualified.size()), params.threads, [&](int k) {
      const int j = qualified[static_cast<std::size_t>(k)];
      const double radius = noise_ball_radius(params.noise_sigma, counts[static_cast<std::size_t>(j)]);
      try {
        X.col(j) = independence_recovery(rows[static_cast<std::size_t>(j)], rhs[static_cast<std::size_t>(j)],
                                         state.in_T, radius, params.l1);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        infeasible[static_cast<std::size_t>(k)] = 1;
      }
    });
    std::vector<int> solved;
    for (std::size_t k = 0; k < qualified.size(); ++k) {
      if (infeasible[k])
        it.infeasible.push_back(qualified[k]);
      else
        solved.push_back(qualified[k]);
    }
    state.X = X;

    const auto trusted = select_trusted(X, solved, counts, params.trust_eps);
    it.trusted = static_cast<int>(trusted.size());
    const Detection det = detect_channels(X, trusted, state.detected_mask, params.peak_frac,
                                          params.vote_threshold);
    it.detected = det.channels;

    // Tail against the T that the detections leave behind.
    ChannelMask next_T = state.in_T;
    for (int c : det.channels) next_T[static_cast<std::size_t>(c)] = 0;
    it.tail = tail_size(X, next_T);
    double tol = params.tail_tol;
    if (params.noise_sigma > 0.0) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i)
        if (!next_T[static_cast<std::size_t>(i)]) mass += X.row(i).norm();
      if (mass > 0.0) tol = std::max(tol, 2.0 * params.noise_sigma * std::sqrt(static_cast<double>(m)) / mass);
    }
    it.tail_tol = tol;
    const bool stop = it.tail < tol;

    const ChannelMask before = state.forced;
    update_T(state, det.channels, stop, params.forced_cap_divisor, budget);
    for (int i = 0; i < n; ++i)
      if (state.forced[static_cast<std::size_t>(i)] && !before[static_cast<std::size_t>(i)]) it.forced.push_back(i);
    result.trace.push_back(it);

    if (stop) {
      result.converged = true;
      break;
    }
    if (state.exhausted || state.stalled) break;
  }

  result.iterations = state.iteration;
  result.X = state.X;
  result.occupancy = OccupancyVector(n);
  for (int c : state.detected) result.occupancy.states[static_cast<std::size_t>(c)] = 1;
  return result;
}

}  // namespace specsense
