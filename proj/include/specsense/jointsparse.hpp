#pragma once

#include <vector>

#include "specsense/l1solver.hpp"
#include "specsense/linalg.hpp"
#include "specsense/scenario.hpp"

namespace specsense {

/// Set of channel indices stored as a membership mask.
using ChannelMask = std::vector<char>;

int mask_count(const ChannelMask& mask);

/// Knobs of the joint detection loop.
///
/// The trust and vote rules below are realizations of "larger and sparser
/// columns have more say":
///   - a column is trusted when its support (entries above
///     trust_eps * column max) is at most half its measurement count;
///   - each trusted column votes for the not-yet-detected entries that are
///     >= peak_frac times the largest such entry and inside its support,
///     weighted by measurements / support size;
///   - channels whose weighted vote share reaches vote_threshold are detected.
struct SolverParams {
  double noise_sigma = 0.0;     // per-measurement noise std; 0 = equality constraints
  double qualify_factor = 2.0;
  double tail_tol = 1e-3;
  int max_outer_iters = 0;      // 0: n
  double trust_eps = 1e-3;
  double peak_frac = 0.1;
  double vote_threshold = 0.5;
  int forced_cap_divisor = 4;   // at most n / divisor forced exclusions per iteration
  int threads = 1;              // per-column solves within an outer iteration
  L1Options l1;

  void validate() const;
};

/// Ball radius used for a CR with `count` noisy measurements: the noise
/// norm at about two standard deviations above its mean square.
double noise_ball_radius(double noise_sigma, int count);

/// Truncated l1 recovery of one CR's power vector:
/// min sum_{i in T} x_i  s.t.  F_j x = b_j (sigma == 0) or ||F_j x - b_j|| <= sigma,  x >= 0.
/// Throws Error(Infeasible) when the constraint set is empty.
Vector independence_recovery(const Matrix& filter_rows, const Vector& measurements,
                             const ChannelMask& in_T, double sigma,
                             const L1Options& options = {});

/// CRs whose available measurement count is at least
/// factor * max(detected, n - |T|) and at least one.
std::vector<int> qualify_crs(const std::vector<int>& counts, int n, int t_size,
                             int detected_count, double qualify_factor);

struct TrustedColumn {
  int cr = 0;
  int support = 0;       // entries above trust_eps * column max
  int measurements = 0;
  double cutoff = 0.0;   // trust_eps * column max; smaller entries are noise
};

/// Keeps the candidate columns whose support is at most half their measurement count.
std::vector<TrustedColumn> select_trusted(const Matrix& X, const std::vector<int>& candidates,
                                          const std::vector<int>& counts, double trust_eps);

struct Detection {
  std::vector<int> channels;  // newly detected, ascending
  Vector scores;              // per-channel weighted vote share
};

Detection detect_channels(const Matrix& X, const std::vector<TrustedColumn>& trusted,
                          const ChannelMask& detected, double peak_frac, double vote_threshold);

/// sum_{i in T} ||X_i.||_p / sum_{i not in T} ||X_i.||_p; 0 when both sums
/// vanish and +inf when only the denominator does.
double tail_size(const Matrix& X, const ChannelMask& in_T, double p_norm = 2.0);

struct JointState {
  ChannelMask in_T;
  ChannelMask detected_mask;
  ChannelMask forced;          // excluded from T without a detection vote
  std::vector<int> detected;   // in detection order
  Matrix X;
  int stagnation_count = 0;
  int iteration = 0;
  bool exhausted = false;
  bool stalled = false;        // no detection and no room left to force

  static JointState initial(int n, int m);
};

/// Moves this iteration's detections out of T. Without new detections (and
/// with the stopping rule unmet) also force-excludes the 2^stagnation_count
/// largest remaining rows of X by l2 norm, capped at n / forced_cap_divisor
/// and so that at most max_excluded channels sit outside T (negative: no limit).
void update_T(JointState& state, const std::vector<int>& new_detections, bool stopping_met,
              int forced_cap_divisor = 4, int max_excluded = -1);

/// Largest n - |T| at which a CR with `count` reports still qualifies.
int exclusion_budget(int count, double qualify_factor, int n);

struct JointIteration {
  int t_size = 0;              // |T| used for the recovery
  int qualified = 0;
  int trusted = 0;
  std::vector<int> detected;   // new this iteration
  std::vector<int> forced;     // newly force-excluded
  std::vector<int> infeasible; // CRs skipped
  double tail = 0.0;
  double tail_tol = 0.0;
};

struct JointResult {
  Matrix X;                    // n x m
  OccupancyVector occupancy;
  std::vector<JointIteration> trace;
  bool converged = false;
  int iterations = 0;
};

/// Joint detection loop: qualify, recover, trust, vote, update T, until the
/// tail of X falls below the tolerance. Per-CR filter rows follow the
/// observation mask. Throws Error(Unrecoverable) if no CR qualifies in the
/// first iteration.
JointResult joint_recover(const MeasurementSet& measurements, const FilterBank& filters,
                          const SolverParams& params);

}  // namespace specsense
