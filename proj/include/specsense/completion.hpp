#pragma once

#include <vector>

#include "specsense/jointsparse.hpp"
#include "specsense/linalg.hpp"
#include "specsense/scenario.hpp"

namespace specsense {

/// Fixed-point continuation for nuclear-norm regularized completion.
///
/// Iterates Y = M - delta * P*(P M - P M^E), M <- shrink(Y, tau * delta) for
/// each tau of a decreasing schedule, warm-starting every stage. A stage ends
/// when ||M_next - M||_F / max(1, ||M||_F) < mtol. The data are normalized
/// to unit Frobenius norm on the observed entries before iterating, so the
/// stopping rule is independent of the physical measurement scale.
struct FpcaParams {
  std::vector<double> tau_schedule;  // relative to sigma_1(P* M^E); empty = derived
  double tau_initial = 0.5;
  double tau_final = 1e-6;
  double eta = 0.25;
  double delta = 1.0;
  double mtol = 1e-6;
  int max_iters = 2000;              // per stage
  int rank_budget = 0;               // 0: full SVD
  bool record_trace = false;

  void validate() const;
  /// Geometric tau_initial * eta^k sequence, ending exactly at tau_final.
  std::vector<double> schedule() const;
};

struct FpcaTraceEntry {
  int stage = 0;
  double tau = 0.0;        // absolute, in normalized units
  double objective = 0.0;  // tau ||M||_* + 1/2 ||P(M - M^E)||^2, normalized units
  double change = 0.0;
};

struct CompletedMatrix {
  Matrix values;
  int iterations = 0;
  double final_residual = 0.0;  // over observed entries, physical units
  bool converged = false;
  std::vector<FpcaTraceEntry> trace;
};

CompletedMatrix fpca_complete(const MeasurementSet& observed, const FpcaParams& params);

struct DecodeParams {
  double noise_sigma = 0.0;  // per-entry; 0 = equality per column
  double trust_eps = 1e-3;
  double peak_frac = 0.1;
  double vote_threshold = 0.5;
  double tail_tol = 1e-3;
  int forced_cap_divisor = 4;
  double qualify_factor = 2.0;  // frees at most p / qualify_factor channels
  int max_iters = 10;
  double relax_limit = 1e-2;  // widest ball, relative to ||column||, tried on infeasibility
  L1Options l1;
};

struct DecodeResult {
  Matrix X;                       // n x m channel-power estimate
  OccupancyVector occupancy;
  std::vector<std::vector<int>> detections;  // per iteration
  std::vector<std::vector<int>> forced;      // per iteration, freed without a vote
  std::vector<int> skipped_columns;          // infeasible in the last iteration
  std::vector<int> relaxed_columns;          // solved on a widened ball
  Vector final_weights;
  int iterations = 0;
  bool converged = false;
};

/// Reweighted l1 decode of channel occupancy from a completed report matrix
/// and a shared filter bank. Weights start at one and drop to zero for each
/// detected channel. An iteration without detections ends the decode when the
/// weighted rows carry a negligible tail; otherwise the heaviest weighted
/// rows are freed (2, 4, 8, ... per stalled iteration) without being reported.
DecodeResult decode_occupancy(const Matrix& completed, const FilterBank& filters,
                              const DecodeParams& params);

}  // namespace specsense
