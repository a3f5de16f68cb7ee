#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specsense/completion.hpp"
#include "specsense/jointsparse.hpp"
#include "specsense/scenario.hpp"

namespace specsense {

/// Confusion-table counts and the derived rates for one trial.
///   POD = hit / (hit + miss), FAR = false / (false + hit),
///   MDR = miss / (miss + correct).
/// A 0/0 rate is reported as 0 with its *_undefined flag set.
struct DetectionOutcome {
  int hits = 0;
  int misses = 0;
  int falses = 0;
  int corrects = 0;
  double pod = 0.0;
  double far = 0.0;
  double mdr = 0.0;
  bool pod_undefined = false;
  bool far_undefined = false;
  bool mdr_undefined = false;
};

DetectionOutcome compute_metrics(const OccupancyVector& truth, const OccupancyVector& estimate);

/// Received measurements over the per-channel sensing workload n * m.
double sampling_rate(long observed, int n, int m);
double sampling_rate(const Mask& observed, int n, int m);

enum class Decoder { Completion, JointSparse, Both };
enum class LossMode { VaryP, VaryQ };

const char* to_string(Decoder decoder);
Decoder parse_decoder(const std::string& text);
const char* to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct ExperimentConfig {
  ScenarioConfig scenario;  // scenario.s is ignored; cells take s from s_list
  std::vector<int> s_list{1};
  Decoder decoder = Decoder::Completion;
  std::vector<double> rate_list{0.5};
  std::vector<std::optional<double>> snr_list{std::nullopt};  // nullopt: noiseless
  int trials = 200;
  std::uint64_t seed = 1;
  FilterLaw filter_law = FilterLaw::Gaussian;
  bool shared_filters = true;
  LossMode loss_mode = LossMode::VaryP;
  double q_nominal = 0.9;
  int fixed_p = 0;  // filters per CR in vary_q mode

  FpcaParams fpca;
  DecodeParams decode;
  SolverParams joint;

  void validate() const;
};

/// How a target sampling rate is realized: p filters per CR, each report
/// received with probability q.
struct SamplingPlan {
  int p = 0;
  double q = 0.0;
};

/// vary_p: p = ceil(rate * n / q_nominal); when that exceeds n, p = n and
/// q = rate. vary_q: p fixed, q = rate * n / p. Throws InvalidConfig when
/// the rate cannot be reached (q would exceed one).
SamplingPlan plan_sampling(double rate, int n, LossMode mode, double q_nominal, int fixed_p);

struct Cell {
  int exp_id = 0;
  double rate = 0.0;
  int s = 0;
  std::optional<double> snr_db;
  SamplingPlan plan;
};

std::vector<Cell> enumerate_cells(const ExperimentConfig& config);

/// Everything generated for one trial; independent of the decoder choice.
struct TrialData {
  std::uint64_t seed = 0;
  NetworkScenario scenario;
  GainMatrix gain;
  FilterBank filters;
  MeasurementSet full;
  MeasurementSet observed;
};

std::uint64_t trial_seed(std::uint64_t master, int exp_id, int trial);

TrialData generate_trial(const ExperimentConfig& config, const Cell& cell, int trial);

struct TrialRecord {
  int exp_id = 0;
  int trial = 0;
  Decoder decoder = Decoder::Completion;
  FadingModel fading = FadingModel::Awgn;
  int n = 0;
  int m = 0;
  int p = 0;
  int s = 0;
  double q = 0.0;
  double sampling_rate = 0.0;
  std::optional<double> snr_db;
  DetectionOutcome outcome;
  int iterations = 0;
  std::optional<double> runtime_ms;
  bool not_converged = false;
  bool decode_failure = false;
  std::string failure_message;

  std::string flags() const;
};

/// Runs one decoder on generated trial data and scores it.
TrialRecord run_decoder(const ExperimentConfig& config, const Cell& cell, int trial,
                        const TrialData& data, Decoder decoder, bool timing);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;  // trials where the rate is defined
};

struct CellSummary {
  Cell cell;
  Decoder decoder = Decoder::Completion;
  int trials = 0;
  MeanSe pod;
  MeanSe far;
  MeanSe mdr;
  double mean_sampling_rate = 0.0;
  int failures = 0;
};

struct RunOptions {
  int threads = 1;     // 0: hardware concurrency
  bool timing = false; // fill runtime_ms (makes results non-reproducible)
};

struct ExperimentResult {
  std::vector<TrialRecord> records;  // ordered by (exp_id, trial, decoder)
  std::vector<CellSummary> summary;  // ordered by (exp_id, decoder)

  bool any_failure() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::vector<CellSummary> summarize(const std::vector<Cell>& cells,
                                   const std::vector<TrialRecord>& records);

/// results.csv body (header included), LF endings, '.' decimals.
std::string results_csv(const std::vector<TrialRecord>& records);
std::string summary_csv(const std::vector<CellSummary>& summary);

/// Locale-independent shortest round-trip formatting.
std::string format_number(double value);

}  // namespace specsense
