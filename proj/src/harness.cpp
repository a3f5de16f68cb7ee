#include "specsense/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "specsense/error.hpp"
#include "specsense/parallel.hpp"
#include "specsense/rng.hpp"

namespace specsense {

DetectionOutcome compute_metrics(const OccupancyVector& truth, const OccupancyVector& estimate) {
  require(truth.size() == estimate.size(), ErrorKind::InvalidInput,
          "compute_metrics: occupancy vectors differ in length");
  DetectionOutcome o;
  for (int i = 0; i < truth.size(); ++i) {
    const bool t = truth.occupied(i);
    const bool e = estimate.occupied(i);
    if (t && e) ++o.hits;
    else if (t) ++o.misses;
    else if (e) ++o.falses;
    else ++o.corrects;
  }
  auto ratio = [](int num, int den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  o.pod = ratio(o.hits, o.hits + o.misses, o.pod_undefined);
  o.far = ratio(o.falses, o.falses + o.hits, o.far_undefined);
  o.mdr = ratio(o.misses, o.misses + o.corrects, o.mdr_undefined);
  return o;
}

double sampling_rate(long observed, int n, int m) {
  require(n >= 1 && m >= 1, ErrorKind::InvalidInput, "sampling_rate: n and m must be >= 1");
  return static_cast<double>(observed) / (static_cast<double>(n) * static_cast<double>(m));
}

double sampling_rate(const Mask& observed, int n, int m) {
  return sampling_rate(static_cast<long>(observed.count()), n, m);
}

const char* to_string(Decoder decoder) {
  switch (decoder) {
    case Decoder::Completion: return "completion";
    case Decoder::JointSparse: return "jointsparse";
    case Decoder::Both: return "both";
  }
  return "completion";
}

Decoder parse_decoder(const std::string& text) {
  if (text == "completion") return Decoder::Completion;
  if (text == "jointsparse") return Decoder::JointSparse;
  if (text == "both") return Decoder::Both;
  fail(ErrorKind::InvalidConfig, "unknown decoder '" + text + "' (expected completion, jointsparse or both)");
}

const char* to_string(LossMode mode) { return mode == LossMode::VaryP ? "vary_p" : "vary_q"; }

LossMode parse_loss_mode(const std::string& text) {
  if (text == "vary_p") return LossMode::VaryP;
  if (text == "vary_q") return LossMode::VaryQ;
  fail(ErrorKind::InvalidConfig, "unknown loss_mode '" + text + "' (expected vary_p or vary_q)");
}

void ExperimentConfig::validate() const {
  ScenarioConfig base = scenario;
  base.s = 0;
  base.validate();
  require(!s_list.empty(), ErrorKind::InvalidConfig, "s_list must not be empty");
  require(!rate_list.empty(), ErrorKind::InvalidConfig, "rate_list must not be empty");
  require(!snr_list.empty(), ErrorKind::InvalidConfig, "snr_list must not be empty");
  require(trials >= 1, ErrorKind::InvalidConfig, "trials must be >= 1");
  for (int s : s_list) {
    require(s >= 0, ErrorKind::InvalidConfig, "s must be >= 0");
    require(s <= scenario.n, ErrorKind::InvalidConfig,
            "s must not exceed n (s=" + std::to_string(s) + ", n=" + std::to_string(scenario.n) + ")");
  }
  for (double r : rate_list)
    require(r > 0.0 && r <= 1.0, ErrorKind::InvalidConfig, "sampling rates must lie in (0, 1]");
  for (const auto& snr : snr_list)
    require(!snr || std::isfinite(*snr), ErrorKind::InvalidConfig, "snr values must be finite");
  require(q_nominal > 0.0 && q_nominal <= 1.0, ErrorKind::InvalidConfig, "q_nominal must lie in (0, 1]");
  if (loss_mode == LossMode::VaryQ)
    require(fixed_p >= 1 && fixed_p <= scenario.n, ErrorKind::InvalidConfig,
            "vary_q needs 1 <= p <= n");
  require(decoder == Decoder::JointSparse || shared_filters, ErrorKind::InvalidConfig,
          "the completion decoder needs shared_filters = true");
  fpca.validate();
  joint.validate();
  require(decode.max_iters >= 1, ErrorKind::InvalidConfig, "decode_max_iters must be >= 1");
  for (double r : rate_list) plan_sampling(r, scenario.n, loss_mode, q_nominal, fixed_p);
}

SamplingPlan plan_sampling(double rate, int n, LossMode mode, double q_nominal, int fixed_p) {
  require(rate > 0.0 && rate <= 1.0, ErrorKind::InvalidConfig, "sampling rate must lie in (0, 1]");
  SamplingPlan plan;
  if (mode == LossMode::VaryP) {
    // Small epsilon keeps exact products such as 0.5 * 35 / 0.9 from rounding up.
    plan.p = static_cast<int>(std::ceil(rate * n / q_nominal - 1e-9));
    plan.p = std::max(plan.p, 1);
    plan.q = q_nominal;
    if (plan.p > n) {
      plan.p = n;
      plan.q = rate;
    }
  } else {
    plan.p = fixed_p;
    plan.q = rate * n / fixed_p;
  }
  require(plan.q <= 1.0 + 1e-12, ErrorKind::InvalidConfig,
          "sampling rate " + format_number(rate) + " needs more than n filters per CR");
  plan.q = std::min(plan.q, 1.0);
  return plan;
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  int id = 0;
  for (double rate : config.rate_list)
    for (int s : config.s_list)
      for (const auto& snr : config.snr_list) {
        Cell c;
        c.exp_id = id++;
        c.rate = rate;
        c.s = s;
        c.snr_db = snr;
        c.plan = plan_sampling(rate, config.scenario.n, config.loss_mode, config.q_nominal, config.fixed_p);
        cells.push_back(c);
      }
  return cells;
}

std::uint64_t trial_seed(std::uint64_t master, int exp_id, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(exp_id), static_cast<std::uint64_t>(trial));
}

TrialData generate_trial(const ExperimentConfig& config, const Cell& cell, int trial) {
  TrialData d;
  d.seed = trial_seed(config.seed, cell.exp_id, trial);
  ScenarioConfig sc = config.scenario;
  sc.s = cell.s;
  d.scenario = gen_scenario(sc, d.seed);
  d.gain = gen_gain(d.scenario);
  d.filters = gen_filters(cell.plan.p, sc.n, sc.m, config.shared_filters, config.filter_law, d.seed);
  const OccupancyVector truth = d.scenario.occupancy();
  d.full = cell.snr_db ? sense_at_snr(d.filters, truth, d.gain, *cell.snr_db, d.seed)
                       : sense(d.filters, truth, d.gain, 0.0, d.seed);
  d.observed = erase(d.full, cell.plan.q, d.seed);
  return d;
}

std::string TrialRecord::flags() const {
  std::vector<std::string> f;
  if (outcome.pod_undefined) f.emplace_back("pod_undef");
  if (outcome.far_undefined) f.emplace_back("far_undef");
  if (outcome.mdr_undefined) f.emplace_back("mdr_undef");
  if (not_converged) f.emplace_back("not_converged");
  if (decode_failure) f.emplace_back("decode_failure");
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "|" : "") + f[i];
  return out;
}

TrialRecord run_decoder(const ExperimentConfig& config, const Cell& cell, int trial,
                        const TrialData& data, Decoder decoder, bool timing) {
  TrialRecord r;
  r.exp_id = cell.exp_id;
  r.trial = trial;
  r.decoder = decoder;
  r.fading = config.scenario.fading;
  r.n = config.scenario.n;
  r.m = config.scenario.m;
  r.p = cell.plan.p;
  r.s = cell.s;
  r.q = cell.plan.q;
  r.snr_db = cell.snr_db;
  r.sampling_rate = sampling_rate(data.observed.observed, r.n, r.m);

  const auto start = std::chrono::steady_clock::now();
  OccupancyVector estimate(r.n);
  try {
    if (decoder == Decoder::Completion) {
      const CompletedMatrix completed = fpca_complete(data.observed, config.fpca);
      DecodeParams dp = config.decode;
      dp.noise_sigma = data.observed.noise_sigma;
      const DecodeResult decoded = decode_occupancy(completed.values, data.filters, dp);
      estimate = decoded.occupancy;
      r.iterations = completed.iterations;
      r.not_converged = !completed.converged || !decoded.converged;
    } else {
      SolverParams sp = config.joint;
      sp.noise_sigma = data.observed.noise_sigma;
      const JointResult jr = joint_recover(data.observed, data.filters, sp);
      estimate = jr.occupancy;
      r.iterations = jr.iterations;
      r.not_converged = !jr.converged;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DecodeFailure && e.kind() != ErrorKind::Unrecoverable &&
        e.kind() != ErrorKind::InvalidInput)
      throw;
    r.decode_failure = true;
    r.failure_message = e.what();
    estimate = OccupancyVector(r.n);
  }
  if (timing)
    r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  r.outcome = compute_metrics(data.scenario.occupancy(), estimate);
  return r;
}

bool ExperimentResult::any_failure() const {
  return std::any_of(records.begin(), records.end(), [](const TrialRecord& r) { return r.decode_failure; });
}

namespace {

std::vector<Decoder> decoders_for(Decoder d) {
  if (d == Decoder::Both) return {Decoder::Completion, Decoder::JointSparse};
  return {d};
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  out.count = static_cast<int>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.count;
  if (out.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (out.count - 1)) / std::sqrt(static_cast<double>(out.count));
  }
  return out;
}

}  // namespace

std::vector<CellSummary> summarize(const std::vector<Cell>& cells, const std::vector<TrialRecord>& records) {
  std::map<std::pair<int, int>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{r.exp_id, static_cast<int>(r.decoder)}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : groups) {
    CellSummary s;
    const auto it = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) { return c.exp_id == key.first; });
    if (it != cells.end()) s.cell = *it;
    s.decoder = static_cast<Decoder>(key.second);
    s.trials = static_cast<int>(rows.size());
    std::vector<double> pod, far, mdr;
    double rate = 0.0;
    for (const TrialRecord* r : rows) {
      if (!r->outcome.pod_undefined) pod.push_back(r->outcome.pod);
      if (!r->outcome.far_undefined) far.push_back(r->outcome.far);
      if (!r->outcome.mdr_undefined) mdr.push_back(r->outcome.mdr);
      rate += r->sampling_rate;
      if (r->decode_failure) ++s.failures;
    }
    s.pod = mean_se(pod);
    s.far = mean_se(far);
    s.mdr = mean_se(mdr);
    s.mean_sampling_rate = rate / std::max(1, s.trials);
    out.push_back(s);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto cells = enumerate_cells(config);
  const auto decoders = decoders_for(config.decoder);
  const int per_cell = config.trials;
  const int jobs = static_cast<int>(cells.size()) * per_cell;

  std::vector<std::vector<TrialRecord>> slots(static_cast<std::size_t>(jobs));
  parallel_for(jobs, options.threads, [&](int job) {
    const Cell& cell = cells[static_cast<std::size_t>(job / per_cell)];
    const int trial = job % per_cell;
    const TrialData data = generate_trial(config, cell, trial);
    auto& out = slots[static_cast<std::size_t>(job)];
    for (Decoder d : decoders) out.push_back(run_decoder(config, cell, trial, data, d, options.timing));
  });

  ExperimentResult result;
  for (auto& slot : slots)
    for (auto& r : slot) result.records.push_back(std::move(r));
  result.summary = summarize(cells, result.records);
  return result;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string results_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "exp_id,trial,decoder,fading,n,m,p,s,q,sampling_rate,snr_db,pod,far,mdr,hits,misses,falses,"
        "corrects,iters,runtime_ms,flags\n";
  for (const auto& r : records) {
    os << r.exp_id << ',' << r.trial << ',' << to_string(r.decoder) << ',' << to_string(r.fading) << ','
       << r.n << ',' << r.m << ',' << r.p << ',' << r.s << ',' << format_number(r.q) << ','
       << format_number(r.sampling_rate) << ',' << (r.snr_db ? format_number(*r.snr_db) : "noiseless") << ','
       << format_number(r.outcome.pod) << ',' << format_number(r.outcome.far) << ','
       << format_number(r.outcome.mdr) << ',' << r.outcome.hits << ',' << r.outcome.misses << ','
       << r.outcome.falses << ',' << r.outcome.corrects << ',' << r.iterations << ','
       << (r.runtime_ms ? format_number(*r.runtime_ms) : "") << ',' << r.flags() << '\n';
  }
  return os.str();
}

std::string summary_csv(const std::vector<CellSummary>& summary) {
  std::ostringstream os;
  os << "exp_id,decoder,p,s,q,rate,snr_db,trials,mean_sampling_rate,pod_mean,pod_se,pod_n,far_mean,"
        "far_se,far_n,mdr_mean,mdr_se,mdr_n,failures\n";
  for (const auto& s : summary) {
    os << s.cell.exp_id << ',' << to_string(s.decoder) << ',' << s.cell.plan.p << ',' << s.cell.s << ','
       << format_number(s.cell.plan.q) << ',' << format_number(s.cell.rate) << ','
       << (s.cell.snr_db ? format_number(*s.cell.snr_db) : "noiseless") << ',' << s.trials << ','
       << format_number(s.mean_sampling_rate) << ',' << format_number(s.pod.mean) << ','
       << format_number(s.pod.se) << ',' << s.pod.count << ',' << format_number(s.far.mean) << ','
       << format_number(s.far.se) << ',' << s.far.count << ',' << format_number(s.mdr.mean) << ','
       << format_number(s.mdr.se) << ',' << s.mdr.count << ',' << s.failures << '\n';
  }
  return os.str();
}

}  // namespace specsense
