#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specsense/linalg.hpp"

namespace specsense {

enum class FadingModel { Awgn, Rayleigh, LogNormal };

const char* to_string(FadingModel model);
FadingModel parse_fading(const std::string& text);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

/// Inputs to gen_scenario. Areas are side lengths (meters) of squares
/// centered at the fusion center.
struct ScenarioConfig {
  int n = 35;
  int m = 20;
  int s = 1;
  double cr_area = 500.0;
  double pr_area = 1000.0;
  double alpha = 3.0;
  double tx_power = 1.0;
  FadingModel fading = FadingModel::Awgn;
  double shadow_sigma_db = 8.0;

  void validate() const;
};

/// Binary channel states (the diagonal of R).
struct OccupancyVector {
  std::vector<std::uint8_t> states;

  OccupancyVector() = default;
  explicit OccupancyVector(int n) : states(static_cast<std::size_t>(n), 0) {}

  int size() const { return static_cast<int>(states.size()); }
  int count() const;
  bool occupied(int channel) const { return states[static_cast<std::size_t>(channel)] != 0; }
  std::vector<int> support() const;

  static OccupancyVector from_support(int n, const std::vector<int>& channels);

  bool operator==(const OccupancyVector&) const = default;
};

/// One immutable network realization.
struct NetworkScenario {
  int n = 0;
  int m = 0;
  std::vector<Point> cr_positions;
  std::vector<Point> pr_positions;
  std::vector<int> pr_channels;  // pr_channels[k] is the channel PR k transmits on
  double alpha = 3.0;
  double tx_power = 1.0;
  FadingModel fading = FadingModel::Awgn;
  double shadow_sigma_db = 8.0;
  double pr_area = 1000.0;
  std::uint64_t seed = 0;

  int s() const { return static_cast<int>(pr_channels.size()); }
  OccupancyVector occupancy() const;
};

/// m x n nonnegative power-gain matrix; row i is CR i, column j is channel j.
struct GainMatrix {
  Matrix G;
};

/// Random filter coefficients: one p x n bank shared by every CR, or m banks.
struct FilterBank {
  std::vector<Matrix> banks;

  bool shared() const { return banks.size() == 1; }
  int p() const { return static_cast<int>(banks.front().rows()); }
  int n() const { return static_cast<int>(banks.front().cols()); }
  const Matrix& for_cr(int cr) const {
    return shared() ? banks.front() : banks[static_cast<std::size_t>(cr)];
  }
};

enum class FilterLaw { Gaussian, Bernoulli };

const char* to_string(FilterLaw law);
FilterLaw parse_filter_law(const std::string& text);

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Reports at the fusion center: p x m values with an observation mask.
/// Unobserved entries are stored as zero and must not be read as data.
struct MeasurementSet {
  Matrix values;
  Mask observed;
  double noise_sigma = 0.0;
  double snr_db = 0.0;
  bool noisy = false;

  int p() const { return static_cast<int>(values.rows()); }
  int m() const { return static_cast<int>(values.cols()); }
  long observed_count() const { return static_cast<long>(observed.count()); }
  std::vector<int> observed_rows(int cr) const;
  std::vector<int> counts_per_cr() const;
};

NetworkScenario gen_scenario(const ScenarioConfig& config, std::uint64_t seed);

GainMatrix gen_gain(const NetworkScenario& scenario);

FilterBank gen_filters(int p, int n, int m, bool shared, FilterLaw law, std::uint64_t seed);

/// Noise standard deviation for a target SNR: RMS of the nonzero clean
/// measurements times 10^(-snr_db / 20). Zero for an all-zero input.
double noise_sigma_for_snr(const Matrix& clean, double snr_db);

/// M = F R G^T column by column, plus i.i.d. N(0, noise_sigma^2) per entry.
MeasurementSet sense(const FilterBank& filters, const OccupancyVector& occupancy,
                     const GainMatrix& gain, double noise_sigma, std::uint64_t seed);

/// Same forward model with noise_sigma derived from snr_db.
MeasurementSet sense_at_snr(const FilterBank& filters, const OccupancyVector& occupancy,
                            const GainMatrix& gain, double snr_db, std::uint64_t seed);

/// Keeps each entry independently with probability observe_prob.
MeasurementSet erase(const MeasurementSet& full, double observe_prob, std::uint64_t seed);

/// Flat `key = value` text; doubles are written as hex floats so that the
/// round trip is exact.
std::string scenario_to_text(const NetworkScenario& scenario);
NetworkScenario scenario_from_text(const std::string& text);

}  // namespace specsense
