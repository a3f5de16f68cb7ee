#include "specsense/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "specsense/error.hpp"
#include "specsense/rng.hpp"

namespace specsense {

const char* to_string(FadingModel model) {
  switch (model) {
    case FadingModel::Awgn: return "awgn";
    case FadingModel::Rayleigh: return "rayleigh";
    case FadingModel::LogNormal: return "lognormal";
  }
  return "awgn";
}

FadingModel parse_fading(const std::string& text) {
  if (text == "awgn") return FadingModel::Awgn;
  if (text == "rayleigh") return FadingModel::Rayleigh;
  if (text == "lognormal") return FadingModel::LogNormal;
  fail(ErrorKind::InvalidConfig,
       "unknown fading model '" + text + "' (expected awgn, rayleigh or lognormal)");
}

const char* to_string(FilterLaw law) {
  return law == FilterLaw::Gaussian ? "gaussian" : "bernoulli";
}

FilterLaw parse_filter_law(const std::string& text) {
  if (text == "gaussian") return FilterLaw::Gaussian;
  if (text == "bernoulli") return FilterLaw::Bernoulli;
  fail(ErrorKind::InvalidConfig,
       "unknown filter law '" + text + "' (expected gaussian or bernoulli)");
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void ScenarioConfig::validate() const {
  require(n >= 1, ErrorKind::InvalidConfig, "n must be >= 1");
  require(m >= 1, ErrorKind::InvalidConfig, "m must be >= 1");
  require(s >= 0, ErrorKind::InvalidConfig, "s must be >= 0");
  require(s <= n, ErrorKind::InvalidConfig,
          "s must not exceed n (s=" + std::to_string(s) + ", n=" + std::to_string(n) + ")");
  require(cr_area > 0.0 && pr_area > 0.0, ErrorKind::InvalidConfig, "areas must be positive");
  require(alpha > 0.0, ErrorKind::InvalidConfig, "alpha must be positive");
  require(tx_power > 0.0, ErrorKind::InvalidConfig, "tx_power must be positive");
  require(shadow_sigma_db >= 0.0, ErrorKind::InvalidConfig, "shadow_sigma_db must be >= 0");
}

int OccupancyVector::count() const {
  return static_cast<int>(std::count_if(states.begin(), states.end(),
                                        [](std::uint8_t v) { return v != 0; }));
}

std::vector<int> OccupancyVector::support() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (occupied(i)) out.push_back(i);
  return out;
}

OccupancyVector OccupancyVector::from_support(int n, const std::vector<int>& channels) {
  OccupancyVector v(n);
  for (int c : channels) {
    require(c >= 0 && c < n, ErrorKind::InvalidInput, "channel index out of range");
    v.states[static_cast<std::size_t>(c)] = 1;
  }
  return v;
}

OccupancyVector NetworkScenario::occupancy() const { return OccupancyVector::from_support(n, pr_channels); }

std::vector<int> MeasurementSet::observed_rows(int cr) const {
  std::vector<int> rows;
  for (int i = 0; i < p(); ++i)
    if (observed(i, cr)) rows.push_back(i);
  return rows;
}

std::vector<int> MeasurementSet::counts_per_cr() const {
  std::vector<int> counts(static_cast<std::size_t>(m()));
  for (int j = 0; j < m(); ++j) counts[static_cast<std::size_t>(j)] = static_cast<int>(observed.col(j).count());
  return counts;
}

NetworkScenario gen_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  NetworkScenario sc;
  sc.n = config.n;
  sc.m = config.m;
  sc.alpha = config.alpha;
  sc.tx_power = config.tx_power;
  sc.fading = config.fading;
  sc.shadow_sigma_db = config.shadow_sigma_db;
  sc.pr_area = config.pr_area;
  sc.seed = seed;

  Rng geo(seed, Stream::Geometry);
  const double cr_half = config.cr_area / 2.0;
  const double pr_half = config.pr_area / 2.0;
  sc.cr_positions.reserve(static_cast<std::size_t>(config.m));
  for (int i = 0; i < config.m; ++i) {
    const double x = geo.uniform(-cr_half, cr_half);
    const double y = geo.uniform(-cr_half, cr_half);
    sc.cr_positions.push_back({x, y});
  }
  sc.pr_positions.reserve(static_cast<std::size_t>(config.s));
  for (int k = 0; k < config.s; ++k) {
    const double x = geo.uniform(-pr_half, pr_half);
    const double y = geo.uniform(-pr_half, pr_half);
    sc.pr_positions.push_back({x, y});
  }

  // Partial Fisher-Yates: first s entries are distinct occupied channels.
  Rng occ(seed, Stream::Occupancy);
  std::vector<int> channels(static_cast<std::size_t>(config.n));
  std::iota(channels.begin(), channels.end(), 0);
  for (int k = 0; k < config.s; ++k) {
    const auto pick = static_cast<std::size_t>(k) +
                      static_cast<std::size_t>(occ.below(static_cast<std::uint64_t>(config.n - k)));
    std::swap(channels[static_cast<std::size_t>(k)], channels[pick]);
  }
  sc.pr_channels.assign(channels.begin(), channels.begin() + config.s);
  return sc;
}

GainMatrix gen_gain(const NetworkScenario& sc) {
  require(sc.alpha > 0.0, ErrorKind::InvalidInput, "gen_gain: alpha must be positive");
  require(static_cast<int>(sc.cr_positions.size()) == sc.m, ErrorKind::InvalidInput,
          "gen_gain: CR position count differs from m");

  // Transmitter for every channel: the assigned PR, or a phantom drawn in the
  // PR square for unoccupied channels (their column is zeroed by R later).
  Rng rng(sc.seed, Stream::Fading);
  const double pr_half = sc.pr_area / 2.0;
  std::vector<Point> tx(static_cast<std::size_t>(sc.n));
  std::vector<bool> assigned(static_cast<std::size_t>(sc.n), false);
  for (int k = 0; k < sc.s(); ++k) {
    const auto ch = static_cast<std::size_t>(sc.pr_channels[static_cast<std::size_t>(k)]);
    tx[ch] = sc.pr_positions[static_cast<std::size_t>(k)];
    assigned[ch] = true;
  }
  for (int j = 0; j < sc.n; ++j) {
    if (assigned[static_cast<std::size_t>(j)]) continue;
    const double x = rng.uniform(-pr_half, pr_half);
    const double y = rng.uniform(-pr_half, pr_half);
    tx[static_cast<std::size_t>(j)] = {x, y};
  }

  GainMatrix out;
  out.G.resize(sc.m, sc.n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < sc.n; ++j) {
    for (int i = 0; i < sc.m; ++i) {
      const double d = distance(sc.cr_positions[static_cast<std::size_t>(i)], tx[static_cast<std::size_t>(j)]);
      require(d > 0.0, ErrorKind::InvalidGeometry,
              "gen_gain: CR " + std::to_string(i) + " coincides with the transmitter of channel " +
                  std::to_string(j));
      double h = 1.0;
      switch (sc.fading) {
        case FadingModel::Awgn:
          break;
        case FadingModel::Rayleigh: {
          const double re = rng.normal();
          const double im = rng.normal();
          h = std::hypot(re, im) * inv_sqrt2;
          break;
        }
        case FadingModel::LogNormal:
          h = std::pow(10.0, sc.shadow_sigma_db * rng.normal() / 20.0);
          break;
      }
      out.G(i, j) = sc.tx_power * std::pow(d, -sc.alpha / 2.0) * h;
    }
  }
  return out;
}

FilterBank gen_filters(int p, int n, int m, bool shared, FilterLaw law, std::uint64_t seed) {
  require(n >= 1 && m >= 1, ErrorKind::InvalidConfig, "gen_filters: n and m must be >= 1");
  require(p >= 1, ErrorKind::InvalidConfig, "gen_filters: p must be >= 1");
  require(p <= n, ErrorKind::InvalidConfig,
          "gen_filters: p must not exceed n (p=" + std::to_string(p) + ", n=" + std::to_string(n) + ")");
  Rng rng(seed, Stream::Filters);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  FilterBank bank;
  const int count = shared ? 1 : m;
  for (int b = 0; b < count; ++b) {
    Matrix F(p, n);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) {
        F(i, j) = law == FilterLaw::Gaussian ? scale * rng.normal()
                                             : (rng.bernoulli(0.5) ? scale : -scale);
      }
    }
    bank.banks.push_back(std::move(F));
  }
  return bank;
}

double noise_sigma_for_snr(const Matrix& clean, double snr_db) {
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index j = 0; j < clean.cols(); ++j)
    for (Eigen::Index i = 0; i < clean.rows(); ++i)
      if (clean(i, j) != 0.0) {
        sum += clean(i, j) * clean(i, j);
        ++count;
      }
  if (count == 0) return 0.0;
  return std::sqrt(sum / static_cast<double>(count)) * std::pow(10.0, -snr_db / 20.0);
}

namespace {

Matrix clean_measurements(const FilterBank& filters, const OccupancyVector& occupancy,
                          const GainMatrix& gain) {
  require(!filters.banks.empty(), ErrorKind::InvalidInput, "sense: empty filter bank");
  const int n = filters.n();
  const auto m = gain.G.rows();
  require(occupancy.size() == n, ErrorKind::InvalidInput, "sense: occupancy length differs from n");
  require(gain.G.cols() == n, ErrorKind::InvalidInput, "sense: gain matrix must be m x n");
  require(filters.shared() || static_cast<Eigen::Index>(filters.banks.size()) == m,
          ErrorKind::InvalidInput, "sense: need one filter bank or one per CR");
  for (const auto& F : filters.banks)
    require(F.rows() == filters.p() && F.cols() == n, ErrorKind::InvalidInput,
            "sense: filter banks disagree in shape");

  Vector r(n);
  for (int i = 0; i < n; ++i) r(i) = occupancy.occupied(i) ? 1.0 : 0.0;

  Matrix M(filters.p(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector x = r.cwiseProduct(gain.G.row(j).transpose());
    M.col(j) = filters.for_cr(static_cast<int>(j)) * x;
  }
  return M;
}

MeasurementSet finish(Matrix M, double noise_sigma, std::uint64_t seed) {
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorKind::InvalidInput,
          "sense: noise_sigma must be finite and >= 0");
  MeasurementSet ms;
  if (noise_sigma > 0.0) {
    Rng rng(seed, Stream::Noise);
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, j) += noise_sigma * rng.normal();
    ms.noisy = true;
  }
  ms.noise_sigma = noise_sigma;
  ms.observed = Mask::Constant(M.rows(), M.cols(), true);
  ms.values = std::move(M);
  return ms;
}

}  // namespace

MeasurementSet sense(const FilterBank& filters, const OccupancyVector& occupancy,
                     const GainMatrix& gain, double noise_sigma, std::uint64_t seed) {
  return finish(clean_measurements(filters, occupancy, gain), noise_sigma, seed);
}

MeasurementSet sense_at_snr(const FilterBank& filters, const OccupancyVector& occupancy,
                            const GainMatrix& gain, double snr_db, std::uint64_t seed) {
  Matrix clean = clean_measurements(filters, occupancy, gain);
  const double sigma = noise_sigma_for_snr(clean, snr_db);
  MeasurementSet ms = finish(std::move(clean), sigma, seed);
  ms.snr_db = snr_db;
  return ms;
}

MeasurementSet erase(const MeasurementSet& full, double observe_prob, std::uint64_t seed) {
  require(observe_prob >= 0.0 && observe_prob <= 1.0, ErrorKind::InvalidConfig,
          "erase: observation probability must lie in [0, 1]");
  MeasurementSet out = full;
  Rng rng(seed, Stream::Erasure);
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
      const bool keep = full.observed(i, j) && rng.uniform() < observe_prob;
      out.observed(i, j) = keep;
      if (!keep) out.values(i, j) = 0.0;
    }
  }
  return out;
}

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  require(end != text.c_str() && *end == '\0', ErrorKind::InvalidInput,
          "scenario: bad number for '" + key + "': " + text);
  return v;
}

}  // namespace

std::string scenario_to_text(const NetworkScenario& sc) {
  std::ostringstream os;
  os << "n = " << sc.n << "\n";
  os << "m = " << sc.m << "\n";
  os << "s = " << sc.s() << "\n";
  os << "alpha = " << hex(sc.alpha) << "\n";
  os << "tx_power = " << hex(sc.tx_power) << "\n";
  os << "fading = " << to_string(sc.fading) << "\n";
  os << "shadow_sigma_db = " << hex(sc.shadow_sigma_db) << "\n";
  os << "pr_area = " << hex(sc.pr_area) << "\n";
  os << "seed = " << sc.seed << "\n";
  for (int i = 0; i < sc.m; ++i) {
    const auto& p = sc.cr_positions[static_cast<std::size_t>(i)];
    os << "cr." << i << " = " << hex(p.x) << " " << hex(p.y) << "\n";
  }
  for (int k = 0; k < sc.s(); ++k) {
    const auto& p = sc.pr_positions[static_cast<std::size_t>(k)];
    os << "pr." << k << " = " << sc.pr_channels[static_cast<std::size_t>(k)] << " " << hex(p.x)
       << " " << hex(p.y) << "\n";
  }
  return os.str();
}

NetworkScenario scenario_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidInput, "scenario: missing '=' in: " + line);
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    require(it != kv.end(), ErrorKind::InvalidInput, "scenario: missing key '" + key + "'");
    return it->second;
  };

  NetworkScenario sc;
  sc.n = std::stoi(get("n"));
  sc.m = std::stoi(get("m"));
  const int s = std::stoi(get("s"));
  sc.alpha = parse_double("alpha", get("alpha"));
  sc.tx_power = parse_double("tx_power", get("tx_power"));
  sc.fading = parse_fading(get("fading"));
  sc.shadow_sigma_db = parse_double("shadow_sigma_db", get("shadow_sigma_db"));
  sc.pr_area = parse_double("pr_area", get("pr_area"));
  sc.seed = std::stoull(get("seed"));
  for (int i = 0; i < sc.m; ++i) {
    std::istringstream ps(get("cr." + std::to_string(i)));
    std::string x, y;
    ps >> x >> y;
    sc.cr_positions.push_back({parse_double("cr", x), parse_double("cr", y)});
  }
  for (int k = 0; k < s; ++k) {
    std::istringstream ps(get("pr." + std::to_string(k)));
    int ch = -1;
    std::string x, y;
    ps >> ch >> x >> y;
    require(ch >= 0 && ch < sc.n, ErrorKind::InvalidInput, "scenario: PR channel out of range");
    sc.pr_channels.push_back(ch);
    sc.pr_positions.push_back({parse_double("pr", x), parse_double("pr", y)});
  }
  return sc;
}

}  // namespace specsense
