#include "doctest.h"
#include "oracles.hpp"
#include "specsense/error.hpp"
#include "specsense/scenario.hpp"

#include <cmath>
#include <numeric>

using namespace specsense;

namespace {

// One PR at the origin on channel 0, m CRs all at (d, 0).
NetworkScenario fixed_link(int m, double d, double alpha, FadingModel fading, std::uint64_t seed = 1) {
  NetworkScenario sc;
  sc.n = 1;
  sc.m = m;
  sc.cr_positions.assign(static_cast<std::size_t>(m), Point{d, 0.0});
  sc.pr_positions = {Point{0.0, 0.0}};
  sc.pr_channels = {0};
  sc.alpha = alpha;
  sc.fading = fading;
  sc.seed = seed;
  return sc;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("scenario generation is seeded") {
  ScenarioConfig cfg;
  cfg.n = 500;
  cfg.m = 20;
  cfg.s = 4;
  const auto a = gen_scenario(cfg, 77);
  const auto b = gen_scenario(cfg, 77);
  CHECK(scenario_to_text(a) == scenario_to_text(b));
  const auto c = gen_scenario(cfg, 78);
  CHECK(scenario_to_text(a) != scenario_to_text(c));
}

TEST_CASE("scenario layout respects the areas and assigns distinct channels") {
  ScenarioConfig cfg;
  cfg.s = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto sc = gen_scenario(cfg, seed);
    CHECK(sc.s() == 4);
    CHECK(sc.occupancy().count() == 4);
    for (const auto& p : sc.cr_positions) {
      CHECK(std::abs(p.x) <= cfg.cr_area / 2);
      CHECK(std::abs(p.y) <= cfg.cr_area / 2);
    }
    for (const auto& p : sc.pr_positions) {
      CHECK(std::abs(p.x) <= cfg.pr_area / 2);
      CHECK(std::abs(p.y) <= cfg.pr_area / 2);
    }
  }
}

TEST_CASE("empty spectrum and oversubscribed spectrum") {
  ScenarioConfig cfg;
  cfg.s = 0;
  CHECK(gen_scenario(cfg, 1).occupancy().count() == 0);
  cfg.s = cfg.n + 1;
  CHECK(kind_of([&] { gen_scenario(cfg, 1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("path loss unit cases") {
  const auto unit = gen_gain(fixed_link(1, 1.0, 2.0, FadingModel::Awgn));
  CHECK(unit.G(0, 0) == doctest::Approx(1.0));
  const auto far = gen_gain(fixed_link(1, 100.0, 3.0, FadingModel::Awgn));
  CHECK(far.G(0, 0) == doctest::Approx(1e-3));
}

TEST_CASE("zero distance is rejected") {
  CHECK(kind_of([] { gen_gain(fixed_link(1, 0.0, 3.0, FadingModel::Awgn)); }) == ErrorKind::InvalidGeometry);
}

TEST_CASE("Rayleigh amplitudes follow the unit mean-square law") {
  const auto g = gen_gain(fixed_link(100000, 1.0, 2.0, FadingModel::Rayleigh, 9));
  std::vector<double> sample(g.G.col(0).data(), g.G.col(0).data() + g.G.rows());
  const double d = oracle::ks_statistic(sample, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x * x); });
  CHECK(d < 0.01);
  double ms = 0.0;
  for (double x : sample) ms += x * x;
  CHECK(ms / static_cast<double>(sample.size()) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log-normal shadowing has the configured dB spread") {
  auto sc = fixed_link(50000, 1.0, 2.0, FadingModel::LogNormal, 4);
  sc.shadow_sigma_db = 8.0;
  const auto g = gen_gain(sc);
  std::vector<double> db(static_cast<std::size_t>(g.G.rows()));
  for (Eigen::Index i = 0; i < g.G.rows(); ++i) db[static_cast<std::size_t>(i)] = 20.0 * std::log10(g.G(i, 0));
  const double d = oracle::ks_statistic(db, [](double x) { return 0.5 * std::erfc(-x / (8.0 * std::sqrt(2.0))); });
  CHECK(d < oracle::ks_critical_001(db.size()));
}

TEST_CASE("gain matrix is nonnegative and finite") {
  ScenarioConfig cfg;
  cfg.s = 3;
  cfg.fading = FadingModel::Rayleigh;
  const auto g = gen_gain(gen_scenario(cfg, 5));
  CHECK(g.G.rows() == cfg.m);
  CHECK(g.G.cols() == cfg.n);
  CHECK(g.G.allFinite());
  CHECK(g.G.minCoeff() >= 0.0);
}

TEST_CASE("filter banks: shape, determinism and errors") {
  const auto a = gen_filters(35, 35, 20, true, FilterLaw::Gaussian, 3);
  CHECK(a.shared());
  CHECK(numerical_rank(a.banks[0]) == 35);
  const auto b = gen_filters(35, 35, 20, true, FilterLaw::Gaussian, 3);
  CHECK(a.banks[0] == b.banks[0]);
  const auto per_cr = gen_filters(5, 35, 20, false, FilterLaw::Gaussian, 3);
  CHECK(per_cr.banks.size() == 20);
  CHECK(per_cr.for_cr(0) != per_cr.for_cr(1));
  CHECK(kind_of([] { gen_filters(36, 35, 20, true, FilterLaw::Gaussian, 3); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("Gaussian filter moments") {
  const int p = 10;
  const auto f = gen_filters(p, 1000, 1, true, FilterLaw::Gaussian, 17);
  const Matrix& F = f.banks[0];
  const double mean = F.mean();
  const double var = (F.array() - mean).square().sum() / static_cast<double>(F.size() - 1);
  CHECK(std::abs(mean) < 0.01 / std::sqrt(p) * 3.0);
  CHECK(std::abs(var - 1.0 / p) < 0.05 / p);
}

TEST_CASE("Bernoulli filters take two values") {
  const int p = 16;
  const auto f = gen_filters(p, 500, 1, true, FilterLaw::Bernoulli, 2);
  const Matrix& F = f.banks[0];
  CHECK((F.array().abs() - 1.0 / std::sqrt(p)).abs().maxCoeff() < 1e-15);
  CHECK(std::abs(F.mean()) < 4.0 / std::sqrt(static_cast<double>(F.size())) / std::sqrt(p));
}

TEST_CASE("sensing: empty spectrum, rank one, rank s") {
  ScenarioConfig cfg;
  cfg.s = 0;
  auto sc = gen_scenario(cfg, 1);
  auto g = gen_gain(sc);
  const auto F = gen_filters(10, cfg.n, cfg.m, true, FilterLaw::Gaussian, 1);
  CHECK(sense(F, sc.occupancy(), g, 0.0, 1).values.norm() == 0.0);

  cfg.s = 1;
  sc = gen_scenario(cfg, 2);
  g = gen_gain(sc);
  const int k = sc.pr_channels[0];
  const Matrix M1 = sense(F, sc.occupancy(), g, 0.0, 2).values;
  const Matrix outer = F.banks[0].col(k) * g.G.col(k).transpose();
  CHECK((M1 - outer).norm() <= 1e-12 * outer.norm());
  CHECK(numerical_rank(M1) == 1);

  cfg.s = 3;
  sc = gen_scenario(cfg, 3);
  g = gen_gain(sc);
  const auto ms = sense(F, sc.occupancy(), g, 0.0, 3);
  CHECK(numerical_rank(ms.values) == 3);
  Matrix R = Matrix::Zero(cfg.n, cfg.n);
  for (int c : sc.pr_channels) R(c, c) = 1.0;
  const Matrix direct = F.banks[0] * R * g.G.transpose();
  CHECK((ms.values - direct).norm() <= 1e-12 * direct.norm());
  CHECK(ms.observed.all());
  CHECK_FALSE(ms.noisy);
}

TEST_CASE("sensing rejects mismatched shapes") {
  ScenarioConfig cfg;
  const auto sc = gen_scenario(cfg, 1);
  const auto g = gen_gain(sc);
  const auto F = gen_filters(5, cfg.n - 1, cfg.m, true, FilterLaw::Gaussian, 1);
  CHECK(kind_of([&] { sense(F, sc.occupancy(), g, 0.0, 1); }) == ErrorKind::InvalidInput);
}

TEST_CASE("noise level follows the SNR anchor") {
  ScenarioConfig cfg;
  cfg.s = 2;
  const auto sc = gen_scenario(cfg, 4);
  const auto g = gen_gain(sc);
  const auto F = gen_filters(35, cfg.n, cfg.m, true, FilterLaw::Gaussian, 4);
  const Matrix clean = sense(F, sc.occupancy(), g, 0.0, 4).values;
  const double sigma = noise_sigma_for_snr(clean, 20.0);
  CHECK(sigma == doctest::Approx(std::sqrt(clean.squaredNorm() / static_cast<double>(clean.size())) * 0.1));
  const auto noisy = sense_at_snr(F, sc.occupancy(), g, 20.0, 4);
  CHECK(noisy.noisy);
  CHECK(noisy.noise_sigma == doctest::Approx(sigma));
  const double measured = (noisy.values - clean).norm() / std::sqrt(static_cast<double>(clean.size()));
  CHECK(measured == doctest::Approx(sigma).epsilon(0.1));
  CHECK(noise_sigma_for_snr(Matrix::Zero(3, 3), 10.0) == 0.0);
}

TEST_CASE("erasure: limits, concentration and errors") {
  MeasurementSet full;
  full.values = Matrix::Ones(100, 100);
  full.observed = Mask::Constant(100, 100, true);
  CHECK(erase(full, 1.0, 1).observed_count() == 10000);
  const auto none = erase(full, 0.0, 1);
  CHECK(none.observed_count() == 0);
  CHECK(none.values.norm() == 0.0);
  const double frac = static_cast<double>(erase(full, 0.5, 2).observed_count()) / 10000.0;
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
  CHECK(kind_of([&] { erase(full, 1.5, 1); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { erase(full, -0.1, 1); }) == ErrorKind::InvalidConfig);
  CHECK(erase(full, 0.3, 9).observed.cwiseEqual(erase(full, 0.3, 9).observed).all());
}

TEST_CASE("scenario text round trip is exact") {
  ScenarioConfig cfg;
  cfg.s = 3;
  cfg.fading = FadingModel::LogNormal;
  const auto sc = gen_scenario(cfg, 123);
  const auto back = scenario_from_text(scenario_to_text(sc));
  CHECK(scenario_to_text(back) == scenario_to_text(sc));
  CHECK(back.cr_positions[3].x == sc.cr_positions[3].x);
  CHECK(gen_gain(back).G == gen_gain(sc).G);
}

TEST_CASE("enum names round trip") {
  for (auto f : {FadingModel::Awgn, FadingModel::Rayleigh, FadingModel::LogNormal})
    CHECK(parse_fading(to_string(f)) == f);
  for (auto l : {FilterLaw::Gaussian, FilterLaw::Bernoulli}) CHECK(parse_filter_law(to_string(l)) == l);
  CHECK_THROWS_AS(parse_fading("rician"), Error);
}
