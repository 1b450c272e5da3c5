#include <doctest.h>

#include <cmath>
#include <random>

#include "hpf/scenario.hpp"

using namespace hpf;
using namespace hpf::scenario;

namespace {

struct Toy {
  factors::FactorSet fs;
  Series mu;
};

// U random walk with drift, two AR(2) spreads, AR(1) remainder.
Toy toy_world(std::uint64_t seed, int T, double beta, double lambda, double gamma, double eps_sd = 0.01) {
  Toy w;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 1);
  w.fs.months = month_range(Month{1990, 1}, T);
  const auto m = tskit::simulate_arma({{1.6, -0.7}, {}, 0.0}, 12, 1e-4, T, seed + 1);
  const auto l = tskit::simulate_arma({{1.5, -0.6}, {}, 0.0}, 12, 1e-4, T, seed + 2);
  const auto e = tskit::simulate_arma({{0.6}, {}, 0.0}, 12, eps_sd * eps_sd * 0.64, T, seed + 3);
  double u = 0;
  for (int t = 0; t < T; ++t) {
    u += 0.005 + 0.01 * N(rng);
    w.fs.market.push_back(u);
    w.fs.mining.push_back(m[t]);
    w.fs.lifestyle.push_back(l[t]);
    w.mu.push_back(0.1 + beta * u + lambda * m[t] + gamma * l[t] + e[t]);
  }
  return w;
}

}  // namespace

TEST_CASE("scenario map and doubling time") {
  CHECK(scenario_map(2.0, 1.22) == doctest::Approx(2.3295).epsilon(1e-4));
  CHECK(scenario_map(2.0, 0.70) == doctest::Approx(1.6245).epsilon(1e-4));
  CHECK(scenario_map(3.0, 0.0) == 1.0);
  CHECK(doubling_time(9.96, 1.22) == doctest::Approx(8.1639).epsilon(1e-4));
  CHECK(doubling_time(9.96, 0.70) == doctest::Approx(14.2286).epsilon(1e-4));
  CHECK_THROWS_AS(scenario_map(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(doubling_time(9.96, 0.0), ValidationError);
  CHECK_THROWS_AS(doubling_time(9.96, -0.5), ValidationError);
}

TEST_CASE("national doubling time from annual growth") {
  Series U;
  for (int t = 0; t <= 240; ++t) U.push_back(t * std::log(2.0) / 120.0);
  CHECK(national_doubling_time(U) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(national_doubling_time(Series{0.0, -1.0}), ValidationError);
  CHECK_THROWS_AS(national_doubling_time(Series{0.0}), ValidationError);
}

TEST_CASE("uncertainty band") {
  const auto perth = uncertainty_band(0.60, -0.13, 0.27, 0.15, 0.0);
  CHECK(perth.x95_factors == doctest::Approx(1.377).epsilon(1e-3));
  const auto syd = uncertainty_band(-0.43, -0.14, 0.27, 0.15, 0.0);
  CHECK(syd.x95_factors == doctest::Approx(1.260).epsilon(1e-3));
  const auto zero = uncertainty_band(0.0, 0.0, 0.27, 0.15, 0.0);
  CHECK(zero.x95_factors == 1.0);
  CHECK(zero.x95_total == 1.0);
  CHECK(zero.share_mining == 0.0);

  const auto b = uncertainty_band(0.5, 0.4, 0.2, 0.1, 0.05);
  const double vm = 0.01, vl = 0.0016, ve = 0.0025;
  CHECK(b.x95_total == doctest::Approx(std::exp(1.96 * std::sqrt(vm + vl + ve))));
  CHECK(b.x95_total >= b.x95_factors);
  CHECK(b.share_mining + b.share_lifestyle + b.share_idio == doctest::Approx(1.0));
  CHECK(b.share_mining == doctest::Approx(vm / (vm + vl + ve)));
  // sign of the loading does not matter
  CHECK(uncertainty_band(-0.5, -0.4, 0.2, 0.1, 0.05).x95_total == doctest::Approx(b.x95_total));
  CHECK_THROWS_AS(uncertainty_band(0.5, 0.4, -0.2, 0.1, 0.0), ValidationError);
}

TEST_CASE("fit_region recovers planted loadings") {
  const auto w = toy_world(5, 300, 1.15, 0.6, -0.4);
  const auto l = fit_region(w.mu, w.fs, tskit::ArimaSpec{1, 0, 0, 0, 12, true});
  CHECK(std::abs(l.beta - 1.15) < 4 * l.se_beta);
  CHECK(std::abs(l.lambda - 0.6) < 4 * l.se_lambda);
  CHECK(std::abs(l.gamma + 0.4) < 4 * l.se_gamma);
  CHECK(l.se_beta > 0);
  CHECK(l.source == "full-sample");
  CHECK(l.remainder_fit.params.arma.phi[0] == doctest::Approx(0.6).epsilon(0.25));
}

TEST_CASE("decomposition adds up") {
  const auto w = toy_world(6, 120, 1.0, 0.3, 0.2);
  RegionLoadings l;
  l.b = 0.1;
  l.beta = 1.0;
  l.lambda = 0.3;
  l.gamma = 0.2;
  const auto d = decompose(w.mu, w.fs, l);
  for (std::size_t t = 0; t < w.mu.size(); ++t) {
    CHECK(d.market[t] == doctest::Approx(0.1 + w.fs.market[t]));
    CHECK(d.market_mining_lifestyle[t] + d.remainder[t] == doctest::Approx(w.mu[t]));
    CHECK(d.market_mining[t] - d.market[t] == doctest::Approx(0.3 * w.fs.mining[t]));
  }
  l.gamma = std::nan("");
  CHECK_THROWS_AS(decompose(w.mu, w.fs, l), ValidationError);
}

TEST_CASE("expanding windows and medians") {
  const auto w = toy_world(7, 240, 0.9, 0.2, 0.5);
  const auto eps = endpoint_grid(Month{2004, 12}, Month{2009, 12}, 6);
  REQUIRE(eps.size() == 11);
  CHECK(eps.back() == Month{2009, 12});
  const auto path = expanding_windows(w.mu, w.fs, tskit::ArimaSpec{1, 0, 0, 0, 12, true}, eps);
  REQUIRE(path.beta.size() == eps.size());
  for (bool ok : path.ok) CHECK(ok);
  const auto med = median_loadings(path, Month{2005, 1}, Month{2009, 12});
  CHECK(med.source == "median-of-windows");
  CHECK(med.beta == doctest::Approx(0.9).epsilon(0.1));
  // the median is taken only over the filter window
  Series sorted(path.beta.begin() + 1, path.beta.end());
  std::sort(sorted.begin(), sorted.end());
  CHECK(med.beta == doctest::Approx(0.5 * (sorted[4] + sorted[5])));

  CHECK_THROWS_AS(median_loadings(path, Month{2020, 1}, Month{2021, 1}), ValidationError);
  CHECK_THROWS_AS(median_loadings(path, Month{2009, 1}, Month{2009, 12}, 3), ValidationError);
  CHECK_THROWS_AS(expanding_windows(w.mu, w.fs, tskit::ArimaSpec{}, {Month{1995, 1}}), ValidationError);
  CHECK_THROWS_AS(expanding_windows(w.mu, w.fs, tskit::ArimaSpec{}, {Month{2030, 1}}), ValidationError);
}

TEST_CASE("lifestyle inclusion by AICc") {
  const auto strong = toy_world(8, 240, 1.0, 0.3, 0.8, 0.005);
  const auto t = lifestyle_inclusion_test(strong.mu, strong.fs, tskit::ArimaSpec{1, 0, 0, 0, 12, true});
  CHECK(t.delta == doctest::Approx(t.aicc_3f - t.aicc_2f));
  CHECK(t.delta < -2);
  CHECK(t.include);
  // without a lifestyle effect the rule rarely fires
  int fired = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto none = toy_world(100 + k, 240, 1.0, 0.3, 0.0, 0.005);
    if (lifestyle_inclusion_test(none.mu, none.fs, tskit::ArimaSpec{1, 0, 0, 0, 12, true}).include) ++fired;
  }
  CHECK(fired <= 4);
}

TEST_CASE("misaligned inputs are rejected") {
  auto w = toy_world(10, 60, 1.0, 0.0, 0.0);
  w.mu.pop_back();
  CHECK_THROWS_AS(fit_region(w.mu, w.fs, tskit::ArimaSpec{}), ValidationError);
}
