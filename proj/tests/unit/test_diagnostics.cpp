#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "hpf/diagnostics.hpp"

using namespace hpf;
using namespace hpf::tskit;

// statsmodels 0.14 values, series from oracle::lcg_uniform(300)
TEST_CASE("ADF matches statsmodels on frozen series") {
  const Series e = oracle::lcg_uniform(300);
  const Series rw = oracle::cumsum(e);
  const Series ar = oracle::ar1(e, 0.5);
  const Series yy = oracle::cumsum(oracle::ar1(e, 0.7));
  Series q(300, 0.0);
  for (int t = 0; t < 300; ++t)
    q[t] = e[t] + (t >= 2 ? 0.9 * q[t - 1] - 0.5 * q[t - 2] : 0.0);

  struct Case {
    const Series* y;
    double stat, p;
    int lag, nobs;
  };
  const Case cases[] = {
      {&rw, -1.7021724416431239, 0.42999351861060664, 0, 299},
      {&ar, -10.906858610148342, 1.1224264723981993e-19, 0, 299},
      {&yy, -1.967542581679081, 0.30098330923505745, 3, 296},
      {&q, -13.573881728725484, 2.1884156113695033e-25, 1, 298},
  };
  for (const auto& c : cases) {
    const auto r = adf_test(*c.y, 12);
    CHECK(r.used_lag == c.lag);
    CHECK(r.nobs == c.nobs);
    CHECK(r.statistic == doctest::Approx(c.stat).epsilon(1e-8));
    CHECK(r.p_value / c.p == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("Ljung-Box matches statsmodels on frozen series") {
  const Series e = oracle::lcg_uniform(300);
  const Series ar = oracle::ar1(e, 0.5);
  const auto a = ljung_box(ar, std::vector<int>{12, 24});
  CHECK(a[0].statistic == doctest::Approx(101.86954475136116).epsilon(1e-10));
  CHECK(a[0].p_value / 2.393817373567107e-16 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a[1].statistic == doctest::Approx(117.9954240904766).epsilon(1e-10));
  CHECK(a[1].p_value / 2.204417404737506e-14 == doctest::Approx(1.0).epsilon(1e-6));
  const auto w = ljung_box(e, std::vector<int>{12, 24});
  CHECK(w[0].statistic == doctest::Approx(8.275108663078402).epsilon(1e-10));
  CHECK(w[0].p_value == doctest::Approx(0.763278969556421).epsilon(1e-8));
  CHECK(w[1].statistic == doctest::Approx(20.816387014581405).epsilon(1e-10));
  CHECK(w[1].p_value == doctest::Approx(0.6495320433268712).epsilon(1e-8));
}

TEST_CASE("Ljung-Box by hand on five points") {
  // demeaned -2,-1,0,1,2: r1 = 0.4, r2 = -0.1, Q = 35 (0.16/4 + 0.01/3)
  const Series x{1, 2, 3, 4, 5};
  const auto r = ljung_box(x, 2);
  CHECK(r.lag == 2);
  CHECK(r.statistic == doctest::Approx(35.0 * (0.04 + 0.01 / 3.0)).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(std::exp(-r.statistic / 2)).epsilon(1e-12));  // chi2(2) tail
}

TEST_CASE("diagnostic input checks") {
  CHECK_THROWS_AS(ljung_box(Series{1, 2, 3}, 3), ValidationError);
  CHECK_THROWS_AS(ljung_box(Series{1, 2, 3, 4}, 0), ValidationError);
  CHECK_THROWS_AS(ljung_box(Series(20, 1.0), 2), ValidationError);
  CHECK_THROWS_AS(adf_test(Series{1, 2, 3, 4, 5}, 4), ValidationError);
}

TEST_CASE("explosive series gives a positive ADF statistic") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0, 1);
  Series y{1.0};
  for (int t = 1; t < 200; ++t) y.push_back(1.03 * y.back() + N(rng));
  const auto r = adf_test(y, 4);
  CHECK(r.statistic > 0);
  CHECK(r.p_value > 0.9);
}

TEST_CASE("ADF p-value surface is monotone with the usual critical values") {
  CHECK(adf_pvalue(-3.43) == doctest::Approx(0.01).epsilon(0.1));
  CHECK(adf_pvalue(-2.86) == doctest::Approx(0.05).epsilon(0.1));
  CHECK(adf_pvalue(-2.57) == doctest::Approx(0.10).epsilon(0.1));
  double prev = 0;
  for (double s = -8; s < 3; s += 0.25) {
    const double p = adf_pvalue(s);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("small Monte Carlo size check") {
  // 200 reps; a 5% test should reject between 1% and 11% of the time
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0, 1);
  int lb = 0, adf = 0;
  for (int r = 0; r < 200; ++r) {
    Series e(300);
    for (auto& v : e) v = N(rng);
    if (ljung_box(e, 12).p_value < 0.05) ++lb;
    if (adf_test(oracle::cumsum(e), 4).p_value < 0.05) ++adf;
  }
  CHECK(lb >= 2);
  CHECK(lb <= 22);
  CHECK(adf >= 2);
  CHECK(adf <= 22);
}
