#include <doctest.h>

#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "hpf/arima.hpp"

using namespace hpf;
using namespace hpf::tskit;

namespace {

Matrix no_exog(std::size_t n) { return Matrix(static_cast<Eigen::Index>(n), 0); }

Series gaussian(int n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0, sd);
  Series out(static_cast<std::size_t>(n));
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace

TEST_CASE("white noise loglik is the iid Gaussian formula") {
  const Series y = gaussian(40, 1);
  ArimaSpec spec;
  ArimaParams p;
  p.intercept = 0.2;
  p.sigma2 = 1.7;
  double expect = 0;
  for (double v : y) expect += -0.5 * std::log(2 * std::numbers::pi * p.sigma2) - 0.5 * (v - 0.2) * (v - 0.2) / p.sigma2;
  CHECK(loglik(spec, p, y, no_exog(y.size())) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("AR(1), T=4 against the dense Toeplitz density") {
  const Series y{0.3, -0.1, 0.8, 0.2};
  ArimaSpec spec{1, 0, 0, 0, 12, false};
  ArimaParams p;
  p.arma.phi = {0.5};
  p.sigma2 = 1.0;
  // Toeplitz covariance gamma_k = 0.5^k / 0.75
  Matrix S(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) S(i, j) = std::pow(0.5, std::abs(i - j)) / 0.75;
  Vector v(4);
  v << 0.3, -0.1, 0.8, 0.2;
  Eigen::LLT<Matrix> llt(S);
  const double ld = 2 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const double expect = -2 * std::log(2 * std::numbers::pi) - 0.5 * ld - 0.5 * v.dot(llt.solve(v));
  CHECK(loglik(spec, p, y, no_exog(4)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("filter loglik equals dense loglik for regression with seasonal ARMA errors") {
  const Series e = gaussian(60, 2, 0.3);
  Matrix X(60, 2);
  for (int t = 0; t < 60; ++t) {
    X(t, 0) = 0.02 * t;
    X(t, 1) = std::sin(0.4 * t);
  }
  for (const ArimaSpec spec : {ArimaSpec{2, 0, 1, 1, 12, true}, ArimaSpec{1, 1, 2, 0, 12, true},
                               ArimaSpec{3, 0, 0, 1, 12, false}, ArimaSpec{0, 0, 2, 1, 4, true}}) {
    ArimaParams p;
    std::mt19937_64 rng(77);
    p.arma = oracle::random_arma(rng, spec.p, spec.q, spec.seasonal_q);
    p.intercept = 0.1;
    p.beta = {0.5, -0.2};
    p.sigma2 = 0.05;
    const double a = loglik(spec, p, e, X);
    const double b = oracle::dense_loglik(spec, p, e, X);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("zero regressor leaves the likelihood unchanged") {
  const Series y = gaussian(50, 3);
  ArimaSpec spec{1, 0, 1, 0, 12, true};
  ArimaParams p;
  p.arma.phi = {0.4};
  p.arma.theta = {0.2};
  p.sigma2 = 0.9;
  const double base = loglik(spec, p, y, no_exog(50));
  p.beta = {123.0};
  CHECK(loglik(spec, p, y, Matrix::Zero(50, 1)) == doctest::Approx(base).epsilon(1e-13));
}

// Reference values from statsmodels ARIMA(...).loglike on the LCG series.
TEST_CASE("loglik matches frozen statsmodels values") {
  const Series e = oracle::lcg_uniform(300);
  const Series ar = oracle::ar1(e, 0.5);
  const Series ar200(ar.begin(), ar.begin() + 200);
  {
    ArimaSpec spec{2, 0, 1, 0, 12, true};
    ArimaParams p;
    p.intercept = 0.1;
    p.arma.phi = {0.6, -0.2};
    p.arma.theta = {0.3};
    p.sigma2 = 0.08;
    CHECK(loglik(spec, p, ar200, no_exog(200)) == doctest::Approx(-56.76005453019678).epsilon(1e-9));
  }
  {
    ArimaSpec spec{1, 0, 0, 1, 12, true};
    ArimaParams p;
    p.intercept = -0.05;
    p.arma.phi = {0.4};
    p.arma.seasonal_theta = 0.5;
    p.sigma2 = 0.09;
    CHECK(loglik(spec, p, ar200, no_exog(200)) == doctest::Approx(-58.79544023826895).epsilon(1e-9));
  }
  {
    const Series rw = oracle::cumsum(e);
    ArimaSpec spec{1, 1, 1, 0, 12, false};
    ArimaParams p;
    p.arma.phi = {0.3};
    p.arma.theta = {-0.2};
    p.sigma2 = 0.085;
    CHECK(loglik(spec, p, Series(rw.begin(), rw.begin() + 200), no_exog(200)) ==
          doctest::Approx(-33.38238734308695).epsilon(1e-9));
  }
}

TEST_CASE("AICc arithmetic and limits") {
  CHECK(aicc(0.0, 2, 10) == doctest::Approx(4.0 + 12.0 / 7.0));
  const double big = aicc(-100.0, 3, 1000000) - (200.0 + 6.0);
  CHECK(std::abs(big) < 1e-4);
  CHECK_THROWS_AS(aicc(0.0, 5, 6), ValidationError);
}

TEST_CASE("fan: white noise and AR(1) closed forms") {
  ArimaSpec wn;
  ArimaParams p;
  p.sigma2 = 1.0;
  const auto f0 = forecast_fan(wn, p, 24);
  for (int h = 1; h <= 24; ++h) CHECK(f0.sd_at(h) == doctest::Approx(1.0));

  ArimaSpec a1{1, 0, 0, 0, 12, true};
  p.arma.phi = {0.8};
  p.sigma2 = 0.3;
  const auto f1 = forecast_fan(a1, p, 60);
  for (int h = 1; h <= 60; ++h)
    CHECK(f1.var_path[static_cast<std::size_t>(h - 1)] == doctest::Approx(oracle::ar1_fan_var(0.8, 0.3, h)).epsilon(1e-12));
}

TEST_CASE("fan with d = 1 accumulates: random walk variance grows linearly") {
  ArimaSpec rw{0, 1, 0, 0, 12, false};
  ArimaParams p;
  p.sigma2 = 0.5;
  const auto f = forecast_fan(rw, p, 10);
  for (int h = 1; h <= 10; ++h) CHECK(f.var_path[static_cast<std::size_t>(h - 1)] == doctest::Approx(0.5 * h));
}

TEST_CASE("published mining and lifestyle AR(2) roots") {
  const auto m = ar_root_moduli(std::vector<double>{1.932, -0.934});
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(1.0347).epsilon(1e-4));
  CHECK(is_stationary(std::vector<double>{1.932, -0.934}));
  const auto l = ar_root_moduli(std::vector<double>{1.896, -0.898});
  CHECK(l[0] > 1.0);
  CHECK_FALSE(is_stationary(std::vector<double>{1.0}));
  CHECK_FALSE(is_invertible(std::vector<double>{-1.2}));
}

TEST_CASE("fit recovers AR(2) + seasonal MA(1) within 3 standard errors") {
  ArmaParams truth{{0.6, -0.3}, {}, 0.4};
  const Series e = simulate_arma(truth, 12, 1.0, 2000, 99);
  Series y(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) y[t] = 2.0 + e[t];
  ArimaSpec spec{2, 0, 0, 1, 12, true};
  const auto f = fit(spec, y, no_exog(y.size()));
  CHECK(f.converged);
  CHECK(check_fit(f).empty());
  CHECK(std::abs(f.params.arma.phi[0] - 0.6) < 3 * f.se_of("phi1"));
  CHECK(std::abs(f.params.arma.phi[1] + 0.3) < 3 * f.se_of("phi2"));
  CHECK(std::abs(f.params.arma.seasonal_theta - 0.4) < 3 * f.se_of("sma12"));
  CHECK(std::abs(f.params.intercept - 2.0) < 3 * f.se_of("intercept"));
  CHECK(f.aicc == aicc(f.loglik, f.n_params, f.nobs));
  CHECK(f.n_params == 5);
}

TEST_CASE("noise regressed on an unrelated random walk is insignificant") {
  int big = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Series y = gaussian(200, 500 + rep);
    const Series u = oracle::cumsum(gaussian(200, 900 + rep));
    Matrix X(200, 1);
    for (int t = 0; t < 200; ++t) X(t, 0) = u[static_cast<std::size_t>(t)];
    const auto f = fit(ArimaSpec{}, y, X, {1, 100, 1e-8, true, {}});
    if (std::abs(f.params.beta[0] / f.se_of("x1")) >= 3) ++big;
  }
  CHECK(big <= 1);
}

TEST_CASE("refit on a noiseless regression path reproduces coefficients") {
  Matrix X(120, 2);
  Series y(120);
  for (int t = 0; t < 120; ++t) {
    X(t, 0) = 0.01 * t;
    X(t, 1) = std::sin(0.3 * t);
    y[static_cast<std::size_t>(t)] = 0.5 + 1.3 * X(t, 0) - 0.7 * X(t, 1) + 1e-7 * std::cos(1.1 * t);
  }
  const auto f = fit(ArimaSpec{}, y, X, {1, 100, 1e-10, false, {}});
  CHECK(f.params.intercept == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(f.params.beta[0] == doctest::Approx(1.3).epsilon(1e-4));
  CHECK(f.params.beta[1] == doctest::Approx(-0.7).epsilon(1e-4));
}

TEST_CASE("short series and bad orders are rejected") {
  CHECK_THROWS_AS(fit(ArimaSpec{2, 0, 1, 1, 12, true}, gaussian(12, 1), no_exog(12)), FitError);
  CHECK_THROWS_AS((ArimaSpec{4, 0, 0, 0, 12, true}.validate()), ValidationError);
  CHECK_THROWS_AS((ArimaSpec{0, 2, 0, 0, 12, true}.validate()), ValidationError);
  ArimaParams p;
  p.arma.phi = {1.2};
  CHECK_THROWS_AS(loglik(ArimaSpec{1, 0, 0, 0, 12, true}, p, gaussian(30, 1), no_exog(30)), ValidationError);
}

TEST_CASE("selection rules") {
  SUBCASE("white noise selects (0,0,0)") {
    const Series y = gaussian(300, 31);
    OrderGrid g;
    const auto s = select_order(y, no_exog(y.size()), g, {});
    CHECK(s.spec.p == 0);
    CHECK(s.spec.q == 0);
    CHECK(s.spec.d == 0);
    CHECK(s.candidates.size() == 24);
  }
  SUBCASE("ARMA(2,1) lands on (2,0,1) or a simpler near-equivalent") {
    ArmaParams truth{{1.3, -0.6}, {0.4}, 0.0};
    const Series y = simulate_arma(truth, 12, 1.0, 360, 8);
    const auto s = select_order(y, no_exog(y.size()), OrderGrid{}, {});
    double best = 1e300, chosen = 0;
    for (const auto& c : s.candidates)
      if (c.ok && c.spec.d == 0) best = std::min(best, c.aicc);
    for (const auto& c : s.candidates)
      if (c.spec == s.spec) chosen = c.aicc;
    CHECK(chosen - best <= 2.0);
    CHECK(s.spec.p + s.spec.q <= 3);
  }
}

TEST_CASE("parsimony band and tie-breaks") {
  auto cand = [](int p, int d, int q, double a) {
    CandidateResult c;
    c.spec = ArimaSpec{p, d, q, 0, 12, true};
    c.aicc = a;
    c.ok = true;
    return c;
  };
  SelectionRules r;
  // (2,0,1) best, (1,0,1) within 2 -> simpler wins
  CHECK(choose_order({cand(2, 0, 1, -100), cand(1, 0, 1, -98.5), cand(0, 0, 0, -50)}, r) == ArimaSpec{1, 0, 1, 0, 12, true});
  // equal p+q within the band -> smaller q
  CHECK(choose_order({cand(1, 0, 1, -100), cand(2, 0, 0, -99), cand(0, 0, 2, -99.5)}, r) == ArimaSpec{2, 0, 0, 0, 12, true});
  // outside the band -> best AICc
  CHECK(choose_order({cand(2, 0, 1, -100), cand(1, 0, 0, -97)}, r) == ArimaSpec{2, 0, 1, 0, 12, true});
  // d = 1 needs the margin
  CHECK(choose_order({cand(1, 0, 0, -100), cand(1, 1, 0, -105)}, r).d == 0);
  CHECK(choose_order({cand(1, 0, 0, -100), cand(1, 1, 0, -111)}, r).d == 1);
  // failed candidates are ignored
  auto bad = cand(0, 0, 0, -1000);
  bad.ok = false;
  CHECK(choose_order({bad, cand(1, 0, 0, -10)}, r) == ArimaSpec{1, 0, 0, 0, 12, true});
  // boundary fits are skipped, unless nothing else converged
  auto edge = cand(3, 0, 2, -120);
  edge.boundary = true;
  CHECK(choose_order({edge, cand(0, 0, 0, -100)}, r) == ArimaSpec{0, 0, 0, 0, 12, true});
  CHECK(choose_order({edge, bad}, r) == ArimaSpec{3, 0, 2, 0, 12, true});
  r.exclude_boundary = false;
  CHECK(choose_order({edge, cand(0, 0, 0, -100)}, r) == ArimaSpec{3, 0, 2, 0, 12, true});
  // without parsimony, plain minimum
  r.parsimony = false;
  CHECK(choose_order({cand(2, 0, 1, -100), cand(1, 0, 1, -98.5)}, r) == ArimaSpec{2, 0, 1, 0, 12, true});
}
