#include <doctest.h>

#include <random>

#include "hpf/factors.hpp"
#include "hpf/spectral.hpp"
#include "hpf/synth.hpp"

using namespace hpf;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("rank-1 panel") {
  Vector s(50);
  for (int t = 0; t < 50; ++t) s[t] = std::sin(0.2 * t) + 0.01 * t;
  Matrix P(50, 4);
  const double k[4] = {1.0, -2.0, 0.5, 3.0};
  for (int r = 0; r < 4; ++r) P.col(r) = k[r] * s;
  const auto res = spectral::fit_pca(P, 2);
  CHECK(res.explained[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(res.explained[1]) < 1e-12);
  const Series z1 = spectral::component_from_panel(res, P, 1);
  Series sc(s.data(), s.data() + 50);
  CHECK(std::abs(correlation(z1, sc)) == doctest::Approx(1.0).epsilon(1e-10));
  const Series z2 = spectral::component_from_panel(res, P, 2);
  double mx = 0;
  for (double v : z2) mx = std::max(mx, std::abs(v));
  CHECK(mx < 1e-8);
}

TEST_CASE("full rank reconstruction and truncation error") {
  const Matrix P = random_matrix(12, 5, 7);
  const auto res = spectral::fit_pca(P, 5);
  CHECK((spectral::reconstruct(res, 5) - P).cwiseAbs().maxCoeff() < 1e-8);
  // q_used = 0 gives column means
  const Matrix m0 = spectral::reconstruct(res, 0);
  for (int r = 0; r < 5; ++r) CHECK(m0(3, r) == doctest::Approx(P.col(r).mean()).epsilon(1e-12));
  // Frobenius error vs eigenvalues of the centered cross-product
  const Matrix C = P.rowwise() - P.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(C.transpose() * C);
  const Vector ev = es.eigenvalues();  // ascending
  for (int q = 0; q <= 5; ++q) {
    double discarded = 0;
    for (int i = 0; i < 5 - q; ++i) discarded += std::max(0.0, ev[i]);
    const double te = spectral::truncation_error(res, q);
    CHECK(te * te == doctest::Approx(discarded).epsilon(1e-9).scale(1.0));
    CHECK((spectral::reconstruct(res, q) - P).norm() == doctest::Approx(te).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("component identity on a random panel") {
  const Matrix P = random_matrix(30, 6, 11);
  const auto res = spectral::fit_pca(P, 3);
  for (int k = 1; k <= 3; ++k) {
    const Series z = spectral::component_from_panel(res, P, k);
    const Matrix C = P.rowwise() - P.colwise().mean();
    const Vector direct = C * res.loadings.row(k - 1).transpose();
    double err = 0;
    for (int t = 0; t < 30; ++t) err = std::max(err, std::abs(z[static_cast<std::size_t>(t)] - direct[t]));
    CHECK(err < 1e-8);
    CHECK((res.components.col(k - 1) - direct).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK((res.loadings * res.loadings.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("three-factor panel: component span recovers the factor span") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  const int T = 200, R = 40;
  Matrix F(T, 3);
  for (int t = 0; t < T; ++t) {
    F(t, 0) = (t ? F(t - 1, 0) : 0) + n(rng);
    F(t, 1) = std::sin(0.05 * t) * 3 + 0.2 * n(rng);
    F(t, 2) = std::cos(0.13 * t) * 2 + 0.2 * n(rng);
  }
  const Matrix A = random_matrix(3, R, 10);
  Matrix P = F * A;
  for (int i = 0; i < P.size(); ++i) P.data()[i] += 0.01 * n(rng);
  const auto res = spectral::fit_pca(P, 3);
  // canonical correlations between span(Z) and span(F) after centering
  auto orth = [](Matrix X) {
    X = X.rowwise() - X.colwise().mean();
    Eigen::HouseholderQR<Matrix> qr(X);
    return Matrix(qr.householderQ() * Matrix::Identity(X.rows(), X.cols()));
  };
  const Matrix Qz = orth(res.components), Qf = orth(F);
  Eigen::JacobiSVD<Matrix> svd(Qz.transpose() * Qf);
  CHECK(svd.singularValues().minCoeff() > 0.99);
}

TEST_CASE("sign rules orient the components") {
  Matrix P = random_matrix(40, 6, 3);
  for (int t = 0; t < 40; ++t) P.row(t).array() += 0.1 * t;
  spectral::SignRules rules;
  Series U(40);
  for (int t = 0; t < 40; ++t) U[static_cast<std::size_t>(t)] = 0.1 * t;
  rules.market = U;
  rules.mining_anchor = {0};
  rules.lifestyle_anchor = {1};
  const auto res = spectral::fit_pca(P, 3, rules);
  Series z1(res.components.col(0).data(), res.components.col(0).data() + 40);
  CHECK(correlation(z1, U) > 0);
  CHECK(res.loadings(1, 0) > 0);
  CHECK(res.loadings(2, 1) > 0);
}

TEST_CASE("trend adjustment alpha") {
  Series U(60), a(60), b(60);
  for (int t = 0; t < 60; ++t) {
    U[t] = 0.01 * t + 0.05 * std::sin(t);
    a[t] = 2 * U[t];
    b[t] = U[t];
  }
  CHECK(factors::trend_adjust_alpha(a, b, U) == doctest::Approx(2.0));
  CHECK(factors::trend_adjust_alpha(b, b, U) == doctest::Approx(1.0));
  const Series z = factors::spread(b, b, 1.0);
  for (double v : z) CHECK(v == doctest::Approx(0.0));
  const Series d = factors::spread(a, b, 0.0);
  CHECK(mean(d) == doctest::Approx(0.0).scale(1.0));
  CHECK(d[5] - d[3] == doctest::Approx(a[5] - a[3]));
  Series zero(60, 0.0);
  CHECK_THROWS_AS(factors::trend_adjust_alpha(a, zero, U), ValidationError);
}

TEST_CASE("lifestyle spread reductions") {
  Matrix P = random_matrix(30, 4, 2);
  const std::vector<double> w{1, 2, 3, 4};
  const Series z = factors::lifestyle_spread(P, {0, 1}, {0, 1}, w, 1.0);
  for (double v : z) CHECK(std::abs(v) < 1e-12);
  Series c2(P.col(2).data(), P.col(2).data() + 30), c3(P.col(3).data(), P.col(3).data() + 30);
  const Series single = factors::lifestyle_spread(P, {2}, {3}, w, 0.7);
  const Series ref = factors::spread(c2, c3, 0.7);
  for (int t = 0; t < 30; ++t) CHECK(single[t] == doctest::Approx(ref[t]).epsilon(1e-12));
  const Series bm = factors::basket_mean(P, {1, 3}, w);
  CHECK(bm[4] == doctest::Approx((2 * P(4, 1) + 4 * P(4, 3)) / 6));
}

TEST_CASE("basket selection by loading") {
  const std::vector<double> l{0.1, -0.4, 0.9, 0.0, -0.2, 0.5};
  const auto b = factors::select_baskets(l, 2);
  CHECK(b.top == std::vector<int>{2, 5});
  CHECK(b.bottom == std::vector<int>{1, 4});
  CHECK_THROWS_AS(factors::select_baskets(l, 4), ValidationError);
}

TEST_CASE("factor correlations") {
  factors::FactorSet fs;
  for (int t = 0; t < 20; ++t) {
    fs.months.push_back(Month{2000, 1}.plus(t));
    fs.market.push_back(std::sin(t * 0.7));
    fs.mining.push_back(std::sin(t * 0.7));
    fs.lifestyle.push_back(std::sin(t * 0.7));
  }
  const Matrix C = factors::factor_correlations(fs);
  CHECK((C - Matrix::Ones(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  synth::WorldConfig cfg;
  const auto f = synth::simulate_factors(cfg);
  const Matrix D = factors::factor_correlations(f);
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::abs(D(i, j)) <= 0.3);
}
