#include "hpf/factors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hpf::factors {

Matrix FactorSet::exog(bool with_lifestyle) const {
  const auto T = static_cast<Eigen::Index>(market.size());
  Matrix X(T, with_lifestyle ? 3 : 2);
  for (Eigen::Index t = 0; t < T; ++t) {
    X(t, 0) = market[t];
    X(t, 1) = mining[t];
    if (with_lifestyle) X(t, 2) = lifestyle[t];
  }
  return X;
}

FactorSet FactorSet::head(std::size_t n) const {
  if (n > size()) throw ValidationError("factor window longer than the sample");
  FactorSet f = *this;
  f.months.resize(std::min(n, months.size()));
  f.market.resize(n);
  f.mining.resize(n);
  f.lifestyle.resize(n);
  return f;
}

double trend_adjust_alpha(std::span<const double> mu_a, std::span<const double> mu_b, std::span<const double> U) {
  const double cb = covariance(mu_b, U);
  if (cb == 0.0 || !std::isfinite(cb)) throw ValidationError("trend adjustment undefined: cov(mu_b, U) = 0");
  return covariance(mu_a, U) / cb;
}

Series spread(std::span<const double> mu_a, std::span<const double> mu_b, double alpha) {
  if (mu_a.size() != mu_b.size()) throw ValidationError("spread inputs differ in length");
  Series s(mu_a.size());
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = mu_a[t] - alpha * mu_b[t];
  return demeaned(s);
}

Series basket_mean(const Matrix& panel, const std::vector<int>& columns, const std::vector<double>& weights) {
  if (columns.empty()) throw ValidationError("empty basket");
  Vector acc = Vector::Zero(panel.rows());
  double wsum = 0.0;
  for (int c : columns) {
    if (c < 0 || c >= panel.cols()) throw ValidationError("basket column out of range");
    const double w = weights.empty() ? 1.0 : weights.at(static_cast<std::size_t>(c));
    acc += w * panel.col(c);
    wsum += w;
  }
  if (!(wsum > 0)) throw ValidationError("basket has zero total weight");
  acc /= wsum;
  return Series(acc.data(), acc.data() + acc.size());
}

Series lifestyle_spread(const Matrix& panel, const std::vector<int>& top, const std::vector<int>& bottom,
                        const std::vector<double>& weights, double alpha) {
  return spread(basket_mean(panel, top, weights), basket_mean(panel, bottom, weights), alpha);
}

Baskets select_baskets(std::span<const double> loadings, int k) {
  const int R = static_cast<int>(loadings.size());
  if (k < 1 || 2 * k > R) throw ValidationError("basket size must satisfy 1 <= k <= R/2");
  std::vector<int> order(static_cast<std::size_t>(R));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return loadings[a] > loadings[b]; });
  Baskets b;
  b.top.assign(order.begin(), order.begin() + k);
  std::vector<int> rev(order.rbegin(), order.rend());
  std::stable_sort(rev.begin(), rev.end(), [&](int a, int b2) { return loadings[a] < loadings[b2]; });
  b.bottom.assign(rev.begin(), rev.begin() + k);
  std::sort(b.top.begin(), b.top.end());
  std::sort(b.bottom.begin(), b.bottom.end());
  return b;
}

Matrix factor_correlations(const FactorSet& fs) {
  const std::span<const double> s[3] = {fs.market, fs.mining, fs.lifestyle};
  Matrix C(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) C(i, j) = i == j ? 1.0 : correlation(s[i], s[j]);
  return C;
}

}  // namespace hpf::factors
