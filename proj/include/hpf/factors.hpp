#pragma once

#include <string>
#include <vector>

#include "hpf/common.hpp"

namespace hpf::factors {

struct FactorSet {
  std::vector<Month> months;
  Series market;     // U
  Series mining;     // demeaned Perth - alpha * Sydney
  Series lifestyle;  // demeaned top basket - alpha * bottom basket
  double alpha_ps = 1.0;
  double alpha_l = 1.0;
  std::vector<std::string> top;
  std::vector<std::string> bottom;

  std::size_t size() const { return market.size(); }
  /// T x 3 matrix [U, mining, lifestyle] (or the first two columns).
  Matrix exog(bool with_lifestyle = true) const;
  FactorSet head(std::size_t n) const;  // first n months
};

/// cov(mu_a, U) / cov(mu_b, U).
double trend_adjust_alpha(std::span<const double> mu_a, std::span<const double> mu_b, std::span<const double> U);

/// mu_a - alpha mu_b, demeaned.
Series spread(std::span<const double> mu_a, std::span<const double> mu_b, double alpha);

/// Weighted mean across the given panel columns.
Series basket_mean(const Matrix& panel, const std::vector<int>& columns, const std::vector<double>& weights);

/// Weighted top-basket mean minus alpha times the bottom-basket mean, demeaned.
Series lifestyle_spread(const Matrix& panel, const std::vector<int>& top, const std::vector<int>& bottom,
                        const std::vector<double>& weights, double alpha);

/// Columns with the k largest and k smallest loadings (ties by column order).
struct Baskets {
  std::vector<int> top;
  std::vector<int> bottom;
};
Baskets select_baskets(std::span<const double> loadings, int k);

/// 3 x 3 correlation matrix of (U, mining, lifestyle).
Matrix factor_correlations(const FactorSet& fs);

}  // namespace hpf::factors
