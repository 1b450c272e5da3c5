#pragma once

#include <span>
#include <vector>

#include "hpf/common.hpp"

namespace hpf::tskit {

struct LjungBoxResult {
  int lag = 0;
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Portmanteau test on demeaned residuals; chi-square reference with `lag`
/// degrees of freedom (no adjustment for fitted ARMA terms).
LjungBoxResult ljung_box(std::span<const double> residuals, int lag);
std::vector<LjungBoxResult> ljung_box(std::span<const double> residuals, const std::vector<int>& lags);

struct AdfResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int used_lag = 0;
  int nobs = 0;  // observations in the final regression
};

/// Augmented Dickey-Fuller test with a constant. The lag order is chosen by AIC
/// over 0..max_lags on a common sample, then the regression is refit on the
/// longest sample available for that lag.
AdfResult adf_test(std::span<const double> y, int max_lags);

/// MacKinnon response-surface p-value for the constant-only ADF statistic.
double adf_pvalue(double statistic);

}  // namespace hpf::tskit
