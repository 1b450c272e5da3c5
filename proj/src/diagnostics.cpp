#include "hpf/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace hpf::tskit {

LjungBoxResult ljung_box(std::span<const double> residuals, int lag) {
  const auto n = static_cast<int>(residuals.size());
  if (lag < 1) throw ValidationError("Ljung-Box lag must be positive");
  if (n <= lag) throw ValidationError("series too short for Ljung-Box lag " + std::to_string(lag));
  const double m = mean(residuals);
  double c0 = 0.0;
  for (double r : residuals) c0 += (r - m) * (r - m);
  if (!(c0 > 0)) throw ValidationError("Ljung-Box on a constant series");
  double q = 0.0;
  for (int k = 1; k <= lag; ++k) {
    double ck = 0.0;
    for (int t = k; t < n; ++t) ck += (residuals[t] - m) * (residuals[t - k] - m);
    const double rho = ck / c0;
    q += rho * rho / (n - k);
  }
  q *= static_cast<double>(n) * (n + 2.0);
  LjungBoxResult out;
  out.lag = lag;
  out.statistic = q;
  out.p_value = q > 0 ? boost::math::gamma_q(0.5 * lag, 0.5 * q) : 1.0;
  return out;
}

std::vector<LjungBoxResult> ljung_box(std::span<const double> residuals, const std::vector<int>& lags) {
  std::vector<LjungBoxResult> out;
  for (int h : lags) out.push_back(ljung_box(residuals, h));
  return out;
}

double adf_pvalue(double stat) {
  // Constant-only, one integrated series.
  constexpr double tau_max = 2.74, tau_min = -18.83, tau_star = -1.61;
  constexpr double small[3] = {2.1659, 1.4412, 0.038269};
  constexpr double large[4] = {1.7339, 0.93202, -0.12745, -0.010368};
  if (stat > tau_max) return 1.0;
  if (stat < tau_min) return 0.0;
  double z = 0.0;
  if (stat <= tau_star) {
    z = small[0] + stat * (small[1] + stat * small[2]);
  } else {
    z = large[0] + stat * (large[1] + stat * (large[2] + stat * large[3]));
  }
  return boost::math::cdf(boost::math::normal_distribution<double>(), z);
}

namespace {

struct OlsOut {
  Vector coef;
  Vector se;
  double ssr = 0.0;
};

OlsOut ols(const Matrix& X, const Vector& y) {
  OlsOut o;
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  o.coef = qr.solve(y);
  const Vector e = y - X * o.coef;
  o.ssr = e.squaredNorm();
  const double s2 = o.ssr / static_cast<double>(X.rows() - X.cols());
  const Matrix XtX = X.transpose() * X;
  const Matrix inv = XtX.ldlt().solve(Matrix::Identity(X.cols(), X.cols()));
  o.se = (s2 * inv.diagonal()).cwiseSqrt();
  return o;
}

// Design for lag order k on the last `nobs` differences: columns
// [y_{t-1}, dy_{t-1}, ..., dy_{t-k}, 1].
void adf_design(std::span<const double> y, int k, int nobs, Matrix& X, Vector& dy) {
  const auto n = static_cast<int>(y.size());
  const int nd = n - 1;
  X.resize(nobs, k + 2);
  dy.resize(nobs);
  for (int i = 0; i < nobs; ++i) {
    const int t = nd - nobs + i;  // index into the difference series
    dy[i] = y[t + 1] - y[t];
    X(i, 0) = y[t];
    for (int j = 1; j <= k; ++j) X(i, j) = y[t + 1 - j] - y[t - j];
    X(i, k + 1) = 1.0;
  }
}

}  // namespace

AdfResult adf_test(std::span<const double> y, int max_lags) {
  const auto n = static_cast<int>(y.size());
  if (max_lags < 0) throw ValidationError("max_lags must be nonnegative");
  if (n <= 3 * max_lags || n < max_lags + 8) throw ValidationError("series too short for ADF test");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("ADF input contains non-finite values");

  // Lag selection on the common sample that allows max_lags.
  const int common = n - 1 - max_lags;
  int best_lag = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  Matrix X;
  Vector dy;
  for (int k = 0; k <= max_lags; ++k) {
    adf_design(y, k, common, X, dy);
    const OlsOut o = ols(X, dy);
    const double llf = -0.5 * common * (std::log(2 * std::numbers::pi) + std::log(o.ssr / common) + 1.0);
    const double aic = -2.0 * llf + 2.0 * static_cast<double>(X.cols());
    if (aic < best_aic) {
      best_aic = aic;
      best_lag = k;
    }
  }

  const int nobs = n - 1 - best_lag;
  adf_design(y, best_lag, nobs, X, dy);
  const OlsOut o = ols(X, dy);
  AdfResult r;
  r.used_lag = best_lag;
  r.nobs = nobs;
  r.statistic = o.coef[0] / o.se[0];
  if (!std::isfinite(r.statistic)) throw ValidationError("ADF regression is degenerate");
  r.p_value = adf_pvalue(r.statistic);
  return r;
}

}  // namespace hpf::tskit
