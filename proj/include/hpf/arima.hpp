#pragma once

// Regression with (seasonal) ARMA errors in state-space form.
//
//   y_t = c + x_t' beta + e_t,
//   phi(B) e_t = theta(B) (1 + Theta B^s) u_t,   u_t ~ N(0, sigma2)
//
// with optional first differencing (d = 1) of y and x before filtering. The
// likelihood is exact: the ARMA state starts from its stationary covariance and
// the Kalman filter produces one-step prediction errors and their variances.

#include <optional>
#include <string>
#include <vector>

#include "hpf/common.hpp"

namespace hpf::tskit {

struct ArimaSpec {
  int p = 0;
  int d = 0;
  int q = 0;
  int seasonal_q = 0;  // 0 or 1
  int period = 12;
  bool intercept = true;

  void validate() const;
  std::string str() const;  // "(p,d,q)" or "(p,d,q)(0,0,1)[12]"
  friend bool operator==(const ArimaSpec&, const ArimaSpec&) = default;
};

struct ArmaParams {
  std::vector<double> phi;    // AR coefficients, phi(B) = 1 - phi_1 B - ...
  std::vector<double> theta;  // MA coefficients, theta(B) = 1 + theta_1 B + ...
  double seasonal_theta = 0.0;
};

struct ArimaParams {
  ArmaParams arma;
  double intercept = 0.0;
  std::vector<double> beta;  // exogenous-regressor coefficients
  double sigma2 = 1.0;
};

/// Estimated model. `std_errors` follows the order phi, theta, Theta,
/// intercept, beta (entries present only for estimated terms) and comes from
/// the observed information of the sigma2-profiled likelihood.
struct ArimaFit {
  ArimaSpec spec;
  ArimaParams params;
  std::vector<double> std_errors;
  std::vector<std::string> param_names;
  double loglik = 0.0;
  double aicc = 0.0;
  int nobs = 0;      // observations entering the likelihood (after differencing)
  int n_params = 0;  // ARMA + seasonal + exog + intercept + variance
  Series residuals;  // one-step prediction errors, unstandardized
  bool converged = false;
  bool boundary = false;
  int evaluations = 0;
  std::string message;

  // Filter state at the end of the sample, used for forecasting.
  Vector final_state;
  Matrix final_cov;  // scaled by sigma2
  double last_level = 0.0;  // last observed y when d = 1
  std::vector<double> last_exog;

  double se_of(const std::string& name) const;
};

/// Expanded MA polynomial theta(B)(1 + Theta B^s) as coefficients 1..qf.
std::vector<double> expand_ma(const ArmaParams& arma, int period);

bool is_stationary(std::span<const double> phi);
bool is_invertible(std::span<const double> theta);

/// Moduli of the roots of 1 - phi_1 z - ... - phi_p z^p.
std::vector<double> ar_root_moduli(std::span<const double> phi);

/// Checks the ArimaFit invariants (stationary AR, invertible MA, positive
/// variance, AICc consistent with loglik). Returns a list of violations.
std::vector<std::string> check_fit(const ArimaFit& fit);

/// Exact Gaussian log-likelihood at the given parameters. `exog` holds one
/// column per regressor and must have y.size() rows (or zero columns).
double loglik(const ArimaSpec& spec, const ArimaParams& params, std::span<const double> y,
              const Matrix& exog);

struct FitOptions {
  int starts = 3;
  int max_iterations = 200;
  double tolerance = 1e-8;
  bool compute_std_errors = true;
  std::optional<ArmaParams> warm_start;
};

ArimaFit fit(const ArimaSpec& spec, std::span<const double> y, const Matrix& exog,
             const FitOptions& options = {});

/// AICc = -2 loglik + 2k + 2k(k+1)/(n-k-1).
double aicc(double loglik, int k, int n);
double aicc(const ArimaFit& fit);

struct ForecastFan {
  int horizon = 0;
  Series mean_path;
  Series var_path;

  double sd_at(int h) const;  // 1-based horizon
};

/// h-step forecasts from the end of the fitted sample. `future_exog` has h rows;
/// when absent the last observed regressor row is held fixed.
ForecastFan forecast_fan(const ArimaFit& fit, int h, const std::optional<Matrix>& future_exog = {});

/// Fan for a model with known parameters and a fully observed past.
ForecastFan forecast_fan(const ArimaSpec& spec, const ArimaParams& params, int h);

/// Simulates n observations of the ARMA error process (no regression part).
Series simulate_arma(const ArmaParams& arma, int period, double sigma2, int n,
                     std::uint64_t seed, int burn_in = 500);

struct SelectionRules {
  bool parsimony = true;        // pick minimal p+q within delta_aicc of the best
  double delta_aicc = 2.0;
  bool prefer_d0 = true;        // keep d = 0 unless d = 1 wins by d1_margin
  double d1_margin = 10.0;
  bool exclude_boundary = true;  // skip fits that ended on the stationarity/invertibility boundary
};

struct OrderGrid {
  std::vector<int> p{0, 1, 2, 3};
  std::vector<int> d{0, 1};
  std::vector<int> q{0, 1, 2};
  int seasonal_q = 0;
  bool intercept = true;
};

struct CandidateResult {
  ArimaSpec spec;
  double aicc = 0.0;
  double loglik = 0.0;
  bool ok = false;
  bool boundary = false;
  std::string message;
};

struct Selection {
  ArimaSpec spec;
  std::vector<CandidateResult> candidates;
};

/// Grid search by AICc with the parsimony and d-preference rules. Failed fits
/// are excluded and reported in `candidates`. Boundary fits are excluded too
/// when `rules.exclude_boundary` is set, unless nothing else is left.
Selection select_order(std::span<const double> y, const Matrix& exog, const OrderGrid& grid,
                       const SelectionRules& rules, const FitOptions& options = {});

/// The selection rules alone, applied to already-evaluated candidates.
ArimaSpec choose_order(const std::vector<CandidateResult>& candidates, const SelectionRules& rules);

}  // namespace hpf::tskit
