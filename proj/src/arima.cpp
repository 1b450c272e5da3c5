#include "hpf/arima.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hpf/optimize.hpp"

namespace hpf::tskit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kBoundaryRoot = 1e-3;  // root modulus within this of 1 counts as on the boundary

// ---------------------------------------------------------------------------
// Polynomial helpers

std::vector<double> pacf_to_coefs(std::span<const double> pacf) {
  // Durbin-Levinson recursion; |pacf| < 1 gives a stationary AR polynomial.
  const std::size_t p = pacf.size();
  std::vector<double> phi(p, 0.0), prev(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    prev = phi;
    phi[k] = pacf[k];
    for (std::size_t j = 0; j < k; ++j) phi[j] = prev[j] - pacf[k] * prev[k - 1 - j];
  }
  return phi;
}

std::optional<std::vector<double>> coefs_to_pacf(std::span<const double> coefs) {
  // Step-down recursion; fails when the polynomial is not stationary.
  std::vector<double> a(coefs.begin(), coefs.end());
  const std::size_t p = a.size();
  std::vector<double> pacf(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    const double rk = a[k];
    if (!(std::abs(rk) < 1.0)) return std::nullopt;
    pacf[k] = rk;
    std::vector<double> next(k, 0.0);
    const double denom = 1.0 - rk * rk;
    for (std::size_t j = 0; j < k; ++j) next[j] = (a[j] + rk * a[k - 1 - j]) / denom;
    a = std::move(next);
  }
  return pacf;
}

// ---------------------------------------------------------------------------
// State-space representation (Harvey form) of the ARMA error process.

struct StateModel {
  int r = 1;
  std::vector<double> phi;  // padded to r
  std::vector<double> R;    // (1, theta_1, ..., theta_{r-1})
  Matrix P0;                // stationary covariance for unit innovation variance
};

StateModel make_state_model(const ArmaParams& arma, int period) {
  const auto ma = expand_ma(arma, period);
  StateModel sm;
  sm.r = std::max<int>(static_cast<int>(arma.phi.size()), static_cast<int>(ma.size()) + 1);
  sm.phi.assign(sm.r, 0.0);
  std::copy(arma.phi.begin(), arma.phi.end(), sm.phi.begin());
  sm.R.assign(sm.r, 0.0);
  sm.R[0] = 1.0;
  for (std::size_t j = 0; j < ma.size(); ++j) sm.R[j + 1] = ma[j];

  // Solve P = T P T' + R R' by the doubling algorithm.
  const int r = sm.r;
  Matrix A = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    A(i, 0) = sm.phi[i];
    if (i + 1 < r) A(i, i + 1) = 1.0;
  }
  Eigen::Map<const Vector> Rv(sm.R.data(), r);
  Matrix P = Rv * Rv.transpose();
  for (int it = 0; it < 200; ++it) {
    const Matrix add = A * P * A.transpose();
    P += add;
    if (add.cwiseAbs().maxCoeff() <= 1e-16 * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
    A = A * A;
  }
  sm.P0 = 0.5 * (P + P.transpose());
  return sm;
}

// Applies P <- T P T' + R R' using the companion structure of T.
void predict_cov(const StateModel& sm, const Matrix& Pf, Matrix& out) {
  const int r = sm.r;
  Matrix B(r, r);
  for (int i = 0; i < r; ++i)
    for (int c = 0; c < r; ++c)
      B(i, c) = sm.phi[i] * Pf(0, c) + (i + 1 < r ? Pf(i + 1, c) : 0.0);
  out.resize(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      out(i, j) = sm.phi[j] * B(i, 0) + (j + 1 < r ? B(i, j + 1) : 0.0) + sm.R[i] * sm.R[j];
}

struct FilterOutput {
  Vector F;
  Matrix V;        // n x m innovations
  Matrix a_final;  // filtered state at the last observation, r x m
  Matrix P_final;  // filtered covariance at the last observation
  bool ok = true;
};

// Kalman filter on m data columns simultaneously (unit innovation variance).
// Because the filter is linear with a zero initial mean, the innovations of any
// linear combination of the columns are the same combination of the column
// innovations; this lets the regression coefficients be profiled out by GLS.
FilterOutput run_filter(const StateModel& sm, const Matrix& data) {
  const int r = sm.r;
  const Eigen::Index n = data.rows(), m = data.cols();
  FilterOutput out;
  out.F.resize(n);
  out.V.resize(n, m);
  Matrix a = Matrix::Zero(r, m);
  Matrix af(r, m);
  Matrix P = sm.P0;
  Matrix Pf(r, r), Pn(r, r);
  bool steady = false;
  Vector K(r);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double F = P(0, 0);
    if (!(F > 1e-300) || !std::isfinite(F)) {
      out.ok = false;
      return out;
    }
    out.F[t] = F;
    for (Eigen::Index j = 0; j < m; ++j) out.V(t, j) = data(t, j) - a(0, j);
    K = P.col(0) / F;
    af = a + K * out.V.row(t);
    if (!steady) Pf = P - K * P.row(0);
    for (int i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        a(i, j) = sm.phi[i] * af(0, j) + (i + 1 < r ? af(i + 1, j) : 0.0);
    if (!steady) {
      predict_cov(sm, Pf, Pn);
      const double scale = std::max(1.0, Pn.cwiseAbs().maxCoeff());
      if ((Pn - P).cwiseAbs().maxCoeff() <= 1e-13 * scale) steady = true;
      P = Pn;
    }
  }
  out.a_final = af;
  out.P_final = Pf;
  if (n == 0) {
    out.a_final = Matrix::Zero(r, m);
    out.P_final = sm.P0;
  }
  return out;
}

// Data prepared for likelihood evaluation: the working response and the
// regressor block (intercept column first when present), both differenced d times.
struct Design {
  Vector y;
  Matrix X;  // n x k (may have zero columns)
  int k_exog = 0;
  bool intercept = false;
};

Design make_design(const ArimaSpec& spec, std::span<const double> y, const Matrix& exog) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (exog.cols() > 0 && exog.rows() != n)
    throw ValidationError("exogenous matrix rows do not match series length");
  Design d;
  d.k_exog = static_cast<int>(exog.cols());
  d.intercept = spec.intercept;
  const Eigen::Index off = spec.d;
  const Eigen::Index m = n - off;
  if (m <= 0) throw ValidationError("series too short for differencing");
  d.y.resize(m);
  d.X.resize(m, (spec.intercept ? 1 : 0) + exog.cols());
  for (Eigen::Index t = 0; t < m; ++t) {
    const Eigen::Index s = t + off;
    d.y[t] = spec.d == 1 ? y[s] - y[s - 1] : y[s];
    Eigen::Index c = 0;
    if (spec.intercept) d.X(t, c++) = 1.0;
    for (Eigen::Index j = 0; j < exog.cols(); ++j)
      d.X(t, c++) = spec.d == 1 ? exog(s, j) - exog(s - 1, j) : exog(s, j);
  }
  for (Eigen::Index i = 0; i < d.y.size(); ++i)
    if (!std::isfinite(d.y[i])) throw ValidationError("series contains non-finite values");
  return d;
}

struct Evaluation {
  double loglik = -std::numeric_limits<double>::infinity();
  double sigma2 = 0.0;
  Vector coef;  // intercept + beta in design order
  Vector resid;
  Vector F;
  FilterOutput filter;
};

// Profile likelihood: regression coefficients by GLS, sigma2 by its MLE.
// When `fixed_coef` is given the coefficients are held at those values.
Evaluation evaluate(const StateModel& sm, const Design& d, const Vector* fixed_coef,
                    bool keep_filter) {
  Evaluation ev;
  const Eigen::Index n = d.y.size(), k = d.X.cols();
  Matrix data(n, 1 + k);
  data.col(0) = d.y;
  if (k > 0) data.rightCols(k) = d.X;
  FilterOutput fo = run_filter(sm, data);
  if (!fo.ok) return ev;

  const Vector w = fo.F.cwiseInverse();
  if (fixed_coef) {
    ev.coef = *fixed_coef;
  } else if (k > 0) {
    const Matrix VX = fo.V.rightCols(k);
    const Matrix A = VX.transpose() * w.asDiagonal() * VX;
    const Vector b = VX.transpose() * w.asDiagonal() * fo.V.col(0);
    ev.coef = A.completeOrthogonalDecomposition().solve(b);
  } else {
    ev.coef = Vector();
  }
  ev.resid = fo.V.col(0);
  if (k > 0) ev.resid -= fo.V.rightCols(k) * ev.coef;
  const double S = (ev.resid.array().square() * w.array()).sum();
  const double sumlogF = fo.F.array().log().sum();
  ev.sigma2 = S / static_cast<double>(n);
  if (!(ev.sigma2 > 0) || !std::isfinite(ev.sigma2)) return ev;
  ev.loglik = -0.5 * static_cast<double>(n) * (kLog2Pi + std::log(ev.sigma2) + 1.0) - 0.5 * sumlogF;
  ev.F = std::move(fo.F);
  if (keep_filter) ev.filter = std::move(fo);
  return ev;
}

ArmaParams arma_from_unconstrained(const ArimaSpec& spec, const Vector& x) {
  ArmaParams a;
  std::vector<double> r(spec.p), s(spec.q);
  for (int i = 0; i < spec.p; ++i) r[i] = std::tanh(x[i]);
  for (int i = 0; i < spec.q; ++i) s[i] = std::tanh(x[spec.p + i]);
  a.phi = pacf_to_coefs(r);
  auto m = pacf_to_coefs(s);
  for (auto& v : m) v = -v;
  a.theta = m;
  if (spec.seasonal_q) a.seasonal_theta = std::tanh(x[spec.p + spec.q]);
  return a;
}

std::optional<Vector> unconstrained_from_arma(const ArimaSpec& spec, const ArmaParams& a) {
  Vector x(spec.p + spec.q + spec.seasonal_q);
  auto clip = [](double v) { return std::atanh(std::clamp(v, -0.995, 0.995)); };
  auto pr = coefs_to_pacf(a.phi);
  std::vector<double> neg(a.theta.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -a.theta[i];
  auto ps = coefs_to_pacf(neg);
  if (!pr || !ps || static_cast<int>(a.phi.size()) != spec.p ||
      static_cast<int>(a.theta.size()) != spec.q)
    return std::nullopt;
  for (int i = 0; i < spec.p; ++i) x[i] = clip((*pr)[i]);
  for (int i = 0; i < spec.q; ++i) x[spec.p + i] = clip((*ps)[i]);
  if (spec.seasonal_q) x[spec.p + spec.q] = clip(a.seasonal_theta);
  return x;
}

// OLS with a least-squares solver that tolerates rank deficiency.
Vector ols(const Matrix& X, const Vector& y) {
  return X.completeOrthogonalDecomposition().solve(y);
}

// Hannan-Rissanen style starting values from a long autoregression.
std::optional<ArmaParams> hannan_rissanen(const ArimaSpec& spec, const Design& d) {
  const Eigen::Index n = d.y.size();
  Vector w = d.y;
  if (d.X.cols() > 0) w -= d.X * ols(d.X, d.y);
  const int season = spec.seasonal_q ? spec.period : 0;
  const int longp = static_cast<int>(std::min<Eigen::Index>(std::max(spec.p + spec.q, season) + 8, n / 4));
  if (longp < 1 || n - longp < 20) return std::nullopt;
  Matrix L(n - longp, longp);
  for (Eigen::Index t = longp; t < n; ++t)
    for (int j = 0; j < longp; ++j) L(t - longp, j) = w[t - 1 - j];
  const Vector ar = ols(L, w.tail(n - longp));
  Vector u = Vector::Zero(n);
  u.tail(n - longp) = w.tail(n - longp) - L * ar;

  const int lagmax = std::max({spec.p, spec.q, season});
  const Eigen::Index start = longp + lagmax;
  const int ncol = spec.p + spec.q + spec.seasonal_q;
  if (ncol == 0) return ArmaParams{};
  if (n - start < ncol + 10) return std::nullopt;
  Matrix Z(n - start, ncol);
  for (Eigen::Index t = start; t < n; ++t) {
    int c = 0;
    for (int i = 1; i <= spec.p; ++i) Z(t - start, c++) = w[t - i];
    for (int j = 1; j <= spec.q; ++j) Z(t - start, c++) = u[t - j];
    if (spec.seasonal_q) Z(t - start, c++) = u[t - spec.period];
  }
  const Vector b = ols(Z, w.tail(n - start));
  ArmaParams a;
  for (int i = 0; i < spec.p; ++i) a.phi.push_back(b[i]);
  for (int j = 0; j < spec.q; ++j) a.theta.push_back(b[spec.p + j]);
  if (spec.seasonal_q) a.seasonal_theta = std::clamp(b[spec.p + spec.q], -0.9, 0.9);
  // Pull the estimate into the admissible region if needed.
  for (int shrink = 0; shrink < 30; ++shrink) {
    if (is_stationary(a.phi) && is_invertible(a.theta)) return a;
    double f = 0.9;
    for (auto& v : a.phi) {
      v *= f;
      f *= 0.9;
    }
    f = 0.9;
    for (auto& v : a.theta) {
      v *= f;
      f *= 0.9;
    }
  }
  return std::nullopt;
}

std::vector<std::string> param_names(const ArimaSpec& spec, int k_exog) {
  std::vector<std::string> names;
  for (int i = 1; i <= spec.p; ++i) names.push_back("phi" + std::to_string(i));
  for (int j = 1; j <= spec.q; ++j) names.push_back("theta" + std::to_string(j));
  if (spec.seasonal_q) names.push_back("sma" + std::to_string(spec.period));
  if (spec.intercept) names.push_back("intercept");
  for (int j = 1; j <= k_exog; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------

void ArimaSpec::validate() const {
  if (p < 0 || p > 3) throw ValidationError("AR order must be in 0..3");
  if (q < 0 || q > 2) throw ValidationError("MA order must be in 0..2");
  if (d < 0 || d > 1) throw ValidationError("differencing order must be 0 or 1");
  if (seasonal_q < 0 || seasonal_q > 1) throw ValidationError("seasonal MA order must be 0 or 1");
  if (seasonal_q && period < 2) throw ValidationError("seasonal period must be >= 2");
}

std::string ArimaSpec::str() const {
  std::ostringstream ss;
  ss << "(" << p << "," << d << "," << q << ")";
  if (seasonal_q) ss << "(0,0," << seasonal_q << ")[" << period << "]";
  return ss.str();
}

double ArimaFit::se_of(const std::string& name) const {
  for (std::size_t i = 0; i < param_names.size(); ++i)
    if (param_names[i] == name && i < std_errors.size()) return std_errors[i];
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> expand_ma(const ArmaParams& arma, int period) {
  std::vector<double> ma(arma.theta);
  if (arma.seasonal_theta != 0.0) {
    const std::size_t qf = std::max<std::size_t>(ma.size(), 0) + static_cast<std::size_t>(period);
    std::vector<double> full(qf, 0.0);
    for (std::size_t j = 0; j < ma.size(); ++j) full[j] = ma[j];
    full[period - 1] += arma.seasonal_theta;
    for (std::size_t j = 0; j < ma.size(); ++j) full[period + j] += arma.seasonal_theta * ma[j];
    ma = std::move(full);
  }
  return ma;
}

std::vector<double> ar_root_moduli(std::span<const double> phi) {
  std::size_t p = phi.size();
  while (p > 0 && phi[p - 1] == 0.0) --p;
  if (p == 0) return {};
  // Companion matrix of x^p - phi_1 x^{p-1} - ... - phi_p; its eigenvalues are
  // the reciprocals of the roots of 1 - phi_1 z - ... - phi_p z^p.
  Matrix C = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) C(0, static_cast<Eigen::Index>(i)) = phi[i];
  for (std::size_t i = 1; i < p; ++i) C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  Eigen::EigenSolver<Matrix> es(C, false);
  std::vector<double> mod;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = std::abs(es.eigenvalues()[i]);
    mod.push_back(lam > 0 ? 1.0 / lam : std::numeric_limits<double>::infinity());
  }
  std::sort(mod.begin(), mod.end());
  return mod;
}

bool is_stationary(std::span<const double> phi) {
  for (double m : ar_root_moduli(phi))
    if (!(m > 1.0)) return false;
  return true;
}

bool is_invertible(std::span<const double> theta) {
  std::vector<double> neg(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) neg[i] = -theta[i];
  return is_stationary(neg);
}

double aicc(double ll, int k, int n) {
  if (n <= k + 1) throw ValidationError("AICc undefined: n <= k + 1");
  return -2.0 * ll + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0);
}

double aicc(const ArimaFit& f) { return aicc(f.loglik, f.n_params, f.nobs); }

std::vector<std::string> check_fit(const ArimaFit& f) {
  std::vector<std::string> bad;
  if (!is_stationary(f.params.arma.phi)) bad.push_back("AR polynomial has a root on or inside the unit circle");
  if (!is_invertible(f.params.arma.theta)) bad.push_back("MA polynomial is not invertible");
  if (std::abs(f.params.arma.seasonal_theta) >= 1.0) bad.push_back("seasonal MA is not invertible");
  if (!(f.params.sigma2 > 0)) bad.push_back("innovation variance is not positive");
  if (f.nobs > f.n_params + 1 && std::abs(aicc(f.loglik, f.n_params, f.nobs) - f.aicc) > 1e-9 * (1 + std::abs(f.aicc)))
    bad.push_back("stored AICc does not match loglik and parameter count");
  return bad;
}

double loglik(const ArimaSpec& spec, const ArimaParams& params, std::span<const double> y,
              const Matrix& exog) {
  spec.validate();
  if (static_cast<int>(params.arma.phi.size()) != spec.p ||
      static_cast<int>(params.arma.theta.size()) != spec.q)
    throw ValidationError("parameter vector does not match the model orders");
  if (static_cast<Eigen::Index>(params.beta.size()) != exog.cols())
    throw ValidationError("beta length does not match exogenous columns");
  if (!is_stationary(params.arma.phi)) throw ValidationError("AR parameters are not stationary");
  if (!is_invertible(params.arma.theta) || std::abs(params.arma.seasonal_theta) >= 1.0)
    throw ValidationError("MA parameters are not invertible");
  if (!(params.sigma2 > 0)) throw ValidationError("sigma2 must be positive");

  ArmaParams arma = params.arma;
  if (!spec.seasonal_q) arma.seasonal_theta = 0.0;
  const Design d = make_design(spec, y, exog);
  const StateModel sm = make_state_model(arma, spec.period);
  Vector coef(d.X.cols());
  Eigen::Index c = 0;
  if (spec.intercept) coef[c++] = params.intercept;
  for (double b : params.beta) coef[c++] = b;

  const Eigen::Index n = d.y.size();
  Matrix data(n, 1);
  data.col(0) = d.y - d.X * coef;
  const FilterOutput fo = run_filter(sm, data);
  if (!fo.ok) throw ValidationError("degenerate prediction variance");
  const double S = (fo.V.col(0).array().square() / fo.F.array()).sum();
  return -0.5 * static_cast<double>(n) * (kLog2Pi + std::log(params.sigma2)) -
         0.5 * fo.F.array().log().sum() - 0.5 * S / params.sigma2;
}

ArimaFit fit(const ArimaSpec& spec, std::span<const double> y, const Matrix& exog,
             const FitOptions& options) {
  spec.validate();
  const Design d = make_design(spec, y, exog);
  const int n_arma = spec.p + spec.q + spec.seasonal_q;
  const int k_reg = static_cast<int>(d.X.cols());
  const int n_params = n_arma + k_reg + 1;
  const int n = static_cast<int>(d.y.size());
  if (n <= n_params + 10)
    throw FitError("series too short: " + std::to_string(n) + " observations for " +
                   std::to_string(n_params) + " parameters");

  int evals = 0;
  auto objective = [&](const Vector& x) {
    ++evals;
    const ArmaParams a = arma_from_unconstrained(spec, x);
    const StateModel sm = make_state_model(a, spec.period);
    const Evaluation ev = evaluate(sm, d, nullptr, false);
    return std::isfinite(ev.loglik) ? -ev.loglik : std::numeric_limits<double>::infinity();
  };

  std::vector<Vector> starts;
  if (options.warm_start) {
    if (auto x = unconstrained_from_arma(spec, *options.warm_start)) starts.push_back(*x);
  }
  starts.push_back(Vector::Zero(n_arma));
  if (n_arma > 0) {
    if (auto hr = hannan_rissanen(spec, d))
      if (auto x = unconstrained_from_arma(spec, *hr)) starts.push_back(*x);
    Vector persistent = Vector::Zero(n_arma);
    if (spec.p >= 1) persistent[0] = std::atanh(0.9);
    if (spec.p >= 2) persistent[1] = std::atanh(-0.3);
    starts.push_back(persistent);
  }
  const std::size_t max_starts =
      static_cast<std::size_t>(std::max(1, options.starts)) + (options.warm_start ? 1 : 0);
  if (starts.size() > max_starts) starts.resize(max_starts);

  opt::Options oo;
  oo.max_iterations = options.max_iterations;
  oo.f_tolerance = options.tolerance;
  opt::Result best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    opt::Result r = opt::minimize_bfgs(objective, x0, oo);
    if (r.value < best.value - 1e-10 || (!std::isfinite(best.value) && std::isfinite(r.value)))
      best = r;
  }
  if (!std::isfinite(best.value)) throw FitError("likelihood could not be evaluated at any start");

  ArimaFit out;
  out.spec = spec;
  out.params.arma = arma_from_unconstrained(spec, best.x);
  const StateModel sm = make_state_model(out.params.arma, spec.period);
  Evaluation ev = evaluate(sm, d, nullptr, true);
  out.params.sigma2 = ev.sigma2;
  Eigen::Index c = 0;
  if (spec.intercept) out.params.intercept = ev.coef[c++];
  for (int j = 0; j < d.k_exog; ++j) out.params.beta.push_back(ev.coef[c++]);
  out.loglik = ev.loglik;
  out.nobs = n;
  out.n_params = n_params;
  out.aicc = aicc(out.loglik, n_params, n);
  out.residuals.assign(ev.resid.data(), ev.resid.data() + ev.resid.size());
  out.converged = best.converged;
  out.evaluations = evals;
  {
    const auto& a = out.params.arma;
    std::vector<double> neg_theta;
    for (double t : a.theta) neg_theta.push_back(-t);
    for (const auto& poly : {a.phi, neg_theta})
      for (double m : ar_root_moduli(poly))
        if (m < 1.0 + kBoundaryRoot) out.boundary = true;
    if (std::abs(a.seasonal_theta) * (1.0 + kBoundaryRoot) > 1.0) out.boundary = true;
  }
  out.message = out.converged ? "converged" : "iteration limit reached; best point returned";
  if (out.boundary) out.message += "; parameter on stationarity/invertibility boundary";

  // Filter state at the sample end for forecasting (stochastic part only).
  out.final_state = ev.filter.a_final.col(0) - ev.filter.a_final.rightCols(k_reg) * ev.coef;
  out.final_cov = ev.filter.P_final * ev.sigma2;
  if (spec.d == 1 && !y.empty()) out.last_level = y.back();
  if (exog.rows() > 0)
    for (Eigen::Index j = 0; j < exog.cols(); ++j) out.last_exog.push_back(exog(exog.rows() - 1, j));

  out.param_names = param_names(spec, d.k_exog);
  if (options.compute_std_errors) {
    Vector psi(n_arma + k_reg);
    int i = 0;
    for (double v : out.params.arma.phi) psi[i++] = v;
    for (double v : out.params.arma.theta) psi[i++] = v;
    if (spec.seasonal_q) psi[i++] = out.params.arma.seasonal_theta;
    for (Eigen::Index j = 0; j < ev.coef.size(); ++j) psi[i++] = ev.coef[j];
    auto negll = [&](const Vector& v) {
      ArmaParams a;
      int k = 0;
      for (int j = 0; j < spec.p; ++j) a.phi.push_back(v[k++]);
      for (int j = 0; j < spec.q; ++j) a.theta.push_back(v[k++]);
      if (spec.seasonal_q) a.seasonal_theta = v[k++];
      if (!is_stationary(a.phi) || !is_invertible(a.theta) || std::abs(a.seasonal_theta) >= 1.0)
        return std::numeric_limits<double>::quiet_NaN();
      const Vector coef = v.tail(k_reg);
      const Evaluation e = evaluate(make_state_model(a, spec.period), d, &coef, false);
      return -e.loglik;
    };
    const Matrix H = opt::numerical_hessian(negll, psi, 1e-4);
    out.std_errors.assign(static_cast<std::size_t>(psi.size()), std::numeric_limits<double>::quiet_NaN());
    bool full = false;
    if (H.allFinite()) {
      Eigen::LDLT<Matrix> ldlt(H);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Matrix cov = ldlt.solve(Matrix::Identity(psi.size(), psi.size()));
        full = (cov.diagonal().array() > 0).all();
        for (Eigen::Index j = 0; j < psi.size() && full; ++j)
          out.std_errors[static_cast<std::size_t>(j)] = std::sqrt(cov(j, j));
      }
    }
    // ARMA block singular (near root cancellation, or a boundary hit by the
    // finite differences): fall back to the regression block alone, i.e. the
    // GLS covariance with the ARMA parameters held at their estimates.
    if (!full && k_reg > 0) {
      std::fill(out.std_errors.begin(), out.std_errors.end(), std::numeric_limits<double>::quiet_NaN());
      const Matrix Hb = H.bottomRightCorner(k_reg, k_reg);
      Eigen::LDLT<Matrix> ldlt(Hb);
      if (Hb.allFinite() && ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Matrix cov = ldlt.solve(Matrix::Identity(k_reg, k_reg));
        for (int j = 0; j < k_reg; ++j)
          if (cov(j, j) > 0) out.std_errors[static_cast<std::size_t>(n_arma + j)] = std::sqrt(cov(j, j));
        out.message += out.message.empty() ? "" : "; ";
        out.message += "ARMA information singular, regression std errors conditional on ARMA estimates";
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forecasting

double ForecastFan::sd_at(int h) const {
  if (h < 1 || h > horizon) throw ValidationError("horizon out of range");
  return std::sqrt(var_path[static_cast<std::size_t>(h - 1)]);
}

namespace {

ForecastFan fan_from_state(const ArimaSpec& spec, const ArimaParams& params, const Vector& state,
                           const Matrix& cov, double last_level, const std::vector<double>& last_exog,
                           int h, const std::optional<Matrix>& future_exog) {
  if (h <= 0) throw ValidationError("forecast horizon must be positive");
  const StateModel sm = make_state_model(params.arma, spec.period);
  const int r = sm.r;
  const auto k = static_cast<Eigen::Index>(params.beta.size());
  Matrix fx(h, k);
  if (future_exog) {
    if (future_exog->rows() != h || future_exog->cols() != k)
      throw ValidationError("future exogenous matrix must be h x k");
    fx = *future_exog;
  } else {
    for (int t = 0; t < h; ++t)
      for (Eigen::Index j = 0; j < k; ++j)
        fx(t, j) = j < static_cast<Eigen::Index>(last_exog.size()) ? last_exog[static_cast<std::size_t>(j)] : 0.0;
  }

  // Augmented state x = [S; alpha], S accumulating the error process (d = 1).
  const int na = r + 1;
  Matrix Ta = Matrix::Zero(na, na);
  Ta(0, 0) = spec.d == 1 ? 1.0 : 0.0;
  Ta(0, 1) = spec.d == 1 ? 1.0 : 0.0;
  for (int i = 0; i < r; ++i) {
    Ta(1 + i, 1) = sm.phi[i];
    if (i + 1 < r) Ta(1 + i, 2 + i) = 1.0;
  }
  Vector Ra = Vector::Zero(na);
  for (int i = 0; i < r; ++i) Ra[1 + i] = sm.R[i];

  // One-step prediction from the filtered state at the sample end.
  Vector x = Vector::Zero(na);
  Matrix P = Matrix::Zero(na, na);
  Vector a0 = Vector::Zero(r);
  if (state.size() == r) a0 = state;
  Matrix P0 = Matrix::Zero(r, r);
  if (cov.rows() == r) P0 = cov;
  for (int i = 0; i < r; ++i) x[1 + i] = sm.phi[i] * a0[0] + (i + 1 < r ? a0[i + 1] : 0.0);
  Matrix Pa(r, r);
  predict_cov(sm, P0 / params.sigma2, Pa);
  P.bottomRightCorner(r, r) = Pa * params.sigma2;

  ForecastFan fan;
  fan.horizon = h;
  fan.mean_path.resize(static_cast<std::size_t>(h));
  fan.var_path.resize(static_cast<std::size_t>(h));
  double level = last_level;
  double deterministic = 0.0;
  for (int j = 0; j < h; ++j) {
    const double z_mean = (spec.d == 1 ? x[0] : 0.0) + x[1];
    double var = P(1, 1);
    if (spec.d == 1) var += P(0, 0) + 2 * P(0, 1);
    double reg = spec.intercept ? params.intercept : 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double xv = spec.d == 1 ? fx(j, c) - (j == 0 ? (c < static_cast<Eigen::Index>(last_exog.size()) ? last_exog[static_cast<std::size_t>(c)] : 0.0) : fx(j - 1, c)) : fx(j, c);
      reg += params.beta[static_cast<std::size_t>(c)] * xv;
    }
    if (spec.d == 1) {
      deterministic += reg;
      fan.mean_path[static_cast<std::size_t>(j)] = level + deterministic + z_mean;
    } else {
      fan.mean_path[static_cast<std::size_t>(j)] = reg + z_mean;
    }
    fan.var_path[static_cast<std::size_t>(j)] = std::max(var, 0.0);
    x = Ta * x;
    P = Ta * P * Ta.transpose() + params.sigma2 * Ra * Ra.transpose();
  }
  return fan;
}

}  // namespace

ForecastFan forecast_fan(const ArimaFit& fit, int h, const std::optional<Matrix>& future_exog) {
  return fan_from_state(fit.spec, fit.params, fit.final_state, fit.final_cov, fit.last_level,
                        fit.last_exog, h, future_exog);
}

ForecastFan forecast_fan(const ArimaSpec& spec, const ArimaParams& params, int h) {
  if (!params.beta.empty())
    throw ValidationError("known-parameter fan requires a model without exogenous regressors");
  return fan_from_state(spec, params, Vector(), Matrix(), 0.0, {}, h, std::nullopt);
}

Series simulate_arma(const ArmaParams& arma, int period, double sigma2, int n, std::uint64_t seed,
                     int burn_in) {
  if (!is_stationary(arma.phi)) throw ValidationError("cannot simulate a nonstationary AR process");
  const auto ma = expand_ma(arma, period);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, std::sqrt(sigma2));
  const int total = n + burn_in;
  std::vector<double> e(static_cast<std::size_t>(total), 0.0), u(static_cast<std::size_t>(total), 0.0);
  for (int t = 0; t < total; ++t) {
    u[t] = N(rng);
    double v = u[t];
    for (std::size_t i = 0; i < arma.phi.size(); ++i)
      if (t - 1 - static_cast<int>(i) >= 0) v += arma.phi[i] * e[t - 1 - i];
    for (std::size_t j = 0; j < ma.size(); ++j)
      if (t - 1 - static_cast<int>(j) >= 0) v += ma[j] * u[t - 1 - j];
    e[t] = v;
  }
  return Series(e.begin() + burn_in, e.end());
}

// ---------------------------------------------------------------------------
// Order selection

Selection select_order(std::span<const double> y, const Matrix& exog, const OrderGrid& grid,
                       const SelectionRules& rules, const FitOptions& options) {
  if (grid.p.empty() || grid.q.empty() || grid.d.empty()) throw ValidationError("empty order grid");
  Selection sel;
  FitOptions fo = options;
  fo.compute_std_errors = false;
  for (int d : grid.d)
    for (int p : grid.p)
      for (int q : grid.q) {
        CandidateResult c;
        c.spec = ArimaSpec{p, d, q, grid.seasonal_q, 12, grid.intercept};
        try {
          const ArimaFit f = fit(c.spec, y, exog, fo);
          c.aicc = f.aicc;
          c.loglik = f.loglik;
          c.ok = std::isfinite(f.aicc);
          c.boundary = f.boundary;
          c.message = f.message;
        } catch (const Error& e) {
          c.ok = false;
          c.message = e.what();
        }
        sel.candidates.push_back(c);
      }
  sel.spec = choose_order(sel.candidates, rules);
  return sel;
}

ArimaSpec choose_order(const std::vector<CandidateResult>& candidates, const SelectionRules& rules) {
  std::vector<int> ds;
  for (const auto& c : candidates)
    if (std::find(ds.begin(), ds.end(), c.spec.d) == ds.end()) ds.push_back(c.spec.d);
  auto simpler = [](const ArimaSpec& a, const ArimaSpec& b) {
    if (a.p + a.q != b.p + b.q) return a.p + a.q < b.p + b.q;
    if (a.q != b.q) return a.q < b.q;
    return a.p < b.p;
  };
  bool skip_boundary = rules.exclude_boundary;
  if (skip_boundary &&
      std::none_of(candidates.begin(), candidates.end(), [](const auto& c) { return c.ok && !c.boundary; }))
    skip_boundary = false;
  auto eligible = [&](const CandidateResult& c) { return c.ok && !(skip_boundary && c.boundary); };

  struct Best {
    bool any = false;
    double best_aicc = std::numeric_limits<double>::infinity();
    ArimaSpec chosen;
  };
  std::vector<std::pair<int, Best>> per_d;
  for (int d : ds) {
    Best b;
    for (const auto& c : candidates)
      if (eligible(c) && c.spec.d == d && c.aicc < b.best_aicc) {
        b.best_aicc = c.aicc;
        b.any = true;
      }
    if (!b.any) continue;
    const double band = rules.parsimony ? rules.delta_aicc : 0.0;
    bool have = false;
    double chosen_aicc = 0.0;
    for (const auto& c : candidates) {
      if (!eligible(c) || c.spec.d != d || c.aicc > b.best_aicc + band) continue;
      const bool better = !have ||
                          (rules.parsimony ? simpler(c.spec, b.chosen)
                                           : (c.aicc < chosen_aicc ||
                                              (c.aicc == chosen_aicc && simpler(c.spec, b.chosen))));
      if (better) {
        b.chosen = c.spec;
        chosen_aicc = c.aicc;
        have = true;
      }
    }
    per_d.emplace_back(d, b);
  }
  if (per_d.empty()) throw FitError("all candidate models failed");

  const Best* d0 = nullptr;
  const Best* chosen = &per_d.front().second;
  for (const auto& [d, b] : per_d) {
    if (d == 0) d0 = &b;
    if (b.best_aicc < chosen->best_aicc) chosen = &b;
  }
  if (rules.prefer_d0 && d0) {
    chosen = d0;
    for (const auto& [d, b] : per_d)
      if (d != 0 && b.best_aicc < d0->best_aicc - rules.d1_margin) chosen = &b;
  }
  return chosen->chosen;
}

}  // namespace hpf::tskit
