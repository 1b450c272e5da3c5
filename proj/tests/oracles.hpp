#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the filter, the sparse solver or the greedy
// segmentation it is checking.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hpf/arima.hpp"
#include "hpf/breaks.hpp"
#include "hpf/ingest.hpp"
#include "hpf/rsindex.hpp"

namespace oracle {

using hpf::Matrix;
using hpf::Series;
using hpf::Vector;

// 32-bit LCG so Python-generated reference values can be rebuilt exactly.
inline Series lcg_uniform(int n, std::uint64_t s = 12345) {
  Series out;
  for (int i = 0; i < n; ++i) {
    s = (1664525ULL * s + 1013904223ULL) % 4294967296ULL;
    out.push_back(static_cast<double>(s) / 4294967296.0 - 0.5);
  }
  return out;
}

inline Series cumsum(const Series& x) {
  Series out(x.size());
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = acc += x[i];
  return out;
}

inline Series ar1(const Series& e, double phi) {
  Series out(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) out[t] = (t ? phi * out[t - 1] : 0.0) + e[t];
  return out;
}

// Autocovariances of the ARMA error (unit innovation variance) from a long
// truncated MA(infinity) expansion.
inline std::vector<double> arma_autocov(const hpf::tskit::ArmaParams& a, int period, int maxlag,
                                        int terms = 4000) {
  std::vector<double> ma(static_cast<std::size_t>(terms), 0.0);
  // theta(B)(1 + Theta B^s)
  std::vector<double> th(1 + a.theta.size(), 0.0);
  th[0] = 1.0;
  for (std::size_t i = 0; i < a.theta.size(); ++i) th[i + 1] = a.theta[i];
  std::vector<double> full(th.size() + static_cast<std::size_t>(period), 0.0);
  for (std::size_t i = 0; i < th.size(); ++i) {
    full[i] += th[i];
    full[i + static_cast<std::size_t>(period)] += a.seasonal_theta * th[i];
  }
  std::vector<double> psi(static_cast<std::size_t>(terms), 0.0);
  for (int j = 0; j < terms; ++j) {
    double v = j < static_cast<int>(full.size()) ? full[static_cast<std::size_t>(j)] : 0.0;
    for (std::size_t i = 0; i < a.phi.size(); ++i)
      if (j - 1 - static_cast<int>(i) >= 0) v += a.phi[i] * psi[static_cast<std::size_t>(j - 1 - static_cast<int>(i))];
    psi[static_cast<std::size_t>(j)] = v;
  }
  std::vector<double> g(static_cast<std::size_t>(maxlag + 1), 0.0);
  for (int k = 0; k <= maxlag; ++k)
    for (int j = 0; j + k < terms; ++j) g[static_cast<std::size_t>(k)] += psi[static_cast<std::size_t>(j)] * psi[static_cast<std::size_t>(j + k)];
  return g;
}

// Exact Gaussian log-likelihood from the dense Toeplitz covariance.
inline double dense_loglik(const hpf::tskit::ArimaSpec& spec, const hpf::tskit::ArimaParams& p, const Series& y,
                           const Matrix& exog) {
  const int off = spec.d;
  const int n = static_cast<int>(y.size()) - off;
  Vector w(n);
  for (int t = 0; t < n; ++t) {
    const int s = t + off;
    double v = off ? y[s] - y[s - 1] : y[s];
    if (spec.intercept) v -= p.intercept;
    for (Eigen::Index j = 0; j < exog.cols(); ++j)
      v -= p.beta[static_cast<std::size_t>(j)] * (off ? exog(s, j) - exog(s - 1, j) : exog(s, j));
    w[t] = v;
  }
  hpf::tskit::ArmaParams a = p.arma;
  if (!spec.seasonal_q) a.seasonal_theta = 0.0;
  const auto g = arma_autocov(a, spec.period, n);
  Matrix S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = p.sigma2 * g[static_cast<std::size_t>(std::abs(i - j))];
  Eigen::LLT<Matrix> llt(S);
  const Matrix L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double quad = w.dot(llt.solve(w));
  return -0.5 * n * std::log(2 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
}

// Closed-form h-step forecast variance of a stationary AR(1) with known
// parameters: sigma2 * (1 - phi^(2h)) / (1 - phi^2).
inline double ar1_fan_var(double phi, double sigma2, int h) {
  return sigma2 * (1 - std::pow(phi, 2 * h)) / (1 - phi * phi);
}

// Penalized repeat-sales solution via the dense KKT system with explicit
// equality constraints (no elimination).
struct DenseRs {
  double theta = 0;
  Vector mu;
  Matrix alpha;
};

inline DenseRs dense_rsindex(const std::vector<hpf::ingest::RepeatSalePair>& pairs,
                             const std::vector<std::string>& regions, const std::vector<std::pair<int, int>>& edges,
                             int T, const hpf::rsindex::RsOptions& o) {
  const int R = static_cast<int>(regions.size());
  const int N = 1 + T + R * T;
  std::map<std::string, int> idx;
  for (int r = 0; r < R; ++r) idx[regions[static_cast<std::size_t>(r)]] = r;
  Matrix D = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), N);
  Vector y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const int r = idx.at(p.region_id);
    const auto row = static_cast<Eigen::Index>(i);
    D(row, 0) = 1.0;
    D(row, 1 + p.t2) += 1.0;
    D(row, 1 + p.t1) -= 1.0;
    D(row, 1 + T + r * T + p.t2) += 1.0;
    D(row, 1 + T + r * T + p.t1) -= 1.0;
    y[row] = p.dlog_price;
  }
  Matrix Lt = Matrix::Zero(T, T);
  for (int t = 0; t + 1 < T; ++t) {
    Lt(t, t) += 1;
    Lt(t + 1, t + 1) += 1;
    Lt(t, t + 1) -= 1;
    Lt(t + 1, t) -= 1;
  }
  Matrix Ls = Matrix::Zero(R, R);
  for (auto [a, b] : edges) {
    Ls(a, a) += 1;
    Ls(b, b) += 1;
    Ls(a, b) -= 1;
    Ls(b, a) -= 1;
  }
  Matrix P = Matrix::Zero(N, N);
  P.block(1, 1, T, T) = o.lambda_mu * Lt;
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < R; ++s)
      if (Ls(r, s) != 0) P.block(1 + T + r * T, 1 + T + s * T, T, T) = o.lambda_alpha * Ls(r, s) * Lt;

  // Constraints: mu[base] = 0; alpha[r, base] = 0; sum_r alpha[r, t] = 0; theta = 0 without intercept.
  std::vector<Vector> rows;
  auto unit = [&](int k) {
    Vector c = Vector::Zero(N);
    c[k] = 1;
    return c;
  };
  rows.push_back(unit(1 + o.base));
  for (int r = 0; r < R; ++r) rows.push_back(unit(1 + T + r * T + o.base));
  for (int t = 0; t < T; ++t) {
    if (t == o.base) continue;  // already implied
    Vector c = Vector::Zero(N);
    for (int r = 0; r < R; ++r) c[1 + T + r * T + t] = 1;
    rows.push_back(c);
  }
  if (R == 1)
    for (int t = 0; t < T; ++t)
      if (t != o.base) rows.push_back(unit(1 + T + t));
  if (!o.intercept) rows.push_back(unit(0));
  // drop duplicate rows when R == 1 (sum constraint equals alpha itself)
  const int m = static_cast<int>(rows.size());
  Matrix C(m, N);
  for (int i = 0; i < m; ++i) C.row(i) = rows[static_cast<std::size_t>(i)].transpose();

  Matrix K = Matrix::Zero(N + m, N + m);
  K.topLeftCorner(N, N) = 2 * (D.transpose() * D + P);
  K.topRightCorner(N, m) = C.transpose();
  K.bottomLeftCorner(m, N) = C;
  Vector rhs = Vector::Zero(N + m);
  rhs.head(N) = 2 * D.transpose() * y;
  const Vector sol = K.completeOrthogonalDecomposition().solve(rhs);
  DenseRs out;
  out.theta = sol[0];
  out.mu = sol.segment(1, T);
  out.alpha.resize(R, T);
  for (int r = 0; r < R; ++r) out.alpha.row(r) = sol.segment(1 + T + r * T, T).transpose();
  return out;
}

// Best segmentation with exactly n_bkps breakpoints by exhaustive dynamic
// programming over all admissible split positions.
inline double exhaustive_cost(std::span<const double> y, int n_bkps, hpf::breaks::Cost cost, int min_size,
                              std::vector<int>* best_bkps = nullptr) {
  const int T = static_cast<int>(y.size());
  auto seg = [&](int a, int b) {
    const int n = b - a;
    double sy = 0, st = 0, stt = 0, sty = 0, syy = 0;
    for (int t = a; t < b; ++t) {
      const double tt = t - a;
      sy += y[t];
      st += tt;
      stt += tt * tt;
      sty += tt * y[t];
      syy += y[t] * y[t];
    }
    if (cost == hpf::breaks::Cost::mean_shift || n < 2) return syy - sy * sy / n;
    // OLS of y on (1, t) by normal equations
    Eigen::Matrix2d A;
    A << n, st, st, stt;
    Eigen::Vector2d b2(sy, sty);
    const Eigen::Vector2d c = A.ldlt().solve(b2);
    return syy - c.dot(b2);
  };
  const double inf = std::numeric_limits<double>::infinity();
  // dp[k][t]: best cost of y[0, t) with k breakpoints
  std::vector<std::vector<double>> dp(static_cast<std::size_t>(n_bkps + 1), std::vector<double>(static_cast<std::size_t>(T + 1), inf));
  std::vector<std::vector<int>> arg(dp.size(), std::vector<int>(static_cast<std::size_t>(T + 1), -1));
  for (int t = min_size; t <= T; ++t) dp[0][static_cast<std::size_t>(t)] = seg(0, t);
  for (int k = 1; k <= n_bkps; ++k)
    for (int t = (k + 1) * min_size; t <= T; ++t)
      for (int s = k * min_size; s + min_size <= t; ++s) {
        const double c = dp[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(s)] + seg(s, t);
        if (c < dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]) {
          dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = c;
          arg[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = s;
        }
      }
  if (best_bkps) {
    best_bkps->clear();
    int t = T;
    for (int k = n_bkps; k >= 1; --k) {
      const int s = arg[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
      best_bkps->insert(best_bkps->begin(), s);
      t = s;
    }
  }
  return dp[static_cast<std::size_t>(n_bkps)][static_cast<std::size_t>(T)];
}

// Random stationary/invertible ARMA parameters with root moduli >= ~1.25.
inline hpf::tskit::ArmaParams random_arma(std::mt19937_64& rng, int p, int q, bool seasonal) {
  std::uniform_real_distribution<double> u(-0.75, 0.75);
  auto from_pacf = [](std::vector<double> r) {
    // Durbin-Levinson map from partial autocorrelations to AR coefficients.
    std::vector<double> phi;
    for (std::size_t k = 0; k < r.size(); ++k) {
      std::vector<double> next(k + 1);
      next[k] = r[k];
      for (std::size_t j = 0; j < k; ++j) next[j] = phi[j] - r[k] * phi[k - 1 - j];
      phi = next;
    }
    return phi;
  };
  hpf::tskit::ArmaParams a;
  std::vector<double> r(static_cast<std::size_t>(p));
  for (auto& v : r) v = u(rng);
  a.phi = from_pacf(r);
  std::vector<double> s(static_cast<std::size_t>(q));
  for (auto& v : s) v = u(rng);
  a.theta = from_pacf(s);
  for (auto& v : a.theta) v = -v;
  if (seasonal) a.seasonal_theta = u(rng);
  return a;
}

}  // namespace oracle
