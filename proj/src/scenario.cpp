#include "hpf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hpf/diagnostics.hpp"

namespace hpf::scenario {

namespace {

void check_aligned(std::span<const double> mu_r, const factors::FactorSet& fs) {
  if (mu_r.size() != fs.size()) throw ValidationError("region series and factors differ in length");
  if (fs.mining.size() != fs.size() || fs.lifestyle.size() != fs.size())
    throw ValidationError("factor series differ in length");
}

double lb12(const tskit::ArimaFit& f) {
  if (f.residuals.size() <= 12) return std::numeric_limits<double>::quiet_NaN();
  try {
    return tskit::ljung_box(f.residuals, 12).p_value;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

RegionLoadings fit_region(std::span<const double> mu_r, const factors::FactorSet& fs, const tskit::ArimaSpec& spec,
                          const tskit::FitOptions& options) {
  check_aligned(mu_r, fs);
  RegionLoadings l;
  l.remainder_fit = tskit::fit(spec, mu_r, fs.exog(true), options);
  const auto& p = l.remainder_fit.params;
  l.b = p.intercept;
  l.beta = p.beta[0];
  l.lambda = p.beta[1];
  l.gamma = p.beta[2];
  l.se_beta = l.remainder_fit.se_of("x1");
  l.se_lambda = l.remainder_fit.se_of("x2");
  l.se_gamma = l.remainder_fit.se_of("x3");
  return l;
}

InclusionTest lifestyle_inclusion_test(std::span<const double> mu_r, const factors::FactorSet& fs,
                                       const tskit::ArimaSpec& spec, double threshold,
                                       const tskit::FitOptions& options) {
  check_aligned(mu_r, fs);
  tskit::FitOptions o = options;
  o.compute_std_errors = false;
  const auto f2 = tskit::fit(spec, mu_r, fs.exog(false), o);
  const auto f3 = tskit::fit(spec, mu_r, fs.exog(true), o);
  InclusionTest t;
  t.aicc_2f = f2.aicc;
  t.aicc_3f = f3.aicc;
  t.delta = f3.aicc - f2.aicc;
  t.include = t.delta <= threshold;
  t.lb12_2f = lb12(f2);
  t.lb12_3f = lb12(f3);
  return t;
}

std::vector<Month> endpoint_grid(Month first, Month last, int step) {
  if (step < 1) throw ValidationError("endpoint step must be positive");
  std::vector<Month> out;
  for (Month m = first; m <= last; m = m.plus(step)) out.push_back(m);
  return out;
}

LoadingPath expanding_windows(std::span<const double> mu_r, const factors::FactorSet& fs,
                              const tskit::ArimaSpec& spec, const std::vector<Month>& endpoints, int min_window,
                              const tskit::FitOptions& options) {
  check_aligned(mu_r, fs);
  if (fs.months.size() != fs.size()) throw ValidationError("factor set has no month labels");
  if (!std::is_sorted(endpoints.begin(), endpoints.end())) throw ValidationError("endpoints must be sorted");
  LoadingPath path;
  tskit::FitOptions o = options;
  o.compute_std_errors = false;
  const Month start = fs.months.front();
  for (const Month& e : endpoints) {
    const int n = (e - start) + 1;
    if (n < min_window)
      throw ValidationError("window ending " + e.str() + " has " + std::to_string(n) + " months (< " +
                            std::to_string(min_window) + ")");
    if (n > static_cast<int>(fs.size())) throw ValidationError("endpoint " + e.str() + " beyond the sample");
    path.endpoints.push_back(e);
    try {
      const auto sub = fs.head(static_cast<std::size_t>(n));
      const auto l = fit_region(mu_r.first(static_cast<std::size_t>(n)), sub, spec, o);
      path.beta.push_back(l.beta);
      path.lambda.push_back(l.lambda);
      path.gamma.push_back(l.gamma);
      path.ok.push_back(true);
      path.messages.push_back(l.remainder_fit.message);
      o.warm_start = l.remainder_fit.params.arma;
    } catch (const Error& err) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      path.beta.push_back(nan);
      path.lambda.push_back(nan);
      path.gamma.push_back(nan);
      path.ok.push_back(false);
      path.messages.push_back(err.what());
    }
  }
  return path;
}

RegionLoadings median_loadings(const LoadingPath& path, Month from, Month to, int min_endpoints) {
  Series b, l, g;
  for (std::size_t i = 0; i < path.endpoints.size(); ++i) {
    if (!path.ok[i] || path.endpoints[i] < from || path.endpoints[i] > to) continue;
    b.push_back(path.beta[i]);
    l.push_back(path.lambda[i]);
    g.push_back(path.gamma[i]);
  }
  if (b.empty()) throw ValidationError("no successful endpoints between " + from.str() + " and " + to.str());
  if (static_cast<int>(b.size()) < min_endpoints)
    throw ValidationError("only " + std::to_string(b.size()) + " endpoints in the median filter");
  RegionLoadings out;
  out.beta = median(b);
  out.lambda = median(l);
  out.gamma = median(g);
  out.source = "median-of-windows";
  out.se_beta = out.se_lambda = out.se_gamma = std::numeric_limits<double>::quiet_NaN();
  return out;
}

Decomposition decompose(std::span<const double> mu_r, const factors::FactorSet& fs, const RegionLoadings& l) {
  check_aligned(mu_r, fs);
  if (!std::isfinite(l.b) || !std::isfinite(l.beta) || !std::isfinite(l.lambda) || !std::isfinite(l.gamma))
    throw ValidationError("loadings must be finite");
  Decomposition d;
  const std::size_t T = mu_r.size();
  d.observed.assign(mu_r.begin(), mu_r.end());
  d.market.resize(T);
  d.market_mining.resize(T);
  d.market_mining_lifestyle.resize(T);
  d.remainder.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    d.market[t] = l.b + l.beta * fs.market[t];
    d.market_mining[t] = d.market[t] + l.lambda * fs.mining[t];
    d.market_mining_lifestyle[t] = d.market_mining[t] + l.gamma * fs.lifestyle[t];
    d.remainder[t] = mu_r[t] - d.market_mining_lifestyle[t];
  }
  return d;
}

double scenario_map(double f_M, double beta) {
  if (!(f_M > 0)) throw ValidationError("national multiple must be positive");
  return std::pow(f_M, beta);
}

double doubling_time(double T_M, double beta) {
  if (!(beta > 0)) throw ValidationError("doubling time needs a positive market loading");
  return T_M / beta;
}

double national_doubling_time(std::span<const double> U, double months_per_year) {
  if (U.size() < 2) throw ValidationError("national series too short");
  const double years = static_cast<double>(U.size() - 1) / months_per_year;
  const double g = (U.back() - U.front()) / years;
  if (!(g > 0)) throw ValidationError("national index does not grow over the sample");
  return std::numbers::ln2 / g;
}

ScenarioBand uncertainty_band(double lambda, double gamma, double sigma_ps, double sigma_l, double sigma_eps) {
  if (sigma_ps < 0 || sigma_l < 0 || sigma_eps < 0) throw ValidationError("standard deviations must be nonnegative");
  ScenarioBand b;
  const double vm = lambda * lambda * sigma_ps * sigma_ps;
  const double vl = gamma * gamma * sigma_l * sigma_l;
  const double ve = sigma_eps * sigma_eps;
  b.x95_factors = std::exp(1.96 * std::sqrt(vm + vl));
  b.x95_total = std::exp(1.96 * std::sqrt(vm + vl + ve));
  const double tot = vm + vl + ve;
  if (tot > 0) {
    b.share_mining = vm / tot;
    b.share_lifestyle = vl / tot;
    b.share_idio = ve / tot;
  }
  return b;
}

}  // namespace hpf::scenario
