#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hpf/arima.hpp"
#include "hpf/factors.hpp"

namespace hpf::scenario {

struct RegionLoadings {
  std::string region_id;
  double b = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double se_beta = 0.0, se_lambda = 0.0, se_gamma = 0.0;
  tskit::ArimaFit remainder_fit;
  std::string source = "full-sample";  // or "median-of-windows"
};

/// ARIMAX fit of mu_r on (U, mining, lifestyle) with ARMA errors.
RegionLoadings fit_region(std::span<const double> mu_r, const factors::FactorSet& fs, const tskit::ArimaSpec& spec,
                          const tskit::FitOptions& options = {});

struct InclusionTest {
  double aicc_2f = 0.0;
  double aicc_3f = 0.0;
  double delta = 0.0;  // aicc_3f - aicc_2f
  bool include = false;
  double lb12_2f = 1.0;
  double lb12_3f = 1.0;
};

InclusionTest lifestyle_inclusion_test(std::span<const double> mu_r, const factors::FactorSet& fs,
                                       const tskit::ArimaSpec& spec, double threshold = -2.0,
                                       const tskit::FitOptions& options = {});

struct LoadingPath {
  std::vector<Month> endpoints;
  Series beta, lambda, gamma;  // NaN where the fit failed
  std::vector<bool> ok;
  std::vector<std::string> messages;
};

/// One fit per endpoint (inclusive) on the window starting at fs.months[0].
/// Orders stay fixed; each fit warm-starts from the previous endpoint.
LoadingPath expanding_windows(std::span<const double> mu_r, const factors::FactorSet& fs,
                              const tskit::ArimaSpec& spec, const std::vector<Month>& endpoints,
                              int min_window = 120, const tskit::FitOptions& options = {});

/// Endpoints from `first` to `last` inclusive in `step`-month increments.
std::vector<Month> endpoint_grid(Month first, Month last, int step = 3);

/// Per-loading medians over successful endpoints in [from, to].
RegionLoadings median_loadings(const LoadingPath& path, Month from, Month to, int min_endpoints = 3);

struct Decomposition {
  Series observed, market, market_mining, market_mining_lifestyle, remainder;
};

Decomposition decompose(std::span<const double> mu_r, const factors::FactorSet& fs, const RegionLoadings& l);

double scenario_map(double f_M, double beta);
double doubling_time(double T_M, double beta);

/// ln 2 divided by the average annual log growth between the first and last value.
double national_doubling_time(std::span<const double> U, double months_per_year = 12.0);

struct ScenarioBand {
  double f_M = 2.0;
  double f_r = 0.0;
  double x95_factors = 1.0;
  double x95_total = 1.0;
  double share_mining = 0.0, share_lifestyle = 0.0, share_idio = 0.0;
  double doubling_time_years = 0.0;
};

/// exp(1.96 sqrt(lambda^2 s_PS^2 + gamma^2 s_L^2 [+ s_eps^2])) with log-space shares.
ScenarioBand uncertainty_band(double lambda, double gamma, double sigma_ps, double sigma_l, double sigma_eps);

}  // namespace hpf::scenario
