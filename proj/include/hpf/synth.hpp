#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "hpf/arima.hpp"
#include "hpf/factors.hpp"
#include "hpf/ingest.hpp"

namespace hpf::synth {

struct MarketSpec {
  std::string id;
  double beta = 1.0, lambda = 0.0, gamma = 0.0;
  double eps_sd = 0.02;           // stationary sd of the market remainder
  double sales_per_month = 5.0;   // per fine region
};

/// Fourteen markets with realistic regional loadings; remainder sd backed out of the
/// factor and total bands at the ten-year horizon.
std::vector<MarketSpec> default_markets();

struct WorldConfig {
  int T = 360;
  Month start{1995, 1};
  std::uint64_t seed = 20240601;
  int fine_per_market = 7;
  std::vector<MarketSpec> markets = default_markets();

  double drift = std::numbers::ln2 / 120.0;
  double volatility = 0.006;
  tskit::ArmaParams mining{{1.932, -0.934}, {-0.398}, 0.0};
  double mining_sigma2 = 4.485e-05;
  tskit::ArmaParams lifestyle{{1.896, -0.898}, {-0.309}, 0.0};
  double lifestyle_sigma2 = 1.706e-05;
  double max_spread_corr = 0.1;   // |corr(mining, lifestyle)| screen on factor draws
  double max_market_corr = 0.3;   // |corr(U, spread)| screen
  int max_factor_draws = 2000;

  double eps_phi = 0.9;
  double eps_sma = 0.3;
  double eps_scale = 1.0;         // multiplies every market's eps_sd
  double eps_market_share = 0.0;  // variance share of eps common to a market; the rest is per fine region
  double fine_noise_sd = 0.01;    // stationary sd of the per-fine-region AR(1) term
  double beta_dispersion = 0.03;
  double lifestyle_dispersion = 0.1;

  double intensity_scale = 1.0;
  double repeat_share = 0.7;
  double noise_sd = 0.03;         // per-sale log price noise
  double property_sd = 0.3;
  Month weight_from{2015, 1};
  Month weight_to{2020, 1};
};

struct FineTruth {
  std::string id;
  std::string market;
  double b = 0.0, beta = 1.0, lambda = 0.0, gamma = 0.0;
  double intensity = 5.0;
};

struct World {
  WorldConfig config;
  std::vector<Month> months;
  factors::FactorSet factors;  // latent U and spreads
  int factor_draws = 1;
  std::vector<FineTruth> fine;
  Matrix fine_panel;  // T x R true log index, zero at the first month
  Matrix market_eps;  // T x markets
  ingest::RegionGraph graph;
  std::vector<ingest::TransactionRecord> transactions;
};

/// U random walk with drift; spreads from their ARMA processes, demeaned.
/// Draws are repeated (advancing the stream) until the correlation screens pass.
factors::FactorSet simulate_factors(const WorldConfig& cfg, int* draws = nullptr);

/// Planted fine-region loadings around each market's values.
std::vector<FineTruth> plant_loadings(const WorldConfig& cfg);

/// mu_f = b + beta U + lambda d_PS + gamma d_L + eps_market + eta_f, rebased.
Matrix simulate_panel(const WorldConfig& cfg, const factors::FactorSet& f, const std::vector<FineTruth>& fine,
                      Matrix* market_eps = nullptr);

std::vector<ingest::TransactionRecord> simulate_transactions(const WorldConfig& cfg, const Matrix& panel,
                                                             const std::vector<FineTruth>& fine);

/// Grid adjacency within each market, weights from realized sale counts.
ingest::RegionGraph make_graph(const WorldConfig& cfg, const std::vector<FineTruth>& fine,
                               const std::vector<ingest::TransactionRecord>& tx);

World simulate_world(const WorldConfig& cfg, int threads = 1);

/// Stationary variance of an ARMA process with unit innovations.
double arma_variance(const tskit::ArmaParams& arma, int period = 12);

/// transactions.csv, nodes.csv, edges.csv, truth_factors.csv, truth_panel.csv, manifest.json.
void write_world(const std::filesystem::path& dir, const World& world,
                 const std::vector<std::pair<std::string, std::string>>& meta = {});

}  // namespace hpf::synth
