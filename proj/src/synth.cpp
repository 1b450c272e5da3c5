#include "hpf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

#include "hpf/csv.hpp"

namespace hpf::synth {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 step so nearby streams are decorrelated.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kFactors = 1, kLoadings = 2, kEps = 1000, kFine = 100000, kTx = 200000, kFineEps = 300000 };

MarketSpec market(const std::string& id, double beta, double lambda, double gamma, double x95, double x95_total,
                  double rate) {
  const double a = std::log(x95_total) / 1.96, b = std::log(x95) / 1.96;
  const double sd = std::max(std::sqrt(std::max(a * a - b * b, 0.0)), 0.01);
  return MarketSpec{id, beta, lambda, gamma, sd, rate};
}

}  // namespace

std::vector<MarketSpec> default_markets() {
  return {
      market("melbourne", 1.22, -0.16, -0.70, 1.24, 1.25, 6),
      market("brisbane", 1.10, 0.06, 0.39, 1.12, 1.14, 4),
      market("hobart", 1.02, 0.12, 0.68, 1.23, 1.30, 3),
      market("act", 1.02, -0.08, 0.11, 1.05, 1.10, 2),
      market("sydney", 1.01, -0.43, -0.14, 1.26, 1.27, 5),
      market("adelaide", 0.96, 0.05, 0.09, 1.04, 1.10, 5),
      market("perth", 0.96, 0.60, -0.13, 1.38, 1.39, 7),
      market("rest_of_tas", 0.93, 0.14, 0.54, 1.19, 1.24, 3),
      market("darwin", 0.91, 0.13, -0.27, 1.11, 1.39, 2),
      market("rest_of_nsw", 0.88, -0.04, 0.38, 1.12, 1.12, 5),
      market("rest_of_qld", 0.85, 0.23, 0.47, 1.20, 1.20, 4),
      market("rest_of_vic", 0.81, 0.01, 0.09, 1.03, 1.10, 6),
      market("rest_of_sa", 0.73, 0.10, 0.21, 1.08, 1.11, 3),
      market("rest_of_wa", 0.70, 0.25, -0.09, 1.14, 1.23, 4),
  };
}

double arma_variance(const tskit::ArmaParams& arma, int period) {
  if (!tskit::is_stationary(arma.phi)) throw ValidationError("nonstationary ARMA has no stationary variance");
  const auto ma = tskit::expand_ma(arma, period);
  // psi weights of theta(B)/phi(B)
  std::vector<double> psi{1.0};
  double acc = 1.0;
  for (int j = 1; j < 200000; ++j) {
    double v = j <= static_cast<int>(ma.size()) ? ma[j - 1] : 0.0;
    for (std::size_t i = 0; i < arma.phi.size(); ++i)
      if (j - 1 - static_cast<int>(i) >= 0) v += arma.phi[i] * psi[j - 1 - i];
    psi.push_back(v);
    acc += v * v;
    if (j > static_cast<int>(ma.size()) + 50 && std::abs(v) < 1e-12) break;
  }
  return acc;
}

factors::FactorSet simulate_factors(const WorldConfig& cfg, int* draws) {
  if (!tskit::is_stationary(cfg.mining.phi) || !tskit::is_stationary(cfg.lifestyle.phi))
    throw ValidationError("spread ARMA parameters are not stationary");
  if (cfg.T < 2) throw ValidationError("world needs at least two months");
  factors::FactorSet best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < std::max(1, cfg.max_factor_draws); ++k) {
    const std::uint64_t s = stream_seed(cfg.seed, kFactors + 7919ull * static_cast<std::uint64_t>(k));
    factors::FactorSet f;
    f.months = month_range(cfg.start, cfg.T);
    std::mt19937_64 rng(s);
    std::normal_distribution<double> N(0.0, 1.0);
    f.market.resize(static_cast<std::size_t>(cfg.T));
    double u = 0.0;
    for (int t = 0; t < cfg.T; ++t) {
      if (t > 0) u += cfg.drift + cfg.volatility * N(rng);
      f.market[t] = u;
    }
    f.mining = demeaned(tskit::simulate_arma(cfg.mining, 12, cfg.mining_sigma2, cfg.T, s ^ 0xA5A5ull));
    f.lifestyle = demeaned(tskit::simulate_arma(cfg.lifestyle, 12, cfg.lifestyle_sigma2, cfg.T, s ^ 0x5A5Aull));
    const bool flat = variance(f.market) == 0.0;
    const double c_ml = std::abs(correlation(f.mining, f.lifestyle));
    const double c_um = flat ? 0.0 : std::abs(correlation(f.market, f.mining));
    const double c_ul = flat ? 0.0 : std::abs(correlation(f.market, f.lifestyle));
    const double score = std::max({c_ml / cfg.max_spread_corr, c_um / cfg.max_market_corr, c_ul / cfg.max_market_corr});
    if (score < best_score) {
      best_score = score;
      best = std::move(f);
      if (draws) *draws = k + 1;
    }
    if (best_score <= 1.0) break;
  }
  return best;
}

std::vector<FineTruth> plant_loadings(const WorldConfig& cfg) {
  if (cfg.fine_per_market < 1) throw ValidationError("need at least one fine region per market");
  std::vector<FineTruth> out;
  const int n = cfg.fine_per_market;
  // Centered pattern with sum of squares n.
  std::vector<double> u(static_cast<std::size_t>(n));
  double ss = 0.0;
  for (int j = 0; j < n; ++j) {
    u[j] = j - (n - 1) / 2.0;
    ss += u[j] * u[j];
  }
  for (auto& v : u) v = ss > 0 ? v * std::sqrt(n / ss) : 0.0;

  std::mt19937_64 rng(stream_seed(cfg.seed, kLoadings));
  std::normal_distribution<double> N(0.0, 1.0);
  for (const auto& m : cfg.markets) {
    if (m.sales_per_month < 0) throw ValidationError("negative transaction intensity");
    // Within-market dispersion: lambda and gamma move against each other along
    // u so that the fine-level loading vectors are orthogonal; gamma also gets
    // a random component orthogonal to u.
    const double s = std::sqrt(std::abs(m.lambda * m.gamma));
    const double sign = m.lambda * m.gamma >= 0 ? 1.0 : -1.0;
    std::vector<double> g(static_cast<std::size_t>(n)), db(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      g[j] = cfg.lifestyle_dispersion * N(rng);
      db[j] = cfg.beta_dispersion * N(rng);
    }
    auto center = [&](std::vector<double>& v) {
      const double mv = mean(v);
      for (auto& x : v) x -= mv;
    };
    center(g);
    center(db);
    if (ss > 0) {
      double gu = 0.0;
      for (int j = 0; j < n; ++j) gu += g[j] * u[j];
      for (int j = 0; j < n; ++j) g[j] -= gu / n * u[j];
    }
    for (int j = 0; j < n; ++j) {
      FineTruth f;
      f.id = m.id + "_" + std::to_string(j + 1);
      f.market = m.id;
      f.b = 0.05 * N(rng);
      f.beta = m.beta + db[j];
      f.lambda = m.lambda + s * u[j];
      f.gamma = m.gamma - sign * s * u[j] + g[j];
      f.intensity = m.sales_per_month * cfg.intensity_scale;
      out.push_back(f);
    }
  }
  return out;
}

Matrix simulate_panel(const WorldConfig& cfg, const factors::FactorSet& f, const std::vector<FineTruth>& fine,
                      Matrix* market_eps) {
  const int T = static_cast<int>(f.size());
  std::map<std::string, int> midx;
  for (std::size_t i = 0; i < cfg.markets.size(); ++i) midx[cfg.markets[i].id] = static_cast<int>(i);
  Matrix eps = Matrix::Zero(T, static_cast<Eigen::Index>(cfg.markets.size()));
  const tskit::ArmaParams ep{{cfg.eps_phi}, {}, cfg.eps_sma};
  const double unit_var = arma_variance(ep);
  for (std::size_t i = 0; i < cfg.markets.size(); ++i) {
    const double sd = cfg.eps_scale * cfg.markets[i].eps_sd;
    if (sd <= 0 || cfg.eps_market_share <= 0) continue;
    const auto e = tskit::simulate_arma(ep, 12, cfg.eps_market_share * sd * sd / unit_var, T,
                                        stream_seed(cfg.seed, kEps + i));
    for (int t = 0; t < T; ++t) eps(t, static_cast<Eigen::Index>(i)) = e[t];
  }
  Matrix panel(T, static_cast<Eigen::Index>(fine.size()));
  const tskit::ArmaParams np{{0.9}, {}, 0.0};
  for (std::size_t r = 0; r < fine.size(); ++r) {
    const auto& fr = fine[r];
    const auto it = midx.find(fr.market);
    if (it == midx.end()) throw ValidationError("fine region '" + fr.id + "' has unknown market");
    Series eta(static_cast<std::size_t>(T), 0.0);
    if (cfg.fine_noise_sd > 0)
      eta = tskit::simulate_arma(np, 12, cfg.fine_noise_sd * cfg.fine_noise_sd * (1 - 0.81), T,
                                 stream_seed(cfg.seed, kFine + r));
    const double sd = cfg.eps_scale * cfg.markets[static_cast<std::size_t>(it->second)].eps_sd;
    if (sd > 0 && cfg.eps_market_share < 1) {
      const auto own = tskit::simulate_arma(ep, 12, (1 - cfg.eps_market_share) * sd * sd / unit_var, T,
                                            stream_seed(cfg.seed, kFineEps + r));
      for (int t = 0; t < T; ++t) eta[t] += own[t];
    }
    for (int t = 0; t < T; ++t)
      panel(t, static_cast<Eigen::Index>(r)) = fr.b + fr.beta * f.market[t] + fr.lambda * f.mining[t] +
                                               fr.gamma * f.lifestyle[t] + eps(t, it->second) + eta[t];
  }
  // Rebase so every series is zero in the first month.
  const Vector first = panel.row(0).transpose();
  panel.rowwise() -= first.transpose();
  if (market_eps) *market_eps = eps;
  return panel;
}

std::vector<ingest::TransactionRecord> simulate_transactions(const WorldConfig& cfg, const Matrix& panel,
                                                             const std::vector<FineTruth>& fine) {
  std::vector<std::vector<ingest::TransactionRecord>> per(fine.size());
  const auto months = month_range(cfg.start, static_cast<int>(panel.rows()));
  for (std::size_t r = 0; r < fine.size(); ++r) {
    std::mt19937_64 rng(stream_seed(cfg.seed, kTx + r));
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::poisson_distribution<int> P(std::max(fine[r].intensity, 0.0));
    std::vector<double> effect;
    auto& out = per[r];
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
      const int n = fine[r].intensity > 0 ? P(rng) : 0;
      for (int k = 0; k < n; ++k) {
        std::size_t prop;
        if (!effect.empty() && U(rng) < cfg.repeat_share) {
          prop = std::min(static_cast<std::size_t>(U(rng) * effect.size()), effect.size() - 1);
        } else {
          prop = effect.size();
          effect.push_back(cfg.property_sd * N(rng));
        }
        const double logp = 13.0 + panel(t, static_cast<Eigen::Index>(r)) + effect[prop] + cfg.noise_sd * N(rng);
        ingest::TransactionRecord rec;
        rec.property_id = fine[r].id + "-" + std::to_string(prop + 1);
        rec.price = std::round(std::exp(logp) * 100.0) / 100.0;
        rec.date = months[static_cast<std::size_t>(t)];
        rec.region_id = fine[r].id;
        out.push_back(std::move(rec));
      }
    }
  }
  std::vector<ingest::TransactionRecord> all;
  for (auto& v : per) all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return all;
}

ingest::RegionGraph make_graph(const WorldConfig& cfg, const std::vector<FineTruth>& fine,
                               const std::vector<ingest::TransactionRecord>& tx) {
  std::vector<std::string> nodes, coarse;
  std::map<std::string, std::size_t> idx;
  for (const auto& f : fine) {
    idx[f.id] = nodes.size();
    nodes.push_back(f.id);
    coarse.push_back(f.market);
  }
  std::vector<double> w(nodes.size(), 0.0);
  for (const auto& r : tx)
    if (r.date >= cfg.weight_from && r.date <= cfg.weight_to) w[idx.at(r.region_id)] += 1.0;
  // Markets without sales in the weight window fall back to equal weights.
  std::map<std::string, double> tot;
  for (std::size_t i = 0; i < nodes.size(); ++i) tot[coarse[i]] += w[i];
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (tot[coarse[i]] == 0.0) w[i] = 1.0;
  std::vector<std::pair<std::string, std::string>> edges;
  constexpr int cols = 3;
  for (std::size_t start = 0; start < fine.size();) {
    std::size_t end = start;
    while (end < fine.size() && fine[end].market == fine[start].market) ++end;
    const int n = static_cast<int>(end - start);
    for (int j = 0; j < n; ++j) {
      if ((j % cols) + 1 < cols && j + 1 < n) edges.emplace_back(nodes[start + j], nodes[start + j + 1]);
      if (j + cols < n) edges.emplace_back(nodes[start + j], nodes[start + j + cols]);
    }
    start = end;
  }
  return ingest::RegionGraph(nodes, coarse, w, edges);
}

World simulate_world(const WorldConfig& cfg, int threads) {
  (void)threads;
  World w;
  w.config = cfg;
  w.months = month_range(cfg.start, cfg.T);
  w.factors = simulate_factors(cfg, &w.factor_draws);
  w.fine = plant_loadings(cfg);
  w.fine_panel = simulate_panel(cfg, w.factors, w.fine, &w.market_eps);
  w.transactions = simulate_transactions(cfg, w.fine_panel, w.fine);
  w.graph = make_graph(cfg, w.fine, w.transactions);
  return w;
}

void write_world(const std::filesystem::path& dir, const World& w,
                 const std::vector<std::pair<std::string, std::string>>& meta) {
  std::filesystem::create_directories(dir);
  ingest::write_transactions(dir / "transactions.csv", w.transactions);
  ingest::write_geography(dir / "nodes.csv", dir / "edges.csv", w.graph);

  csv::Writer tf({"month", "market", "mining", "lifestyle"});
  for (const auto& [k, v] : meta) tf.meta(k, v);
  for (std::size_t t = 0; t < w.factors.size(); ++t)
    tf.row({w.months[t].str(), csv::format_double(w.factors.market[t]), csv::format_double(w.factors.mining[t]),
            csv::format_double(w.factors.lifestyle[t])});
  tf.save(dir / "truth_factors.csv");

  csv::Writer tp({"month", "region_id", "log_index"});
  for (const auto& [k, v] : meta) tp.meta(k, v);
  for (Eigen::Index t = 0; t < w.fine_panel.rows(); ++t)
    for (std::size_t r = 0; r < w.fine.size(); ++r)
      tp.row({w.months[static_cast<std::size_t>(t)].str(), w.fine[r].id,
              csv::format_double(w.fine_panel(t, static_cast<Eigen::Index>(r)))});
  tp.save(dir / "truth_panel.csv");

  const auto& c = w.config;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["T"] = c.T;
  j["start"] = c.start.str();
  j["fine_per_market"] = c.fine_per_market;
  j["factor_draws"] = w.factor_draws;
  j["market_factor"] = {{"drift", c.drift}, {"volatility", c.volatility}};
  j["mining"] = {{"phi", c.mining.phi}, {"theta", c.mining.theta}, {"sigma2", c.mining_sigma2}};
  j["lifestyle"] = {{"phi", c.lifestyle.phi}, {"theta", c.lifestyle.theta}, {"sigma2", c.lifestyle_sigma2}};
  j["eps"] = {{"phi", c.eps_phi}, {"sma12", c.eps_sma}, {"fine_noise_sd", c.fine_noise_sd}, {"scale", c.eps_scale}, {"market_share", c.eps_market_share}};
  j["transactions"] = {{"count", w.transactions.size()},
                       {"repeat_share", c.repeat_share},
                       {"noise_sd", c.noise_sd},
                       {"property_sd", c.property_sd},
                       {"weight_from", c.weight_from.str()},
                       {"weight_to", c.weight_to.str()}};
  for (const auto& m : c.markets)
    j["markets"].push_back({{"id", m.id},
                            {"beta", m.beta},
                            {"lambda", m.lambda},
                            {"gamma", m.gamma},
                            {"eps_sd", m.eps_sd},
                            {"sales_per_month", m.sales_per_month}});
  for (std::size_t i = 0; i < w.fine.size(); ++i) {
    const auto& f = w.fine[i];
    j["fine"].push_back({{"id", f.id},
                         {"market", f.market},
                         {"b", f.b},
                         {"beta", f.beta},
                         {"lambda", f.lambda},
                         {"gamma", f.gamma},
                         {"intensity", f.intensity},
                         {"weight", w.graph.weights()[i]}});
  }
  for (const auto& [k, v] : meta) j["meta"][k] = v;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("io", "cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace hpf::synth
