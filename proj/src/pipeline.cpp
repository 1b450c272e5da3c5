#include "hpf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "hpf/breaks.hpp"
#include "hpf/csv.hpp"
#include "hpf/diagnostics.hpp"
#include "hpf/ingest.hpp"
#include "hpf/rsindex.hpp"
#include "hpf/scenario.hpp"
#include "hpf/spectral.hpp"
#include "hpf/svg.hpp"

namespace hpf::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

Json default_config() {
  return Json::parse(R"({
  "seed": 20240601,
  "charts": true,
  "paths": {"transactions": "", "nodes": "", "edges": ""},
  "sample": {"start": "1995-01", "end": "2024-12", "base_month": "1995-01"},
  "ingest": {"tolerance": 0.05, "filter_dlog": true, "max_abs_dlog": 2.302585092994046},
  "rsindex": {"lambda_mu": 1.0, "lambda_alpha": 10.0, "intercept": true},
  "pca": {"q": 3},
  "factors": {"mining_region": "perth", "base_region": "sydney", "lifestyle_anchor": "hobart",
              "basket_size": 20, "top": [], "bottom": []},
  "select": {"factor_p": [0, 1, 2, 3], "factor_q": [0, 1, 2], "factor_d": [0, 1],
             "delta_aicc": 2.0, "d1_margin": 10.0, "exclude_boundary": true,
             "region_p": [0, 1, 2], "region_q": [0, 1, 2], "seasonal_ma": true,
             "inclusion_threshold": -2.0},
  "fit": {"starts": 3, "max_iterations": 200, "tolerance": 1e-8},
  "windows": {"first": "2008-01", "last": "2024-12", "step": 3, "min_window": 120,
              "median_from": "2014-01", "median_to": "2024-12"},
  "horizon": 120,
  "scenario": {"f_M": [2.0], "loadings": "median"},
  "breaks": {"start": "2000-01", "end": "2020-12", "n_bkps": 3, "cost": "linear", "min_size": 12,
             "adf_max_lags": 12, "min_regime_obs": 20, "refine": true},
  "synth": {"T": 360, "start": "1995-01", "fine_per_market": 7, "intensity_scale": 1.0,
            "noise_sd": 0.03, "repeat_share": 0.7, "volatility": 0.006, "eps_scale": 1.0, "eps_market_share": 0.0}
})");
}

const std::vector<KeyDoc>& key_docs() {
  static const std::vector<KeyDoc> docs = {
      {"seed", "RNG seed for the synthetic world (default 20240601)"},
      {"charts", "write SVG charts next to CSV outputs (default true)"},
      {"paths.transactions", "transactions CSV; empty = <run>/synth/transactions.csv"},
      {"paths.nodes", "geography nodes CSV; empty = <run>/synth/nodes.csv"},
      {"paths.edges", "geography edges CSV; empty = <run>/synth/edges.csv"},
      {"sample.start", "first month of the panel (default 1995-01)"},
      {"sample.end", "last month of the panel, inclusive (default 2024-12)"},
      {"sample.base_month", "month at which every index is zero (default 1995-01)"},
      {"ingest.tolerance", "max fraction of unparseable transaction rows (default 0.05)"},
      {"ingest.filter_dlog", "drop pairs with |dlog price| above max_abs_dlog (default true)"},
      {"ingest.max_abs_dlog", "pair filter threshold (default ln 10)"},
      {"rsindex.lambda_mu", "temporal smoothing penalty on the common trend (default 1.0)"},
      {"rsindex.lambda_alpha", "spatio-temporal penalty on local deviations (default 10.0)"},
      {"rsindex.intercept", "estimate the per-pair constant theta (default true)"},
      {"pca.q", "number of principal components kept (default 3)"},
      {"factors.mining_region", "coarse region in the numerator of the mining spread (default perth)"},
      {"factors.base_region", "coarse region in the denominator of the mining spread (default sydney)"},
      {"factors.lifestyle_anchor", "coarse or fine region whose PC3 loading is oriented positive (default hobart)"},
      {"factors.basket_size", "fine regions in each lifestyle basket when chosen by PC3 (default 20)"},
      {"factors.top", "explicit top lifestyle basket (fine region ids); empty = choose by PC3"},
      {"factors.bottom", "explicit bottom lifestyle basket; empty = choose by PC3"},
      {"select.factor_p", "AR orders searched for the factor spreads (default [0,1,2,3])"},
      {"select.factor_q", "MA orders searched for the factor spreads (default [0,1,2])"},
      {"select.factor_d", "differencing orders searched for the factor spreads (default [0,1])"},
      {"select.delta_aicc", "parsimony band for the factor spreads (default 2)"},
      {"select.d1_margin", "AICc gain required to prefer d = 1 (default 10)"},
      {"select.exclude_boundary", "skip candidate fits on the stationarity/invertibility boundary (default true)"},
      {"select.region_p", "AR orders searched for regional models (default [0,1,2])"},
      {"select.region_q", "MA orders searched for regional models (default [0,1,2])"},
      {"select.seasonal_ma", "seasonal MA(1) at lag 12 in regional models (default true)"},
      {"select.inclusion_threshold", "AICc change that admits the lifestyle factor (default -2)"},
      {"fit.starts", "optimizer starting points per fit (default 3)"},
      {"fit.max_iterations", "BFGS iteration cap (default 200)"},
      {"fit.tolerance", "log-likelihood change tolerance (default 1e-8)"},
      {"windows.first", "first expanding-window endpoint (default 2008-01)"},
      {"windows.last", "last expanding-window endpoint (default 2024-12)"},
      {"windows.step", "months between endpoints (default 3)"},
      {"windows.min_window", "minimum window length in months (default 120)"},
      {"windows.median_from", "first endpoint entering the median loadings (default 2014-01)"},
      {"windows.median_to", "last endpoint entering the median loadings (default 2024-12)"},
      {"horizon", "forecast horizon in months for fans and bands (default 120)"},
      {"scenario.f_M", "national growth multiples to map (default [2.0])"},
      {"scenario.loadings", "median (expanding-window medians) or full (full-sample fit)"},
      {"breaks.start", "first month of the break-detection window (default 2000-01)"},
      {"breaks.end", "last month of the break-detection window (default 2020-12)"},
      {"breaks.n_bkps", "number of breakpoints (default 3)"},
      {"breaks.cost", "segment cost: linear (trend SSE) or mean (default linear)"},
      {"breaks.min_size", "minimum regime length in months (default 12)"},
      {"breaks.refine", "after the greedy splits, re-place breakpoints singly and in adjacent pairs (default true)"},
      {"breaks.adf_max_lags", "ADF lag ceiling (default 12)"},
      {"breaks.min_regime_obs", "regimes shorter than this get no ADF statistic (default 20)"},
      {"synth.T", "months in the synthetic world (default 360)"},
      {"synth.start", "first month of the synthetic world (default 1995-01)"},
      {"synth.fine_per_market", "fine regions per market (default 7)"},
      {"synth.intensity_scale", "multiplier on sales per region-month (default 1.0)"},
      {"synth.noise_sd", "per-sale log price noise (default 0.03)"},
      {"synth.repeat_share", "probability a sale is a resale of an existing property (default 0.7)"},
      {"synth.volatility", "monthly sd of the market factor innovations (default 0.006)"},
      {"synth.eps_scale", "multiplier on every market's remainder sd (default 1.0)"},
      {"synth.eps_market_share", "share of remainder variance common to a market, rest per fine region (default 0.0)"},
  };
  return docs;
}

namespace {

Json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return Json::json_pointer(p);
}

void merge_into(Json& base, const Json& over, const std::string& prefix) {
  if (!over.is_object()) throw ValidationError("configuration must be a JSON object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError("unknown configuration key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else {
      const bool num_ok = slot.is_number() && it.value().is_number();
      if (slot.type() != it.value().type() && !num_ok)
        throw ValidationError("configuration key '" + key + "' has the wrong type");
      slot = it.value();
    }
  }
}

}  // namespace

Config::Config() : j_(default_config()) {}

void Config::merge(const Json& overrides) { merge_into(j_, overrides, ""); }

void Config::merge_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_file", "config file not found: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  merge(j);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (...) {
    value = raw;
  }
  const auto ptr = pointer(key);
  if (!j_.contains(ptr)) throw ValidationError("unknown configuration key '" + key + "'");
  Json& slot = j_[ptr];
  if (slot.is_object()) throw ValidationError("'" + key + "' is a section, not a value");
  const bool num_ok = slot.is_number() && value.is_number();
  if (slot.type() != value.type() && !num_ok) {
    if (slot.is_string()) value = raw;
    else throw ValidationError("configuration key '" + key + "' has the wrong type");
  }
  slot = value;
}

const Json& Config::at(const std::string& dotted) const {
  const auto ptr = pointer(dotted);
  if (!j_.contains(ptr)) throw ValidationError("unknown configuration key '" + dotted + "'");
  return j_.at(ptr);
}

std::string Config::hash() const { return fnv1a_hex(j_.dump()); }

synth::WorldConfig world_config(const Config& cfg) {
  synth::WorldConfig w;
  w.seed = cfg.at("seed").get<std::uint64_t>();
  w.T = cfg.integer("synth.T");
  w.start = Month::parse(cfg.text("synth.start"));
  w.fine_per_market = cfg.integer("synth.fine_per_market");
  w.intensity_scale = cfg.number("synth.intensity_scale");
  w.noise_sd = cfg.number("synth.noise_sd");
  w.repeat_share = cfg.number("synth.repeat_share");
  w.volatility = cfg.number("synth.volatility");
  w.eps_scale = cfg.number("synth.eps_scale");
  w.eps_market_share = cfg.number("synth.eps_market_share");
  return w;
}

// ---------------------------------------------------------------------------
// Command registry

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"synth", "generate a synthetic world (transactions, geography, truth)",
       {"seed", "synth.T", "synth.start", "synth.fine_per_market", "synth.intensity_scale", "synth.noise_sd",
        "synth.repeat_share", "synth.volatility", "synth.eps_scale",
        "synth.eps_market_share"},
       {},
       {"synth/transactions.csv", "synth/nodes.csv", "synth/edges.csv", "synth/truth_factors.csv",
        "synth/truth_panel.csv", "synth/manifest.json"}},
      {"build-index", "estimate fine-region repeat-sales indexes and aggregate them",
       {"paths.transactions", "paths.nodes", "paths.edges", "sample.start", "sample.end", "sample.base_month",
        "ingest.tolerance", "ingest.filter_dlog", "ingest.max_abs_dlog", "rsindex.lambda_mu",
        "rsindex.lambda_alpha", "rsindex.intercept"},
       {},
       {"index/fine_index.csv", "index/coarse_index.csv", "index/national_index.csv", "index/index_meta.json"}},
      {"pca", "principal components of the fine-region panel",
       {"pca.q", "paths.nodes", "factors.mining_region", "factors.lifestyle_anchor", "charts"},
       {"index/fine_index.csv", "index/national_index.csv"},
       {"pca/loadings.csv", "pca/components.csv", "pca/pca.json"}},
      {"factors", "market index, mining spread and lifestyle spread",
       {"paths.nodes", "factors.mining_region", "factors.base_region", "factors.basket_size", "factors.top",
        "factors.bottom", "charts"},
       {"index/fine_index.csv", "index/coarse_index.csv", "index/national_index.csv", "pca/loadings.csv",
        "pca/components.csv"},
       {"factors/factors.csv", "factors/factors.json"}},
      {"select", "order selection for the factor spreads and the regional models",
       {"select.factor_p", "select.factor_q", "select.factor_d", "select.delta_aicc", "select.d1_margin",
        "select.exclude_boundary", "select.region_p", "select.region_q", "select.seasonal_ma",
        "select.inclusion_threshold", "fit.starts",
        "fit.max_iterations", "fit.tolerance", "horizon"},
       {"factors/factors.csv", "index/coarse_index.csv"},
       {"select/factor_orders.csv", "select/factor_candidates.csv", "select/region_orders.csv",
        "select/lifestyle_inclusion.csv"}},
      {"fit", "full-sample regional ARIMAX loadings with confidence intervals",
       {"fit.starts", "fit.max_iterations", "fit.tolerance", "horizon"},
       {"factors/factors.csv", "index/coarse_index.csv", "select/region_orders.csv"},
       {"fit/loadings_full.csv", "fit/fit_reports.json"}},
      {"windows", "expanding-window loadings and their medians",
       {"windows.first", "windows.last", "windows.step", "windows.min_window", "windows.median_from",
        "windows.median_to", "fit.starts", "fit.max_iterations", "fit.tolerance", "charts"},
       {"factors/factors.csv", "index/coarse_index.csv", "select/region_orders.csv"},
       {"windows/median_loadings.csv", "windows/path_<region>.csv"}},
      {"fans", "forecast fans for the factor spreads",
       {"horizon", "fit.starts", "fit.max_iterations", "fit.tolerance", "charts"},
       {"factors/factors.csv", "select/factor_orders.csv"},
       {"fans/factor_fans.csv", "fans/factor_params.csv"}},
      {"decompose", "cumulative factor approximations and remainders per region",
       {"scenario.loadings", "charts"},
       {"factors/factors.csv", "index/coarse_index.csv", "fit/loadings_full.csv", "windows/median_loadings.csv"},
       {"decompose/<region>.csv"}},
      {"scenario", "scenario mapping, doubling times and decomposed bands",
       {"scenario.f_M", "scenario.loadings", "horizon", "charts"},
       {"factors/factors.csv", "fit/loadings_full.csv", "windows/median_loadings.csv", "fans/factor_fans.csv"},
       {"scenario/regional_scenarios.csv", "scenario/bands.csv"}},
      {"breaks", "structural breaks in the mining factor",
       {"breaks.start", "breaks.end", "breaks.n_bkps", "breaks.cost", "breaks.min_size", "breaks.refine", "breaks.adf_max_lags",
        "breaks.min_regime_obs", "horizon", "fit.starts", "fit.max_iterations", "fit.tolerance", "charts"},
       {"factors/factors.csv", "select/factor_orders.csv"},
       {"breaks/breaks.json", "breaks/adf.csv", "breaks/regime_fan.csv"}},
      {"all", "build-index, pca, factors, select, fit, windows, fans, decompose, scenario, breaks",
       {},
       {},
       {}},
  };
  return list;
}

const CommandInfo& command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return c;
  throw ValidationError("unknown command '" + name + "'");
}

std::string error_json(const std::string& cmd, const std::string& code, const std::string& message) {
  Json j;
  j["status"] = "error";
  j["command"] = cmd;
  j["code"] = code;
  j["message"] = message;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Artifact helpers

namespace {

struct Ctx {
  const Config& cfg;
  std::ostream& log;
  std::string hash;
  fs::path dir;
  std::vector<std::string> written;

  fs::path path(const std::string& rel) const { return dir / rel; }

  csv::Writer writer(std::vector<std::string> header) const {
    csv::Writer w(std::move(header));
    w.meta("config_hash", hash);
    return w;
  }
  void save(const csv::Writer& w, const std::string& rel) {
    w.save(path(rel));
    written.push_back(rel);
  }
  void save_json(const Json& j, const std::string& rel) {
    const fs::path p = path(rel);
    fs::create_directories(p.parent_path());
    Json out = j;
    out["config_hash"] = hash;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("io", "cannot write " + p.string());
    f << out.dump(2) << "\n";
    written.push_back(rel);
  }
  csv::Table read(const std::string& rel) const {
    const fs::path p = path(rel);
    if (!fs::exists(p))
      throw Error("missing_artifact", "missing upstream artifact '" + rel + "' under " + dir.string());
    csv::Table t = csv::read(p);
    const auto it = t.meta.find("config_hash");
    if (it == t.meta.end() || it->second != hash)
      throw Error("config_mismatch", "artifact '" + rel + "' was produced by config " +
                                         (it == t.meta.end() ? std::string("<none>") : it->second) +
                                         ", current config is " + hash + "; rerun the upstream commands");
    return t;
  }
  Json read_json(const std::string& rel) const {
    const fs::path p = path(rel);
    if (!fs::exists(p))
      throw Error("missing_artifact", "missing upstream artifact '" + rel + "' under " + dir.string());
    std::ifstream f(p);
    Json j = Json::parse(f);
    if (j.value("config_hash", std::string()) != hash)
      throw Error("config_mismatch", "artifact '" + rel + "' was produced by a different config");
    return j;
  }
  bool charts() const { return cfg.flag("charts"); }
  void chart_lines(const std::string& csv_rel, const std::string& x, const std::vector<std::string>& ys,
                   const std::string& title) {
    if (!charts()) return;
    std::string rel = csv_rel.substr(0, csv_rel.size() - 4) + ".svg";
    svg::line_chart_from_csv(path(csv_rel), x, ys, title, path(rel));
    written.push_back(rel);
  }
};

std::string fmt(double v) { return csv::format_double(v); }

fs::path input_path(const Ctx& c, const std::string& key, const std::string& fallback) {
  const std::string v = c.cfg.text(key);
  return v.empty() ? c.dir / "synth" / fallback : fs::path(v);
}

ingest::RegionGraph load_graph(const Ctx& c) {
  return ingest::load_geography(input_path(c, "paths.nodes", "nodes.csv"), input_path(c, "paths.edges", "edges.csv"));
}

rsindex::IndexPanel read_panel(const Ctx& c, const std::string& rel) {
  c.read(rel);  // existence and hash check
  return rsindex::read_panel(c.path(rel));
}

Series column_series(const csv::Table& t, const std::string& name) {
  const auto ci = t.column(name);
  Series s;
  s.reserve(t.rows.size());
  for (const auto& row : t.rows) s.push_back(std::stod(row.at(ci)));
  return s;
}

factors::FactorSet load_factors(const Ctx& c) {
  return read_factors(c.path("factors/factors.csv"), c.hash);
}

tskit::FitOptions fit_options(const Config& cfg) {
  tskit::FitOptions o;
  o.starts = cfg.integer("fit.starts");
  o.max_iterations = cfg.integer("fit.max_iterations");
  o.tolerance = cfg.number("fit.tolerance");
  return o;
}

std::vector<int> ints(const Json& j) { return j.get<std::vector<int>>(); }

std::string safe_name(const std::string& s) {
  std::string o;
  for (char ch : s) o += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-') ? ch : '_';
  return o;
}

struct RegionOrder {
  std::string region;
  tskit::ArimaSpec spec;
};

std::vector<RegionOrder> read_region_orders(const Ctx& c) {
  const auto t = c.read("select/region_orders.csv");
  std::vector<RegionOrder> out;
  const auto cr = t.column("region"), cp = t.column("p"), cd = t.column("d"), cq = t.column("q"),
             cs = t.column("seasonal_q");
  for (const auto& row : t.rows) {
    RegionOrder o;
    o.region = row.at(cr);
    o.spec = tskit::ArimaSpec{std::stoi(row.at(cp)), std::stoi(row.at(cd)), std::stoi(row.at(cq)),
                              std::stoi(row.at(cs)), 12, true};
    out.push_back(o);
  }
  return out;
}

std::map<std::string, tskit::ArimaSpec> read_factor_orders(const Ctx& c) {
  const auto t = c.read("select/factor_orders.csv");
  std::map<std::string, tskit::ArimaSpec> out;
  const auto cf = t.column("factor"), cp = t.column("p"), cd = t.column("d"), cq = t.column("q");
  for (const auto& row : t.rows)
    out[row.at(cf)] =
        tskit::ArimaSpec{std::stoi(row.at(cp)), std::stoi(row.at(cd)), std::stoi(row.at(cq)), 0, 12, true};
  if (!out.count("mining") || !out.count("lifestyle")) throw ValidationError("factor_orders.csv is incomplete");
  return out;
}

double lb_p(const tskit::ArimaFit& f, int lag) {
  try {
    return tskit::ljung_box(f.residuals, lag).p_value;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

Json fit_report(const tskit::ArimaFit& f) {
  Json j;
  j["spec"] = f.spec.str();
  j["p"] = f.spec.p;
  j["d"] = f.spec.d;
  j["q"] = f.spec.q;
  j["seasonal_q"] = f.spec.seasonal_q;
  Json coef = Json::object(), se = Json::object();
  std::vector<double> values;
  for (double v : f.params.arma.phi) values.push_back(v);
  for (double v : f.params.arma.theta) values.push_back(v);
  if (f.spec.seasonal_q) values.push_back(f.params.arma.seasonal_theta);
  if (f.spec.intercept) values.push_back(f.params.intercept);
  for (double v : f.params.beta) values.push_back(v);
  for (std::size_t i = 0; i < f.param_names.size() && i < values.size(); ++i) {
    coef[f.param_names[i]] = values[i];
    const double s = i < f.std_errors.size() ? f.std_errors[i] : std::numeric_limits<double>::quiet_NaN();
    se[f.param_names[i]] = std::isfinite(s) ? Json(s) : Json(nullptr);
  }
  j["coefficients"] = coef;
  j["std_errors"] = se;
  j["std_error_method"] = "observed information (numerical Hessian of the profile likelihood)";
  j["sigma2"] = f.params.sigma2;
  j["loglik"] = f.loglik;
  j["aicc"] = f.aicc;
  j["nobs"] = f.nobs;
  j["n_params"] = f.n_params;
  const double p12 = lb_p(f, 12), p24 = lb_p(f, 24);
  j["lb12_p"] = std::isfinite(p12) ? Json(p12) : Json(nullptr);
  j["lb24_p"] = std::isfinite(p24) ? Json(p24) : Json(nullptr);
  j["converged"] = f.converged;
  j["boundary"] = f.boundary;
  j["message"] = f.message;
  return j;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(Ctx& c) {
  const auto wc = world_config(c.cfg);
  const auto world = synth::simulate_world(wc, c.cfg.threads);
  synth::write_world(c.path("synth"), world, {{"config_hash", c.hash}});
  for (const auto& f : commands().front().outputs) c.written.push_back(f);
  c.log << "[synth] " << world.fine.size() << " fine regions, " << world.transactions.size()
        << " transactions, factor draws " << world.factor_draws << "\n";
}

void cmd_build_index(Ctx& c) {
  const auto graph = load_graph(c);
  const Month start = Month::parse(c.cfg.text("sample.start"));
  const Month end = Month::parse(c.cfg.text("sample.end"));
  const Month base = Month::parse(c.cfg.text("sample.base_month"));
  if (end < start) throw ValidationError("sample.end precedes sample.start");
  const int T = (end - start) + 1;
  if (base < start || base > end) throw ValidationError("sample.base_month outside the sample");

  ingest::LoadOptions lo;
  lo.window_start = start;
  lo.window_end = end;
  lo.tolerance = c.cfg.number("ingest.tolerance");
  const auto loaded = ingest::load_transactions(input_path(c, "paths.transactions", "transactions.csv"), graph, {}, lo);
  ingest::PairOptions po;
  po.origin = start;
  po.filter_dlog = c.cfg.flag("ingest.filter_dlog");
  po.max_abs_dlog = c.cfg.number("ingest.max_abs_dlog");
  ingest::PairStats ps;
  const auto pairs = ingest::pair_repeat_sales(loaded.records, po, &ps);

  rsindex::RsOptions ro;
  ro.lambda_mu = c.cfg.number("rsindex.lambda_mu");
  ro.lambda_alpha = c.cfg.number("rsindex.lambda_alpha");
  ro.intercept = c.cfg.flag("rsindex.intercept");
  ro.base = base - start;
  const auto build = rsindex::estimate_indexes(pairs, graph, start, T, ro, c.cfg.threads);
  for (const auto& w : build.warnings) c.log << "[build-index] warning: " << w << "\n";

  const auto coarse = rsindex::aggregate(build.fine, graph, rsindex::Level::coarse);
  const auto national = rsindex::aggregate(build.fine, graph, rsindex::Level::national);
  const std::vector<std::pair<std::string, std::string>> meta{{"config_hash", c.hash}};
  rsindex::write_panel(c.path("index/fine_index.csv"), build.fine, meta);
  rsindex::write_panel(c.path("index/coarse_index.csv"), coarse, meta);
  rsindex::write_panel(c.path("index/national_index.csv"), national, meta);
  c.written.insert(c.written.end(), {"index/fine_index.csv", "index/coarse_index.csv", "index/national_index.csv"});

  Json j;
  j["base_month"] = base.str();
  j["months"] = T;
  j["penalties"] = {{"lambda_mu", ro.lambda_mu}, {"lambda_alpha", ro.lambda_alpha}};
  j["intercept"] = ro.intercept;
  j["records"] = {{"input_rows", loaded.input_rows}, {"accepted", loaded.records.size()},
                  {"rejected", loaded.rejects.size()}};
  std::map<std::string, int> reasons;
  for (const auto& r : loaded.rejects) ++reasons[r.reason];
  j["reject_reasons"] = reasons;
  j["pairs"] = {{"count", pairs.size()}, {"properties", ps.properties}, {"same_month_excluded", ps.same_month},
                {"dlog_filtered", ps.filtered}};
  for (const auto& f : build.fits)
    j["areas"].push_back({{"area", f.area},
                          {"regions", f.regions.size()},
                          {"pairs", f.n_pairs},
                          {"theta", f.theta},
                          {"sigma2", f.sigma2},
                          {"objective", f.objective},
                          {"relative_residual", f.relative_residual},
                          {"empty_months", f.empty_months.size()}});
  j["warnings"] = build.warnings;
  c.save_json(j, "index/index_meta.json");
  c.log << "[build-index] " << loaded.records.size() << " records (" << loaded.rejects.size() << " rejected), "
        << pairs.size() << " pairs, " << build.fits.size() << " areas\n";
}

std::vector<int> anchor_columns(const ingest::RegionGraph& g, const std::vector<std::string>& regions,
                                const std::string& id) {
  std::vector<int> cols;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto node = g.find(regions[i]);
    if (regions[i] == id || (node && g.coarse_of()[*node] == id)) cols.push_back(static_cast<int>(i));
  }
  return cols;
}

void cmd_pca(Ctx& c) {
  const auto fine = read_panel(c, "index/fine_index.csv");
  const auto nat = read_panel(c, "index/national_index.csv");
  const auto graph = load_graph(c);
  spectral::SignRules rules;
  rules.market = nat.series("national");
  rules.mining_anchor = anchor_columns(graph, fine.regions, c.cfg.text("factors.mining_region"));
  rules.lifestyle_anchor = anchor_columns(graph, fine.regions, c.cfg.text("factors.lifestyle_anchor"));
  const int q = c.cfg.integer("pca.q");
  const auto res = spectral::fit_pca(fine.values, q, rules);

  std::vector<std::string> lh{"region_id"}, ch{"month"};
  for (int k = 1; k <= q; ++k) {
    lh.push_back("pc" + std::to_string(k));
    ch.push_back("z" + std::to_string(k));
  }
  auto lw = c.writer(lh);
  for (std::size_t r = 0; r < fine.regions.size(); ++r) {
    std::vector<std::string> row{fine.regions[r]};
    for (int k = 0; k < q; ++k) row.push_back(fmt(res.loadings(k, static_cast<Eigen::Index>(r))));
    lw.row(row);
  }
  c.save(lw, "pca/loadings.csv");
  auto cw = c.writer(ch);
  for (std::size_t t = 0; t < fine.months.size(); ++t) {
    std::vector<std::string> row{fine.months[t].str()};
    for (int k = 0; k < q; ++k) row.push_back(fmt(res.components(static_cast<Eigen::Index>(t), k)));
    cw.row(row);
  }
  c.save(cw, "pca/components.csv");
  c.chart_lines("pca/components.csv", "month", std::vector<std::string>(ch.begin() + 1, ch.end()),
                "Principal component series");

  Json j;
  j["q"] = q;
  j["explained_variance"] = std::vector<double>(res.explained.data(), res.explained.data() + res.explained.size());
  j["singular_values"] =
      std::vector<double>(res.singular_values.data(), res.singular_values.data() + res.singular_values.size());
  Series z1(res.components.col(0).data(), res.components.col(0).data() + res.components.rows());
  j["corr_pc1_national"] = correlation(z1, *rules.market);
  j["centering"] = "per-region mean removed, no scaling";
  c.save_json(j, "pca/pca.json");
  c.log << "[pca] explained " << fmt(res.explained[0]) << (q > 1 ? ", " + fmt(res.explained[1]) : "")
        << (q > 2 ? ", " + fmt(res.explained[2]) : "") << "; corr(z1, U) = " << fmt(j["corr_pc1_national"].get<double>())
        << "\n";
}

void cmd_factors(Ctx& c) {
  const auto fine = read_panel(c, "index/fine_index.csv");
  const auto coarse = read_panel(c, "index/coarse_index.csv");
  const auto nat = read_panel(c, "index/national_index.csv");
  const auto loadings = c.read("pca/loadings.csv");
  const auto comps = c.read("pca/components.csv");
  const auto graph = load_graph(c);

  factors::FactorSet fs;
  fs.months = nat.months;
  fs.market = nat.series("national");
  const Series muP = coarse.series(c.cfg.text("factors.mining_region"));
  const Series muS = coarse.series(c.cfg.text("factors.base_region"));
  fs.alpha_ps = factors::trend_adjust_alpha(muP, muS, fs.market);
  fs.mining = factors::spread(muP, muS, fs.alpha_ps);

  std::vector<double> w(fine.regions.size());
  for (std::size_t r = 0; r < fine.regions.size(); ++r) w[r] = graph.weights()[graph.index(fine.regions[r])];
  std::vector<int> top, bottom;
  const auto top_cfg = c.cfg.at("factors.top").get<std::vector<std::string>>();
  const auto bot_cfg = c.cfg.at("factors.bottom").get<std::vector<std::string>>();
  std::string basket_source;
  if (!top_cfg.empty() || !bot_cfg.empty()) {
    if (top_cfg.empty() || bot_cfg.empty()) throw ValidationError("factors.top and factors.bottom must both be set");
    for (const auto& id : top_cfg) top.push_back(static_cast<int>(fine.column(id)));
    for (const auto& id : bot_cfg) bottom.push_back(static_cast<int>(fine.column(id)));
    basket_source = "config";
  } else {
    const auto c3 = loadings.find_column("pc3");
    if (!c3) throw ValidationError("pca/loadings.csv has no pc3 column (pca.q < 3)");
    std::vector<double> l3;
    for (const auto& row : loadings.rows) l3.push_back(std::stod(row.at(*c3)));
    if (l3.size() != fine.regions.size()) throw ValidationError("PCA loadings do not match the fine panel");
    const auto b = factors::select_baskets(l3, c.cfg.integer("factors.basket_size"));
    top = b.top;
    bottom = b.bottom;
    basket_source = "pc3 loadings";
  }
  for (int t : top)
    if (std::find(bottom.begin(), bottom.end(), t) != bottom.end())
      throw ValidationError("lifestyle baskets overlap on '" + fine.regions[t] + "'");
  const Series top_mean = factors::basket_mean(fine.values, top, w);
  const Series bot_mean = factors::basket_mean(fine.values, bottom, w);
  fs.alpha_l = factors::trend_adjust_alpha(top_mean, bot_mean, fs.market);
  fs.lifestyle = factors::spread(top_mean, bot_mean, fs.alpha_l);
  for (int t : top) fs.top.push_back(fine.regions[t]);
  for (int b : bottom) fs.bottom.push_back(fine.regions[b]);

  auto wr = c.writer({"month", "market", "mining", "lifestyle"});
  for (std::size_t t = 0; t < fs.size(); ++t)
    wr.row({fs.months[t].str(), fmt(fs.market[t]), fmt(fs.mining[t]), fmt(fs.lifestyle[t])});
  c.save(wr, "factors/factors.csv");
  c.chart_lines("factors/factors.csv", "month", {"market", "mining", "lifestyle"}, "Factor proxies");

  const Matrix C = factors::factor_correlations(fs);
  Json j;
  j["alpha_ps"] = fs.alpha_ps;
  j["alpha_l"] = fs.alpha_l;
  j["mining_region"] = c.cfg.text("factors.mining_region");
  j["base_region"] = c.cfg.text("factors.base_region");
  j["basket_source"] = basket_source;
  j["top"] = fs.top;
  j["bottom"] = fs.bottom;
  j["correlations"] = {{"market_mining", C(0, 1)}, {"market_lifestyle", C(0, 2)}, {"mining_lifestyle", C(1, 2)}};
  Json pcs;
  const std::vector<std::string> fac{"market", "mining", "lifestyle"};
  const std::vector<const Series*> fser{&fs.market, &fs.mining, &fs.lifestyle};
  for (int k = 1; k <= 3; ++k)
    if (auto ck = comps.find_column("z" + std::to_string(k)))
      pcs["z" + std::to_string(k) + "_" + fac[k - 1]] = correlation(column_series(comps, "z" + std::to_string(k)), *fser[k - 1]);
  j["pc_factor_correlations"] = pcs;
  c.save_json(j, "factors/factors.json");
  c.log << "[factors] alpha_PS = " << fmt(fs.alpha_ps) << ", alpha_L = " << fmt(fs.alpha_l) << "\n";
}

void cmd_select(Ctx& c) {
  const auto fs = load_factors(c);
  const auto coarse = read_panel(c, "index/coarse_index.csv");
  const auto opts = fit_options(c.cfg);
  const int h = c.cfg.integer("horizon");

  tskit::OrderGrid fg;
  fg.p = ints(c.cfg.at("select.factor_p"));
  fg.q = ints(c.cfg.at("select.factor_q"));
  fg.d = ints(c.cfg.at("select.factor_d"));
  tskit::SelectionRules fr;
  fr.delta_aicc = c.cfg.number("select.delta_aicc");
  fr.d1_margin = c.cfg.number("select.d1_margin");
  fr.exclude_boundary = c.cfg.flag("select.exclude_boundary");

  auto fw = c.writer({"factor", "p", "d", "q", "aicc", "lb12", "lb24", "sigma_h", "x95"});
  auto cw = c.writer({"factor", "p", "d", "q", "aicc", "ok", "boundary", "message"});
  const std::vector<std::pair<std::string, const Series*>> fac{{"mining", &fs.mining}, {"lifestyle", &fs.lifestyle}};
  std::vector<tskit::Selection> sels(2);
  std::vector<tskit::ArimaFit> fits(2);
  parallel_for(2, c.cfg.threads, [&](std::size_t i) {
    sels[i] = tskit::select_order(*fac[i].second, Matrix(static_cast<Eigen::Index>(fs.size()), 0), fg, fr, opts);
    fits[i] = tskit::fit(sels[i].spec, *fac[i].second, Matrix(static_cast<Eigen::Index>(fs.size()), 0), opts);
  });
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& f = fits[i];
    const double sd = tskit::forecast_fan(f, h).sd_at(h);
    fw.row({fac[i].first, std::to_string(f.spec.p), std::to_string(f.spec.d), std::to_string(f.spec.q), fmt(f.aicc),
            fmt(lb_p(f, 12)), fmt(lb_p(f, 24)), fmt(sd), fmt(std::exp(1.96 * sd))});
    for (const auto& cand : sels[i].candidates)
      cw.row({fac[i].first, std::to_string(cand.spec.p), std::to_string(cand.spec.d), std::to_string(cand.spec.q),
              cand.ok ? fmt(cand.aicc) : "nan", cand.ok ? "1" : "0", cand.boundary ? "1" : "0", cand.message});
    c.log << "[select] " << fac[i].first << " -> ARIMA" << f.spec.str() << "\n";
  }
  c.save(fw, "select/factor_orders.csv");
  c.save(cw, "select/factor_candidates.csv");

  tskit::OrderGrid rg;
  rg.p = ints(c.cfg.at("select.region_p"));
  rg.q = ints(c.cfg.at("select.region_q"));
  rg.d = {0};
  rg.seasonal_q = c.cfg.flag("select.seasonal_ma") ? 1 : 0;
  tskit::SelectionRules rr;
  rr.parsimony = false;
  rr.exclude_boundary = fr.exclude_boundary;
  const double thr = c.cfg.number("select.inclusion_threshold");
  const auto& regions = coarse.regions;
  std::vector<tskit::Selection> rsel(regions.size());
  std::vector<scenario::InclusionTest> inc(regions.size());
  const Matrix X = fs.exog(true);
  parallel_for(regions.size(), c.cfg.threads, [&](std::size_t r) {
    const Series y = coarse.series(regions[r]);
    rsel[r] = tskit::select_order(y, X, rg, rr, opts);
    inc[r] = scenario::lifestyle_inclusion_test(y, fs, rsel[r].spec, thr, opts);
  });
  auto rw = c.writer({"region", "p", "d", "q", "seasonal_q", "aicc"});
  auto iw = c.writer({"region", "aicc_2f", "aicc_3f", "delta", "include", "lb12_2f", "lb12_3f"});
  for (std::size_t r = 0; r < regions.size(); ++r) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& cand : rsel[r].candidates)
      if (cand.ok && cand.spec == rsel[r].spec) best = cand.aicc;
    const auto& s = rsel[r].spec;
    rw.row({regions[r], std::to_string(s.p), std::to_string(s.d), std::to_string(s.q), std::to_string(s.seasonal_q),
            fmt(best)});
    iw.row({regions[r], fmt(inc[r].aicc_2f), fmt(inc[r].aicc_3f), fmt(inc[r].delta), inc[r].include ? "1" : "0",
            fmt(inc[r].lb12_2f), fmt(inc[r].lb12_3f)});
  }
  c.save(rw, "select/region_orders.csv");
  c.save(iw, "select/lifestyle_inclusion.csv");
  c.log << "[select] " << regions.size() << " regional orders selected\n";
}

void cmd_fit(Ctx& c) {
  const auto fs = load_factors(c);
  const auto coarse = read_panel(c, "index/coarse_index.csv");
  const auto orders = read_region_orders(c);
  const auto opts = fit_options(c.cfg);
  const int h = c.cfg.integer("horizon");
  std::vector<scenario::RegionLoadings> out(orders.size());
  parallel_for(orders.size(), c.cfg.threads, [&](std::size_t i) {
    out[i] = scenario::fit_region(coarse.series(orders[i].region), fs, orders[i].spec, opts);
    out[i].region_id = orders[i].region;
  });
  auto w = c.writer({"region", "b", "beta", "beta_lci", "beta_uci", "lambda", "lambda_lci", "lambda_uci", "gamma",
                     "gamma_lci", "gamma_uci", "se_beta", "se_lambda", "se_gamma", "sigma2", "loglik", "aicc", "lb12",
                     "lb24", "sigma_eps_h", "converged"});
  Json reports = Json::object();
  for (const auto& l : out) {
    const auto& f = l.remainder_fit;
    const double seps = tskit::forecast_fan(f, h).sd_at(h);
    w.row({l.region_id, fmt(l.b), fmt(l.beta), fmt(l.beta - 1.96 * l.se_beta), fmt(l.beta + 1.96 * l.se_beta),
           fmt(l.lambda), fmt(l.lambda - 1.96 * l.se_lambda), fmt(l.lambda + 1.96 * l.se_lambda), fmt(l.gamma),
           fmt(l.gamma - 1.96 * l.se_gamma), fmt(l.gamma + 1.96 * l.se_gamma), fmt(l.se_beta), fmt(l.se_lambda),
           fmt(l.se_gamma), fmt(f.params.sigma2), fmt(f.loglik), fmt(f.aicc), fmt(lb_p(f, 12)), fmt(lb_p(f, 24)),
           fmt(seps), f.converged ? "1" : "0"});
    Json r = fit_report(f);
    r["exog_names"] = {"market", "mining", "lifestyle"};
    r["sigma_eps_h"] = seps;
    reports[l.region_id] = r;
  }
  c.save(w, "fit/loadings_full.csv");
  c.save_json({{"horizon", h}, {"regions", reports}}, "fit/fit_reports.json");
  c.log << "[fit] " << out.size() << " regional models fitted\n";
}

void cmd_windows(Ctx& c) {
  const auto fs = load_factors(c);
  const auto coarse = read_panel(c, "index/coarse_index.csv");
  const auto orders = read_region_orders(c);
  const auto opts = fit_options(c.cfg);
  const int min_window = c.cfg.integer("windows.min_window");
  std::vector<Month> endpoints;
  for (const Month& m : scenario::endpoint_grid(Month::parse(c.cfg.text("windows.first")),
                                                Month::parse(c.cfg.text("windows.last")),
                                                c.cfg.integer("windows.step"))) {
    if (m > fs.months.back()) {
      c.log << "[windows] warning: endpoint " << m.str() << " beyond the sample, skipped\n";
      continue;
    }
    endpoints.push_back(m);
  }
  std::vector<scenario::LoadingPath> paths(orders.size());
  parallel_for(orders.size(), c.cfg.threads, [&](std::size_t i) {
    paths[i] = scenario::expanding_windows(coarse.series(orders[i].region), fs, orders[i].spec, endpoints, min_window,
                                           opts);
  });
  const Month from = Month::parse(c.cfg.text("windows.median_from"));
  const Month to = Month::parse(c.cfg.text("windows.median_to"));
  auto mw = c.writer({"region", "b", "beta", "lambda", "gamma", "endpoints_used", "endpoints_failed"});
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const auto& p = paths[i];
    const std::string rel = "windows/path_" + safe_name(orders[i].region) + ".csv";
    auto pw = c.writer({"endpoint", "beta", "lambda", "gamma", "ok"});
    int used = 0, failed = 0;
    for (std::size_t k = 0; k < p.endpoints.size(); ++k) {
      pw.row({p.endpoints[k].str(), fmt(p.beta[k]), fmt(p.lambda[k]), fmt(p.gamma[k]), p.ok[k] ? "1" : "0"});
      if (p.endpoints[k] >= from && p.endpoints[k] <= to) (p.ok[k] ? used : failed)++;
    }
    c.save(pw, rel);
    c.chart_lines(rel, "endpoint", {"beta", "lambda", "gamma"}, "Expanding-window loadings: " + orders[i].region);
    auto med = scenario::median_loadings(p, from, to);
    const Series y = coarse.series(orders[i].region);
    // Intercept that centres the remainder over the sample.
    double b = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t)
      b += y[t] - med.beta * fs.market[t] - med.lambda * fs.mining[t] - med.gamma * fs.lifestyle[t];
    med.b = b / static_cast<double>(y.size());
    mw.row({orders[i].region, fmt(med.b), fmt(med.beta), fmt(med.lambda), fmt(med.gamma), std::to_string(used),
            std::to_string(failed)});
    if (failed > 0) c.log << "[windows] " << orders[i].region << ": " << failed << " endpoint fits failed\n";
  }
  c.save(mw, "windows/median_loadings.csv");
  c.log << "[windows] " << orders.size() << " regions x " << endpoints.size() << " endpoints\n";
}

struct LoadingRow {
  double b, beta, lambda, gamma;
};

std::map<std::string, LoadingRow> read_loadings(const Ctx& c, const std::string& mode) {
  std::string rel;
  if (mode == "median") rel = "windows/median_loadings.csv";
  else if (mode == "full") rel = "fit/loadings_full.csv";
  else throw ValidationError("scenario.loadings must be 'median' or 'full'");
  const auto t = c.read(rel);
  const auto cr = t.column("region"), cb = t.column("b"), cbe = t.column("beta"), cl = t.column("lambda"),
             cg = t.column("gamma");
  std::map<std::string, LoadingRow> out;
  for (const auto& row : t.rows)
    out[row.at(cr)] = {std::stod(row.at(cb)), std::stod(row.at(cbe)), std::stod(row.at(cl)), std::stod(row.at(cg))};
  return out;
}

void cmd_fans(Ctx& c) {
  const auto fs = load_factors(c);
  const auto orders = read_factor_orders(c);
  const auto opts = fit_options(c.cfg);
  const int h = c.cfg.integer("horizon");
  const std::vector<std::pair<std::string, const Series*>> fac{{"mining", &fs.mining}, {"lifestyle", &fs.lifestyle}};
  auto pw = c.writer({"factor", "p", "d", "q", "intercept", "phi1", "phi2", "phi3", "theta1", "theta2", "sigma",
                      "sigma2", "min_root_modulus"});
  std::vector<tskit::ForecastFan> fans;
  for (const auto& [name, y] : fac) {
    const auto spec = orders.at(name);
    const auto f = tskit::fit(spec, *y, Matrix(static_cast<Eigen::Index>(y->size()), 0), opts);
    const auto bad = tskit::check_fit(f);
    if (!bad.empty()) throw FitError(name + " factor fit violates invariants: " + bad.front());
    fans.push_back(tskit::forecast_fan(f, h));
    auto coef = [](const std::vector<double>& v, std::size_t i) {
      return i < v.size() ? fmt(v[i]) : std::string();
    };
    const auto mod = tskit::ar_root_moduli(f.params.arma.phi);
    pw.row({name, std::to_string(spec.p), std::to_string(spec.d), std::to_string(spec.q), fmt(f.params.intercept),
            coef(f.params.arma.phi, 0), coef(f.params.arma.phi, 1), coef(f.params.arma.phi, 2),
            coef(f.params.arma.theta, 0), coef(f.params.arma.theta, 1), fmt(std::sqrt(f.params.sigma2)),
            fmt(f.params.sigma2), mod.empty() ? std::string() : fmt(mod.front())});
  }
  c.save(pw, "fans/factor_params.csv");
  auto fw = c.writer({"h", "mining_mean", "mining_sd", "mining_lo", "mining_hi", "lifestyle_mean", "lifestyle_sd",
                      "lifestyle_lo", "lifestyle_hi"});
  for (int k = 1; k <= h; ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (const auto& fan : fans) {
      const double m = fan.mean_path[k - 1], s = fan.sd_at(k);
      row.insert(row.end(), {fmt(m), fmt(s), fmt(m - 1.96 * s), fmt(m + 1.96 * s)});
    }
    fw.row(row);
  }
  c.save(fw, "fans/factor_fans.csv");
  c.chart_lines("fans/factor_fans.csv", "h", {"mining_lo", "mining_mean", "mining_hi", "lifestyle_lo",
                                              "lifestyle_mean", "lifestyle_hi"},
                "Factor forecast fans (95%)");
  c.log << "[fans] sd(" << h << "): mining " << fmt(fans[0].sd_at(h)) << ", lifestyle " << fmt(fans[1].sd_at(h))
        << "\n";
}

void cmd_decompose(Ctx& c) {
  const auto fs = load_factors(c);
  const auto coarse = read_panel(c, "index/coarse_index.csv");
  const std::string mode = c.cfg.text("scenario.loadings");
  const auto load = read_loadings(c, mode);
  for (const auto& [region, lr] : load) {
    scenario::RegionLoadings l;
    l.b = lr.b;
    l.beta = lr.beta;
    l.lambda = lr.lambda;
    l.gamma = lr.gamma;
    const auto d = scenario::decompose(coarse.series(region), fs, l);
    const std::string rel = "decompose/" + safe_name(region) + ".csv";
    auto w = c.writer({"month", "observed", "market", "market_mining", "market_mining_lifestyle", "remainder"});
    for (std::size_t t = 0; t < d.observed.size(); ++t)
      w.row({fs.months[t].str(), fmt(d.observed[t]), fmt(d.market[t]), fmt(d.market_mining[t]),
             fmt(d.market_mining_lifestyle[t]), fmt(d.remainder[t])});
    c.save(w, rel);
    c.chart_lines(rel, "month", {"observed", "market", "market_mining", "market_mining_lifestyle"},
                  "Factor decomposition: " + region);
  }
  c.log << "[decompose] " << load.size() << " regions (" << mode << " loadings)\n";
}

void cmd_scenario(Ctx& c) {
  const auto fs = load_factors(c);
  const auto full = c.read("fit/loadings_full.csv");
  const std::string mode = c.cfg.text("scenario.loadings");
  const auto load = read_loadings(c, mode);
  const auto fans = c.read("fans/factor_fans.csv");
  const int h = c.cfg.integer("horizon");
  if (static_cast<int>(fans.rows.size()) < h) throw ValidationError("factor fans shorter than the horizon");
  const double s_ps = std::stod(fans.rows[h - 1].at(fans.column("mining_sd")));
  const double s_l = std::stod(fans.rows[h - 1].at(fans.column("lifestyle_sd")));
  std::map<std::string, double> s_eps;
  for (const auto& row : full.rows) s_eps[row.at(full.column("region"))] = std::stod(row.at(full.column("sigma_eps_h")));
  const double T_M = scenario::national_doubling_time(fs.market);
  const auto fM = c.cfg.at("scenario.f_M").get<std::vector<double>>();
  if (fM.empty()) throw ValidationError("scenario.f_M is empty");

  struct Row {
    std::string region;
    LoadingRow l;
    scenario::ScenarioBand band;
  };
  std::vector<Row> rows;
  for (const auto& [region, lr] : load) {
    if (!s_eps.count(region)) throw ValidationError("no remainder fan for region '" + region + "'");
    Row r{region, lr, scenario::uncertainty_band(lr.lambda, lr.gamma, s_ps, s_l, s_eps[region])};
    r.band.doubling_time_years = scenario::doubling_time(T_M, lr.beta);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.l.beta > b.l.beta; });

  auto tw = c.writer({"region", "beta", "lambda", "gamma", "f_r_at_2", "doubling_time", "x95", "x95_total"});
  tw.meta("T_M_years", fmt(T_M));
  tw.meta("loadings", mode);
  for (const auto& r : rows)
    tw.row({r.region, fmt(r.l.beta), fmt(r.l.lambda), fmt(r.l.gamma), fmt(scenario::scenario_map(2.0, r.l.beta)),
            fmt(r.band.doubling_time_years), fmt(r.band.x95_factors), fmt(r.band.x95_total)});
  c.save(tw, "scenario/regional_scenarios.csv");

  for (std::size_t k = 0; k < fM.size(); ++k) {
    const std::string rel = k == 0 ? "scenario/bands.csv" : "scenario/bands_fM_" + safe_name(fmt(fM[k])) + ".csv";
    auto bw = c.writer({"region", "f_r", "lo", "hi", "share_mining", "share_lifestyle", "share_idio"});
    bw.meta("f_M", fmt(fM[k]));
    for (const auto& r : rows) {
      const double fr = scenario::scenario_map(fM[k], r.l.beta);
      bw.row({r.region, fmt(fr), fmt(fr / r.band.x95_total), fmt(fr * r.band.x95_total), fmt(r.band.share_mining),
              fmt(r.band.share_lifestyle), fmt(r.band.share_idio)});
    }
    c.save(bw, rel);
    if (c.charts()) {
      const std::string svg_rel = rel.substr(0, rel.size() - 4) + ".svg";
      svg::interval_chart_from_csv(c.path(rel), "Scenario bands, f_M = " + fmt(fM[k]), fM[k], c.path(svg_rel));
      c.written.push_back(svg_rel);
    }
  }
  c.log << "[scenario] T_M = " << fmt(T_M) << " years, " << rows.size() << " regions\n";
}

void cmd_breaks(Ctx& c) {
  const auto fs = load_factors(c);
  const auto orders = read_factor_orders(c);
  const auto opts = fit_options(c.cfg);
  const int h = c.cfg.integer("horizon");
  const Month start = Month::parse(c.cfg.text("breaks.start"));
  const Month end = Month::parse(c.cfg.text("breaks.end"));
  const int a = start - fs.months.front();
  const int b = (end - fs.months.front()) + 1;
  if (a < 0 || b > static_cast<int>(fs.size()) || a >= b) throw ValidationError("break window outside the sample");
  const std::string cost_name = c.cfg.text("breaks.cost");
  breaks::Cost cost;
  if (cost_name == "linear") cost = breaks::Cost::linear_trend;
  else if (cost_name == "mean") cost = breaks::Cost::mean_shift;
  else throw ValidationError("breaks.cost must be 'linear' or 'mean'");

  const std::span<const double> window(fs.mining.data() + a, static_cast<std::size_t>(b - a));
  const auto rs = breaks::binary_segmentation(window, c.cfg.integer("breaks.n_bkps"), cost,
                                              c.cfg.integer("breaks.min_size"), c.cfg.flag("breaks.refine"));
  const auto slopes = breaks::segment_slopes(window, rs);
  const auto adf = breaks::adf_by_regime(window, rs, c.cfg.integer("breaks.adf_max_lags"),
                                         c.cfg.integer("breaks.min_regime_obs"));

  // Regimes over the full sample: the first and last regimes extend to the ends.
  breaks::RegimeSet full{static_cast<int>(fs.size()), {}};
  for (int bp : rs.breakpoints) full.breakpoints.push_back(bp + a);
  const auto rf = breaks::regime_adjusted_fan(fs.mining, full, orders.at("mining"), h, opts);

  auto aw = c.writer({"series", "start", "end", "statistic", "p_value", "used_lag", "sufficient"});
  Json adf_json = Json::array();
  for (const auto& r : adf) {
    const Month m0 = fs.months[static_cast<std::size_t>(a + r.start)];
    const Month m1 = fs.months[static_cast<std::size_t>(a + r.end - 1)];
    aw.row({r.label, m0.str(), m1.str(), r.sufficient ? fmt(r.result.statistic) : "", r.sufficient ? fmt(r.result.p_value) : "",
            r.sufficient ? std::to_string(r.result.used_lag) : "", r.sufficient ? "1" : "0"});
    Json e = {{"series", r.label}, {"start", m0.str()}, {"end", m1.str()}, {"sufficient", r.sufficient}};
    if (r.sufficient) {
      e["statistic"] = r.result.statistic;
      e["p_value"] = r.result.p_value;
    } else {
      e["note"] = "insufficient observations";
    }
    adf_json.push_back(e);
  }
  c.save(aw, "breaks/adf.csv");

  auto fw = c.writer({"h", "sd_adjusted", "sd_unconditional"});
  for (int k = 1; k <= h; ++k) fw.row({std::to_string(k), fmt(rf.adjusted_fan.sd_at(k)), fmt(rf.unconditional_fan.sd_at(k))});
  c.save(fw, "breaks/regime_fan.csv");
  c.chart_lines("breaks/regime_fan.csv", "h", {"sd_adjusted", "sd_unconditional"}, "Mining fan sd with and without regimes");

  Json j;
  j["window"] = {start.str(), end.str()};
  j["cost"] = cost_name;
  std::vector<std::string> bps;
  for (int bp : rs.breakpoints) bps.push_back(fs.months[static_cast<std::size_t>(a + bp)].str());
  j["breakpoints"] = bps;
  j["segment_slopes_per_month"] = slopes;
  j["adf"] = adf_json;
  j["horizon"] = h;
  j["sd_adjusted"] = rf.sd_adjusted;
  j["sd_unconditional"] = rf.sd_unconditional;
  j["x95_adjusted"] = rf.x95_adjusted;
  j["x95_unconditional"] = rf.x95_unconditional;
  j["aicc_adjusted"] = rf.adjusted.aicc;
  j["aicc_unconditional"] = rf.unconditional.aicc;
  c.save_json(j, "breaks/breaks.json");
  c.log << "[breaks] breakpoints";
  for (const auto& s : bps) c.log << " " << s;
  c.log << "; sd(" << h << ") adjusted " << fmt(rf.sd_adjusted) << " vs " << fmt(rf.sd_unconditional) << "\n";
}

void record_run(const Ctx& c, const std::string& name, double seconds) {
  const fs::path p = c.path("run.json");
  Json j;
  if (fs::exists(p)) {
    try {
      std::ifstream f(p);
      j = Json::parse(f);
    } catch (...) {
      j = Json::object();
    }
  }
  j["version"] = HPF_VERSION;
  j["run_id"] = c.cfg.run_id;
  j["config_hash"] = c.hash;
  j["seed"] = c.cfg.at("seed");
  j["threads"] = c.cfg.threads;
  j["config"] = c.cfg.json();
  j["commands"][name] = {{"seconds", seconds}, {"outputs", c.written}};
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << j.dump(2) << "\n";
}

}  // namespace

factors::FactorSet read_factors(const fs::path& path, const std::string& expect_hash) {
  if (!fs::exists(path)) throw Error("missing_artifact", "missing upstream artifact '" + path.string() + "'");
  const auto t = csv::read(path);
  if (!expect_hash.empty()) {
    const auto it = t.meta.find("config_hash");
    if (it == t.meta.end() || it->second != expect_hash)
      throw Error("config_mismatch", "artifact '" + path.string() + "' was produced by a different config");
  }
  factors::FactorSet fs;
  const auto cm = t.column("month");
  for (const auto& row : t.rows) fs.months.push_back(Month::parse(row.at(cm)));
  fs.market = column_series(t, "market");
  fs.mining = column_series(t, "mining");
  fs.lifestyle = column_series(t, "lifestyle");
  // alpha values and baskets live in the JSON sidecar next to the CSV.
  const fs::path side = path.parent_path() / "factors.json";
  if (fs::exists(side)) {
    std::ifstream f(side);
    const Json j = Json::parse(f);
    fs.alpha_ps = j.value("alpha_ps", 1.0);
    fs.alpha_l = j.value("alpha_l", 1.0);
    fs.top = j.value("top", std::vector<std::string>{});
    fs.bottom = j.value("bottom", std::vector<std::string>{});
  }
  return fs;
}

void run(const std::string& name, const Config& cfg, std::ostream& log) {
  if (name == "all") {
    for (const char* step : {"build-index", "pca", "factors", "select", "fit", "windows", "fans", "decompose",
                             "scenario", "breaks"})
      run(step, cfg, log);
    return;
  }
  command(name);  // validates the name
  Ctx c{cfg, log, cfg.hash(), cfg.run_dir(), {}};
  const auto t0 = std::chrono::steady_clock::now();
  if (name == "synth") cmd_synth(c);
  else if (name == "build-index") cmd_build_index(c);
  else if (name == "pca") cmd_pca(c);
  else if (name == "factors") cmd_factors(c);
  else if (name == "select") cmd_select(c);
  else if (name == "fit") cmd_fit(c);
  else if (name == "windows") cmd_windows(c);
  else if (name == "fans") cmd_fans(c);
  else if (name == "decompose") cmd_decompose(c);
  else if (name == "scenario") cmd_scenario(c);
  else if (name == "breaks") cmd_breaks(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  record_run(c, name, secs);
}

}  // namespace hpf::pipeline
