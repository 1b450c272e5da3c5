#include "hpf/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hpf/csv.hpp"

namespace hpf::ingest {

RegionGraph::RegionGraph(std::vector<std::string> nodes, std::vector<std::string> coarse,
                         std::vector<double> weights,
                         const std::vector<std::pair<std::string, std::string>>& edges)
    : nodes_(std::move(nodes)), coarse_(std::move(coarse)), weights_(std::move(weights)) {
  if (coarse_.size() != nodes_.size() || weights_.size() != nodes_.size())
    throw ValidationError("region graph: node, coarse and weight lists differ in length");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].empty()) throw ValidationError("region graph: empty region id");
    if (!index_.emplace(nodes_[i], static_cast<int>(i)).second)
      throw ValidationError("region graph: duplicate region '" + nodes_[i] + "'");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : edges) {
    auto ia = find(a), ib = find(b);
    if (!ia) throw ValidationError("edge endpoint '" + a + "' is not a known region");
    if (!ib) throw ValidationError("edge endpoint '" + b + "' is not a known region");
    if (*ia == *ib) throw ValidationError("self-loop on region '" + a + "'");
    const auto e = std::minmax(*ia, *ib);
    if (!seen.insert(e).second) throw ValidationError("duplicate edge " + a + " - " + b);
    edges_.push_back(e);
  }
  validate();
}

void RegionGraph::validate() const {
  std::map<std::string, double> total;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (coarse_[i].empty()) throw ValidationError("region '" + nodes_[i] + "' has no coarse mapping");
    if (!(weights_[i] >= 0) || !std::isfinite(weights_[i]))
      throw ValidationError("region '" + nodes_[i] + "' has a negative or invalid weight");
    total[coarse_[i]] += weights_[i];
  }
  for (const auto& [c, w] : total)
    if (!(w > 0)) throw ValidationError("coarse region '" + c + "' has zero total weight");
}

void RegionGraph::set_weights(std::vector<double> w) {
  if (w.size() != nodes_.size()) throw ValidationError("weight vector has wrong length");
  weights_ = std::move(w);
  validate();
}

std::optional<int> RegionGraph::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int RegionGraph::index(const std::string& id) const {
  if (auto i = find(id)) return *i;
  throw ValidationError("unknown region '" + id + "'");
}

int RegionGraph::degree(int i) const {
  int d = 0;
  for (const auto& [a, b] : edges_) d += (a == i) + (b == i);
  return d;
}

std::vector<std::string> RegionGraph::coarse_ids() const {
  std::vector<std::string> out;
  for (const auto& c : coarse_)
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  return out;
}

std::vector<int> RegionGraph::members(const std::string& coarse_id) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < coarse_.size(); ++i)
    if (coarse_[i] == coarse_id) out.push_back(static_cast<int>(i));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

LoadResult parse_transactions(const std::string& text, const RegionGraph* graph, const Schema& schema,
                              const LoadOptions& options) {
  const csv::Table t = csv::parse(text);
  const auto c_id = t.column(schema.property_id);
  const auto c_price = t.column(schema.price);
  const auto c_date = t.column(schema.date);
  const auto c_region = t.column(schema.region_id);
  const std::size_t need = std::max({c_id, c_price, c_date, c_region}) + 1;

  LoadResult out;
  out.input_rows = t.rows.size();
  out.records.reserve(t.rows.size());
  std::size_t unparseable = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    if (row.size() < need) {
      out.rejects.push_back({line, "too few fields"});
      ++unparseable;
      continue;
    }
    TransactionRecord r;
    r.property_id = row[c_id];
    r.region_id = row[c_region];
    if (r.property_id.empty()) {
      out.rejects.push_back({line, "empty property id"});
      ++unparseable;
      continue;
    }
    const auto price = to_double(row[c_price]);
    if (!price || !std::isfinite(*price)) {
      out.rejects.push_back({line, "unparseable price"});
      ++unparseable;
      continue;
    }
    try {
      r.date = Month::parse(row[c_date]);
    } catch (const Error&) {
      out.rejects.push_back({line, "unparseable date"});
      ++unparseable;
      continue;
    }
    if (graph && !graph->find(r.region_id))
      throw ValidationError("line " + std::to_string(line) + ": unknown region_id '" + r.region_id + "'");
    r.price = *price;
    if (!(r.price > 0)) {
      out.rejects.push_back({line, "nonpositive price"});
      continue;
    }
    if ((options.window_start && r.date < *options.window_start) ||
        (options.window_end && r.date > *options.window_end)) {
      out.rejects.push_back({line, "date outside sample window"});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  if (out.input_rows > 0 &&
      static_cast<double>(unparseable) > options.tolerance * static_cast<double>(out.input_rows))
    throw ValidationError(std::to_string(unparseable) + " of " + std::to_string(out.input_rows) +
                          " rows are unparseable (tolerance " + csv::format_double(options.tolerance) + ")");
  return out;
}

LoadResult load_transactions(const std::filesystem::path& path, const RegionGraph& graph,
                             const Schema& schema, const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw Error("missing_file", "transactions file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_transactions(ss.str(), &graph, schema, options);
}

void write_transactions(const std::filesystem::path& path, const std::vector<TransactionRecord>& records) {
  csv::Writer w({"property_id", "price", "date", "region_id"});
  for (const auto& r : records) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", r.price);
    w.row({r.property_id, buf, r.date.str(), r.region_id});
  }
  w.save(path);
}

std::vector<RepeatSalePair> pair_repeat_sales(const std::vector<TransactionRecord>& records,
                                              const PairOptions& options, PairStats* stats) {
  std::vector<const TransactionRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  // Total order so the result does not depend on input order.
  std::sort(sorted.begin(), sorted.end(), [](const TransactionRecord* a, const TransactionRecord* b) {
    if (a->property_id != b->property_id) return a->property_id < b->property_id;
    if (a->date != b->date) return a->date < b->date;
    if (a->price != b->price) return a->price < b->price;
    return a->region_id < b->region_id;
  });
  PairStats st;
  std::vector<RepeatSalePair> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i]->property_id != sorted[i - 1]->property_id) {
      ++st.properties;
      continue;
    }
    const auto& a = *sorted[i - 1];
    const auto& b = *sorted[i];
    if (a.date == b.date) {
      ++st.same_month;
      continue;
    }
    RepeatSalePair p;
    p.property_id = b.property_id;
    p.t1 = a.date - options.origin;
    p.t2 = b.date - options.origin;
    p.dlog_price = std::log(b.price) - std::log(a.price);
    p.region_id = b.region_id;
    if (!std::isfinite(p.dlog_price) || (options.filter_dlog && std::abs(p.dlog_price) > options.max_abs_dlog)) {
      ++st.filtered;
      continue;
    }
    out.push_back(std::move(p));
  }
  if (stats) *stats = st;
  return out;
}

RegionGraph parse_geography(const std::string& nodes_csv, const std::string& edges_csv) {
  const csv::Table nt = csv::parse(nodes_csv);
  const auto c_id = nt.column("region_id"), c_coarse = nt.column("coarse_id"), c_w = nt.column("weight");
  std::vector<std::string> nodes, coarse;
  std::vector<double> weights;
  for (std::size_t i = 0; i < nt.rows.size(); ++i) {
    const auto& row = nt.rows[i];
    const std::string where = "nodes line " + std::to_string(nt.line_numbers[i]);
    if (row.size() <= std::max({c_id, c_coarse, c_w})) throw ValidationError(where + ": too few fields");
    const auto w = to_double(row[c_w]);
    if (!w) throw ValidationError(where + ": unparseable weight");
    if (*w < 0) throw ValidationError(where + ": negative weight for region '" + row[c_id] + "'");
    if (row[c_coarse].empty()) throw ValidationError(where + ": region '" + row[c_id] + "' has no coarse mapping");
    nodes.push_back(row[c_id]);
    coarse.push_back(row[c_coarse]);
    weights.push_back(*w);
  }
  const csv::Table et = csv::parse(edges_csv);
  const auto c_a = et.column("region_a"), c_b = et.column("region_b");
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& row : et.rows) {
    if (row.size() <= std::max(c_a, c_b)) throw ValidationError("edges: too few fields");
    edges.emplace_back(row[c_a], row[c_b]);
  }
  return RegionGraph(std::move(nodes), std::move(coarse), std::move(weights), edges);
}

RegionGraph load_geography(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("missing_file", "geography file not found: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return parse_geography(slurp(nodes_path), slurp(edges_path));
}

void write_geography(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const RegionGraph& graph) {
  csv::Writer n({"region_id", "coarse_id", "weight"});
  for (std::size_t i = 0; i < graph.size(); ++i)
    n.row({graph.nodes()[i], graph.coarse_of()[i], csv::format_double(graph.weights()[i])});
  n.save(nodes_path);
  csv::Writer e({"region_a", "region_b"});
  for (const auto& [a, b] : graph.edges()) e.row({graph.nodes()[a], graph.nodes()[b]});
  e.save(edges_path);
}

}  // namespace hpf::ingest
