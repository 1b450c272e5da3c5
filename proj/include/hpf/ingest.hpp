#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpf/common.hpp"

namespace hpf::ingest {

struct TransactionRecord {
  std::string property_id;
  double price = 0.0;
  Month date;
  std::string region_id;
  friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

struct RepeatSalePair {
  std::string property_id;
  int t1 = 0;  // month index relative to the panel origin
  int t2 = 0;
  double dlog_price = 0.0;
  std::string region_id;
  friend bool operator==(const RepeatSalePair&, const RepeatSalePair&) = default;
};

/// Fine regions (nodes), adjacency, fine -> coarse map and aggregation weights.
class RegionGraph {
 public:
  RegionGraph() = default;
  RegionGraph(std::vector<std::string> nodes, std::vector<std::string> coarse,
              std::vector<double> weights, const std::vector<std::pair<std::string, std::string>>& edges);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<std::string>& coarse_of() const { return coarse_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }

  std::optional<int> find(const std::string& id) const;
  int index(const std::string& id) const;  // throws when unknown
  int degree(int i) const;

  /// Coarse ids in order of first appearance in the node list.
  std::vector<std::string> coarse_ids() const;
  /// Fine-node indexes belonging to one coarse region, in node order.
  std::vector<int> members(const std::string& coarse_id) const;

  void set_weights(std::vector<double> w);

 private:
  void validate() const;
  std::vector<std::string> nodes_;
  std::vector<std::string> coarse_;
  std::vector<double> weights_;
  std::vector<std::pair<int, int>> edges_;  // a < b
  std::map<std::string, int> index_;
};

struct Schema {
  std::string property_id = "property_id";
  std::string price = "price";
  std::string date = "date";
  std::string region_id = "region_id";
};

struct LoadOptions {
  std::optional<Month> window_start;
  std::optional<Month> window_end;  // inclusive
  double tolerance = 0.05;          // max fraction of unparseable rows
};

struct Rejection {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<TransactionRecord> records;
  std::vector<Rejection> rejects;
  std::size_t input_rows = 0;
};

/// Reads and validates a transactions file. Rows with bad values are rejected
/// with a reason; an unknown region id is an error.
LoadResult load_transactions(const std::filesystem::path& path, const RegionGraph& graph,
                             const Schema& schema = {}, const LoadOptions& options = {});
LoadResult parse_transactions(const std::string& text, const RegionGraph* graph,
                              const Schema& schema = {}, const LoadOptions& options = {});

void write_transactions(const std::filesystem::path& path, const std::vector<TransactionRecord>& records);

struct PairOptions {
  Month origin{1995, 1};
  bool filter_dlog = true;
  double max_abs_dlog = 2.302585092994046;  // ln 10
};

struct PairStats {
  std::size_t properties = 0;
  std::size_t same_month = 0;
  std::size_t filtered = 0;
};

/// Consecutive pairs per property after sorting its sales by date; same-month
/// re-sales produce no pair. Output is sorted by (property, t1).
std::vector<RepeatSalePair> pair_repeat_sales(const std::vector<TransactionRecord>& records,
                                              const PairOptions& options = {}, PairStats* stats = nullptr);

/// Reads nodes.csv (`region_id,coarse_id,weight`) and edges.csv (`region_a,region_b`).
RegionGraph load_geography(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path);
RegionGraph parse_geography(const std::string& nodes_csv, const std::string& edges_csv);
void write_geography(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const RegionGraph& graph);

}  // namespace hpf::ingest
