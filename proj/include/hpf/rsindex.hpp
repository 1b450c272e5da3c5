#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "hpf/common.hpp"
#include "hpf/ingest.hpp"

namespace hpf::rsindex {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LaplacianSet {
  SparseMatrix Lt;   // path graph over months, T x T
  SparseMatrix Ls;   // degree minus adjacency, R x R
  SparseMatrix Lst;  // Ls (x) Lt, region-major ordering of (r, t)
};

SparseMatrix path_laplacian(int T);
SparseMatrix graph_laplacian(int n, const std::vector<std::pair<int, int>>& edges);
SparseMatrix kronecker(const SparseMatrix& A, const SparseMatrix& B);

LaplacianSet build_laplacians(const ingest::RegionGraph& graph, int T);

struct RsOptions {
  double lambda_mu = 1.0;
  double lambda_alpha = 10.0;
  int base = 0;            // month index pinned to zero
  bool intercept = true;   // per-pair constant theta
  double tolerance = 1e-8; // relative residual of the normal equations
};

/// One coarse area's estimate.
struct RsFit {
  std::string area;
  std::vector<std::string> regions;  // fine regions of the area, in graph order
  double theta = 0.0;
  Vector mu;     // T
  Matrix alpha;  // R x T
  double lambda_mu = 0.0, lambda_alpha = 0.0;
  double sigma2 = 0.0;
  double objective = 0.0;
  double relative_residual = 0.0;
  int n_pairs = 0;
  std::vector<int> empty_months;  // months touched by no pair

  /// Fine-region log index mu + alpha_r, T x R.
  Matrix fine_index() const;
};

/// Minimizes the penalized repeat-sales objective for one area. `regions` are
/// the fine regions in the area and `edges` are index pairs into `regions`.
/// Identification: mu[base] = 0, alpha[r, base] = 0 and sum_r alpha[r, t] = 0.
RsFit estimate_area(const std::vector<ingest::RepeatSalePair>& pairs, const std::vector<std::string>& regions,
                    const std::vector<std::pair<int, int>>& edges, int T, const RsOptions& options = {},
                    const std::string& area = {});

/// Penalized objective evaluated at an arbitrary (theta, mu, alpha).
double objective(const std::vector<ingest::RepeatSalePair>& pairs, const std::vector<std::string>& regions,
                 const std::vector<std::pair<int, int>>& edges, double theta, const Vector& mu,
                 const Matrix& alpha, const RsOptions& options);

struct IndexPanel {
  std::vector<Month> months;
  std::vector<std::string> regions;
  Matrix values;  // T x R log index
  int base = 0;

  std::size_t column(const std::string& region) const;
  Series series(const std::string& region) const;
};

struct IndexBuild {
  std::vector<RsFit> fits;  // one per coarse area, in coarse_ids() order
  IndexPanel fine;          // columns in graph node order
  std::vector<std::string> warnings;
};

/// Estimates every coarse area (optionally in parallel) and assembles the
/// fine-region panel.
IndexBuild estimate_indexes(const std::vector<ingest::RepeatSalePair>& pairs, const ingest::RegionGraph& graph,
                            Month start, int T, const RsOptions& options = {}, int threads = 1);

enum class Level { coarse, national };

/// Weighted mean of fine-region indexes with the graph weights.
IndexPanel aggregate(const IndexPanel& fine, const ingest::RegionGraph& graph, Level level);

void write_panel(const std::filesystem::path& path, const IndexPanel& panel,
                 const std::vector<std::pair<std::string, std::string>>& meta = {});
IndexPanel read_panel(const std::filesystem::path& path);

}  // namespace hpf::rsindex
