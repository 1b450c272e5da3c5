#include "hpf/rsindex.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <set>

#include "hpf/csv.hpp"

namespace hpf::rsindex {

using Triplet = Eigen::Triplet<double>;

SparseMatrix path_laplacian(int T) {
  if (T < 1) throw ValidationError("path Laplacian needs T >= 1");
  std::vector<std::pair<int, int>> e;
  for (int t = 0; t + 1 < T; ++t) e.emplace_back(t, t + 1);
  return graph_laplacian(T, e);
}

SparseMatrix graph_laplacian(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<Triplet> trip;
  for (const auto& [a, b] : edges) {
    trip.emplace_back(a, a, 1.0);
    trip.emplace_back(b, b, 1.0);
    trip.emplace_back(a, b, -1.0);
    trip.emplace_back(b, a, -1.0);
  }
  SparseMatrix L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

SparseMatrix kronecker(const SparseMatrix& A, const SparseMatrix& B) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(A.nonZeros() * B.nonZeros()));
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SparseMatrix::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SparseMatrix::InnerIterator ib(B, kb); ib; ++ib)
          trip.emplace_back(ia.row() * B.rows() + ib.row(), ia.col() * B.cols() + ib.col(),
                            ia.value() * ib.value());
  SparseMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

LaplacianSet build_laplacians(const ingest::RegionGraph& graph, int T) {
  if (T < 2) throw ValidationError("need at least two months");
  LaplacianSet s;
  s.Lt = path_laplacian(T);
  s.Ls = graph_laplacian(static_cast<int>(graph.size()), graph.edges());
  s.Lst = kronecker(s.Ls, s.Lt);
  return s;
}

Matrix RsFit::fine_index() const {
  Matrix out(mu.size(), alpha.rows());
  for (Eigen::Index r = 0; r < alpha.rows(); ++r) out.col(r) = mu + alpha.row(r).transpose();
  return out;
}

namespace {

struct Layout {
  int T = 0, R = 0;
  bool intercept = true;
  // Full vector z = [theta, mu(0..T-1), alpha(r, t) region-major].
  int full() const { return 1 + T + R * T; }
  int mu(int t) const { return 1 + t; }
  int alpha(int r, int t) const { return 1 + T + r * T + t; }
};

// Sparse design row for each pair in the full parameterization.
SparseMatrix design(const std::vector<ingest::RepeatSalePair>& pairs, const std::map<std::string, int>& idx,
                    const Layout& L) {
  std::vector<Triplet> trip;
  trip.reserve(pairs.size() * 5);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const auto it = idx.find(p.region_id);
    if (it == idx.end()) throw ValidationError("pair references region '" + p.region_id + "' outside the area");
    if (p.t1 < 0 || p.t2 >= L.T || p.t1 >= p.t2)
      throw ValidationError("pair for property '" + p.property_id + "' has months outside the window");
    const int r = it->second;
    const auto row = static_cast<int>(i);
    trip.emplace_back(row, 0, 1.0);
    trip.emplace_back(row, L.mu(p.t2), 1.0);
    trip.emplace_back(row, L.mu(p.t1), -1.0);
    trip.emplace_back(row, L.alpha(r, p.t2), 1.0);
    trip.emplace_back(row, L.alpha(r, p.t1), -1.0);
  }
  SparseMatrix D(static_cast<Eigen::Index>(pairs.size()), L.full());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

SparseMatrix penalty(const std::vector<std::pair<int, int>>& edges, const Layout& L, const RsOptions& o) {
  const SparseMatrix Lt = path_laplacian(L.T);
  const SparseMatrix Lst = kronecker(graph_laplacian(L.R, edges), Lt);
  std::vector<Triplet> trip;
  for (int k = 0; k < Lt.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Lt, k); it; ++it)
      trip.emplace_back(1 + it.row(), 1 + it.col(), o.lambda_mu * it.value());
  for (int k = 0; k < Lst.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Lst, k); it; ++it)
      trip.emplace_back(1 + L.T + it.row(), 1 + L.T + it.col(), o.lambda_alpha * it.value());
  SparseMatrix P(L.full(), L.full());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

// Maps the reduced unknowns onto the full vector: z = G x.
SparseMatrix reduction(const Layout& L, int base) {
  std::vector<Triplet> trip;
  int col = 0;
  if (L.intercept) trip.emplace_back(0, col++, 1.0);
  for (int t = 0; t < L.T; ++t)
    if (t != base) trip.emplace_back(L.mu(t), col++, 1.0);
  // alpha[R-1, t] = -sum_{r<R-1} alpha[r, t]; with one region alpha is zero.
  for (int r = 0; r + 1 < L.R; ++r)
    for (int t = 0; t < L.T; ++t) {
      if (t == base) continue;
      trip.emplace_back(L.alpha(r, t), col, 1.0);
      trip.emplace_back(L.alpha(L.R - 1, t), col, -1.0);
      ++col;
    }
  SparseMatrix G(L.full(), col);
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

}  // namespace

double objective(const std::vector<ingest::RepeatSalePair>& pairs, const std::vector<std::string>& regions,
                 const std::vector<std::pair<int, int>>& edges, double theta, const Vector& mu,
                 const Matrix& alpha, const RsOptions& options) {
  Layout L{static_cast<int>(mu.size()), static_cast<int>(regions.size()), options.intercept};
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < regions.size(); ++i) idx[regions[i]] = static_cast<int>(i);
  Vector z(L.full());
  z[0] = theta;
  z.segment(1, L.T) = mu;
  for (int r = 0; r < L.R; ++r) z.segment(L.alpha(r, 0), L.T) = alpha.row(r).transpose();
  const SparseMatrix D = design(pairs, idx, L);
  Vector y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) y[static_cast<Eigen::Index>(i)] = pairs[i].dlog_price;
  const SparseMatrix P = penalty(edges, L, options);
  const Vector e = y - D * z;
  return e.squaredNorm() + z.dot(P * z);
}

RsFit estimate_area(const std::vector<ingest::RepeatSalePair>& pairs, const std::vector<std::string>& regions,
                    const std::vector<std::pair<int, int>>& edges, int T, const RsOptions& options,
                    const std::string& area) {
  if (options.lambda_mu < 0 || options.lambda_alpha < 0) throw ValidationError("penalties must be nonnegative");
  if (pairs.empty()) throw ValidationError("area '" + area + "' has no repeat-sale pairs");
  if (regions.empty()) throw ValidationError("area '" + area + "' has no regions");
  if (T < 2) throw ValidationError("need at least two months");
  if (options.base < 0 || options.base >= T) throw ValidationError("base month outside the window");

  Layout L{T, static_cast<int>(regions.size()), options.intercept};
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < regions.size(); ++i) idx[regions[i]] = static_cast<int>(i);

  const SparseMatrix D = design(pairs, idx, L);
  Vector y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) y[static_cast<Eigen::Index>(i)] = pairs[i].dlog_price;
  const SparseMatrix P = penalty(edges, L, options);
  const SparseMatrix G = reduction(L, options.base);

  const SparseMatrix DG = D * G;
  SparseMatrix A = SparseMatrix(DG.transpose() * DG) + SparseMatrix(G.transpose() * P * G);
  A.makeCompressed();
  const Vector b = DG.transpose() * y;

  Eigen::SimplicialLDLT<SparseMatrix> solver;
  solver.compute(A);
  const std::string where = area.empty() ? std::string("area") : "area '" + area + "'";
  if (solver.info() != Eigen::Success) throw SingularSystemError(where + ": factorization failed");
  const Vector d = solver.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.cwiseAbs().minCoeff() > 1e-12 * dmax))
    throw SingularSystemError(where + ": normal equations are singular after normalization "
                              "(empty months with zero penalty, or a disconnected area)");
  Vector x = solver.solve(b);
  // One step of iterative refinement keeps the residual at solver precision.
  x += solver.solve(b - A * x);
  const double bn = b.norm();
  const double rel = bn > 0 ? (A * x - b).norm() / bn : (A * x - b).norm();
  if (!(rel <= options.tolerance))
    throw SingularSystemError(where + ": relative residual " + csv::format_double(rel) + " above tolerance");

  const Vector z = G * x;
  RsFit fit;
  fit.area = area;
  fit.regions = regions;
  fit.theta = options.intercept ? z[0] : 0.0;
  fit.mu = z.segment(1, T);
  fit.alpha.resize(L.R, T);
  for (int r = 0; r < L.R; ++r) fit.alpha.row(r) = z.segment(L.alpha(r, 0), T).transpose();
  fit.lambda_mu = options.lambda_mu;
  fit.lambda_alpha = options.lambda_alpha;
  const Vector e = y - D * z;
  fit.sigma2 = e.squaredNorm() / static_cast<double>(pairs.size());
  fit.objective = e.squaredNorm() + z.dot(P * z);
  fit.relative_residual = rel;
  fit.n_pairs = static_cast<int>(pairs.size());
  std::vector<char> touched(static_cast<std::size_t>(T), 0);
  for (const auto& p : pairs) touched[p.t1] = touched[p.t2] = 1;
  for (int t = 0; t < T; ++t)
    if (!touched[t]) fit.empty_months.push_back(t);
  return fit;
}

std::size_t IndexPanel::column(const std::string& region) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i] == region) return i;
  throw ValidationError("panel has no region '" + region + "'");
}

Series IndexPanel::series(const std::string& region) const {
  const auto c = static_cast<Eigen::Index>(column(region));
  Series s(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index t = 0; t < values.rows(); ++t) s[t] = values(t, c);
  return s;
}

IndexBuild estimate_indexes(const std::vector<ingest::RepeatSalePair>& pairs, const ingest::RegionGraph& graph,
                            Month start, int T, const RsOptions& options, int threads) {
  const auto areas = graph.coarse_ids();
  std::vector<std::vector<ingest::RepeatSalePair>> by_area(areas.size());
  std::map<std::string, std::size_t> area_index;
  for (std::size_t a = 0; a < areas.size(); ++a) area_index[areas[a]] = a;
  std::vector<int> per_node(graph.size(), 0);
  for (const auto& p : pairs) {
    const int node = graph.index(p.region_id);
    ++per_node[static_cast<std::size_t>(node)];
    by_area[area_index[graph.coarse_of()[node]]].push_back(p);
  }

  IndexBuild out;
  for (std::size_t i = 0; i < graph.size(); ++i)
    if (per_node[i] == 0)
      out.warnings.push_back("region '" + graph.nodes()[i] + "' has no repeat-sale pairs; its index comes from the penalty alone");
  out.fits.resize(areas.size());
  parallel_for(areas.size(), threads, [&](std::size_t a) {
    const auto members = graph.members(areas[a]);
    std::vector<std::string> regions;
    std::map<int, int> local;
    for (int m : members) {
      local[m] = static_cast<int>(regions.size());
      regions.push_back(graph.nodes()[m]);
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& [u, v] : graph.edges())
      if (local.count(u) && local.count(v)) edges.emplace_back(local[u], local[v]);
    out.fits[a] = estimate_area(by_area[a], regions, edges, T, options, areas[a]);
  });

  out.fine.months = month_range(start, T);
  out.fine.regions = graph.nodes();
  out.fine.base = options.base;
  out.fine.values.resize(T, static_cast<Eigen::Index>(graph.size()));
  for (const auto& f : out.fits) {
    const Matrix idx = f.fine_index();
    for (std::size_t r = 0; r < f.regions.size(); ++r)
      out.fine.values.col(graph.index(f.regions[r])) = idx.col(static_cast<Eigen::Index>(r));
    if (!f.empty_months.empty()) {
      std::string list;
      for (std::size_t i = 0; i < f.empty_months.size() && i < 12; ++i)
        list += (i ? "," : "") + start.plus(f.empty_months[i]).str();
      if (f.empty_months.size() > 12) list += ",...";
      out.warnings.push_back("area '" + f.area + "': " + std::to_string(f.empty_months.size()) +
                             " months without sales filled by the penalty (" + list + ")");
    }
  }
  return out;
}

IndexPanel aggregate(const IndexPanel& fine, const ingest::RegionGraph& graph, Level level) {
  IndexPanel out;
  out.months = fine.months;
  out.base = fine.base;
  std::vector<std::vector<int>> groups;
  if (level == Level::national) {
    out.regions = {"national"};
    groups.emplace_back();
    for (std::size_t i = 0; i < fine.regions.size(); ++i) groups[0].push_back(static_cast<int>(i));
  } else {
    out.regions = graph.coarse_ids();
    for (const auto& c : out.regions) {
      groups.emplace_back();
      for (std::size_t i = 0; i < fine.regions.size(); ++i)
        if (graph.coarse_of()[graph.index(fine.regions[i])] == c) groups.back().push_back(static_cast<int>(i));
    }
  }
  out.values = Matrix::Zero(fine.values.rows(), static_cast<Eigen::Index>(groups.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double wsum = 0.0;
    for (int i : groups[g]) {
      const double w = graph.weights()[graph.index(fine.regions[i])];
      out.values.col(static_cast<Eigen::Index>(g)) += w * fine.values.col(i);
      wsum += w;
    }
    if (!(wsum > 0)) throw ValidationError("zero total weight in '" + out.regions[g] + "'");
    out.values.col(static_cast<Eigen::Index>(g)) /= wsum;
  }
  return out;
}

void write_panel(const std::filesystem::path& path, const IndexPanel& panel,
                 const std::vector<std::pair<std::string, std::string>>& meta) {
  csv::Writer w({"month", "region_id", "log_index"});
  for (const auto& [k, v] : meta) w.meta(k, v);
  w.meta("base_month", panel.months.empty() ? "" : panel.months[static_cast<std::size_t>(panel.base)].str());
  for (Eigen::Index t = 0; t < panel.values.rows(); ++t)
    for (std::size_t r = 0; r < panel.regions.size(); ++r)
      w.row({panel.months[t].str(), panel.regions[r],
             csv::format_double(panel.values(t, static_cast<Eigen::Index>(r)))});
  w.save(path);
}

IndexPanel read_panel(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const auto cm = t.column("month"), cr = t.column("region_id"), cv = t.column("log_index");
  std::map<int, std::size_t> month_pos;
  std::vector<Month> months;
  std::vector<std::string> regions;
  std::map<std::string, std::size_t> region_pos;
  for (const auto& row : t.rows) {
    const Month m = Month::parse(row.at(cm));
    if (!month_pos.count(m.serial())) {
      month_pos[m.serial()] = months.size();
      months.push_back(m);
    }
    if (!region_pos.count(row.at(cr))) {
      region_pos[row.at(cr)] = regions.size();
      regions.push_back(row.at(cr));
    }
  }
  IndexPanel p;
  p.months = months;
  p.regions = regions;
  p.values = Matrix::Constant(static_cast<Eigen::Index>(months.size()), static_cast<Eigen::Index>(regions.size()),
                              std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : t.rows)
    p.values(static_cast<Eigen::Index>(month_pos[Month::parse(row[cm]).serial()]),
             static_cast<Eigen::Index>(region_pos[row[cr]])) = std::stod(row.at(cv));
  if (!p.values.allFinite()) throw ValidationError(path.string() + ": panel has missing cells");
  if (auto it = t.meta.find("base_month"); it != t.meta.end() && !it->second.empty()) {
    const Month b = Month::parse(it->second);
    p.base = b - months.front();
  }
  return p;
}

}  // namespace hpf::rsindex
