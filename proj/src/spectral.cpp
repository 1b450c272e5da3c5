#include "hpf/spectral.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace hpf::spectral {

PcaResult fit_pca(const Matrix& panel, int q, const SignRules& rules) {
  const Eigen::Index T = panel.rows(), R = panel.cols();
  if (T < 2 || R < 1) throw ValidationError("panel too small for PCA");
  if (q < 1 || q > std::min(T, R)) throw ValidationError("component count out of range");
  if (!panel.allFinite()) throw ValidationError("panel has missing or non-finite cells");

  PcaResult res;
  res.centering = panel.colwise().mean().transpose();
  const Matrix X = panel.rowwise() - res.centering.transpose();
  if (X.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("degenerate (constant) panel");

  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  res.singular_values = svd.singularValues();
  const double total = res.singular_values.squaredNorm();
  res.components = svd.matrixU().leftCols(q) * res.singular_values.head(q).asDiagonal();
  res.loadings = svd.matrixV().leftCols(q).transpose();
  res.explained = res.singular_values.head(q).array().square() / total;

  auto flip = [&](int k) {
    res.components.col(k) *= -1.0;
    res.loadings.row(k) *= -1.0;
  };
  if (rules.market && q >= 1) {
    if (static_cast<Eigen::Index>(rules.market->size()) != T) throw ValidationError("market series length mismatch");
    Series z(res.components.col(0).data(), res.components.col(0).data() + T);
    if (covariance(z, *rules.market) < 0) flip(0);
  }
  auto anchor = [&](int k, const std::vector<int>& cols) {
    if (q <= k || cols.empty()) return;
    double s = 0.0;
    for (int c : cols) {
      if (c < 0 || c >= R) throw ValidationError("sign anchor column out of range");
      s += res.loadings(k, c);
    }
    if (s < 0) flip(k);
  };
  anchor(1, rules.mining_anchor);
  anchor(2, rules.lifestyle_anchor);
  return res;
}

Matrix reconstruct(const PcaResult& result, int q_used) {
  if (q_used < 0 || q_used > result.q()) throw ValidationError("q_used out of range");
  Matrix out = result.components.leftCols(q_used) * result.loadings.topRows(q_used);
  out.rowwise() += result.centering.transpose();
  return out;
}

double truncation_error(const PcaResult& result, int q_used) {
  if (q_used < 0 || q_used > result.singular_values.size()) throw ValidationError("q_used out of range");
  return std::sqrt(result.singular_values.tail(result.singular_values.size() - q_used).squaredNorm());
}

Series component_from_panel(const PcaResult& result, const Matrix& panel, int k) {
  if (k < 1 || k > result.q()) throw ValidationError("component index out of range");
  if (panel.cols() != result.loadings.cols()) throw ValidationError("panel width does not match loadings");
  const Matrix X = panel.rowwise() - result.centering.transpose();
  const Vector z = X * result.loadings.row(k - 1).transpose();
  return Series(z.data(), z.data() + z.size());
}

}  // namespace hpf::spectral
