#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hpf/common.hpp"

namespace hpf::spectral {

/// Orientation rules applied after the decomposition. Anchors are column
/// indexes into the panel; an empty anchor leaves the component's sign as the
/// SVD returned it.
struct SignRules {
  std::optional<Series> market;      // PC1 correlates positively with this series
  std::vector<int> mining_anchor;    // PC2 has positive mean loading on these columns
  std::vector<int> lifestyle_anchor; // PC3 has positive mean loading on these columns
};

struct PcaResult {
  Matrix components;      // T x q, z_k = U_k s_k
  Matrix loadings;        // q x R, orthonormal rows
  Vector explained;       // q shares of total variance
  Vector centering;       // R column means removed before the SVD
  Vector singular_values; // all min(T, R) values

  int q() const { return static_cast<int>(loadings.rows()); }
};

/// PCA of the column-centered T x R panel by SVD.
PcaResult fit_pca(const Matrix& panel, int q, const SignRules& rules = {});

/// Sum_{k <= q_used} z_k a_k' plus the centering, T x R.
Matrix reconstruct(const PcaResult& result, int q_used);

/// Frobenius norm of the centered-panel residual after q_used components,
/// computed from the discarded singular values.
double truncation_error(const PcaResult& result, int q_used);

/// Sum_r a_kr (mu_r - mean_r); equals z_k for the fitted panel. k is 1-based.
Series component_from_panel(const PcaResult& result, const Matrix& panel, int k);

}  // namespace hpf::spectral
