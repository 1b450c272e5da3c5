#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hpf/arima.hpp"
#include "hpf/diagnostics.hpp"

namespace hpf::breaks {

enum class Cost { linear_trend, mean_shift };

/// Breakpoints are the first index of each new segment.
struct RegimeSet {
  int T = 0;
  std::vector<int> breakpoints;

  std::vector<std::pair<int, int>> segments() const;  // half-open [a, b)
  void validate() const;
};

/// Prefix sums giving O(1) segment cost for either cost function.
class SegmentCost {
 public:
  SegmentCost(std::span<const double> y, Cost cost);
  double operator()(int a, int b) const;  // SSE on [a, b)
  int size() const { return static_cast<int>(s0_.size()) - 1; }

 private:
  Cost cost_;
  std::vector<double> s0_, st_, stt_, sy_, sty_, syy_;
};

double total_cost(std::span<const double> y, const std::vector<int>& breakpoints, Cost cost);

/// Greedy binary segmentation: repeatedly applies the single split with the
/// largest cost reduction over all current segments. Equal gains go to the
/// earliest split index. With `refine`, the greedy placement is then polished
/// by moving single breakpoints and adjacent pairs between their neighbours
/// (the count of breakpoints is unchanged).
RegimeSet binary_segmentation(std::span<const double> y, int n_bkps, Cost cost = Cost::linear_trend,
                              int min_size = 12, bool refine = true);

/// T x (regimes - 1) indicator matrix; column j marks regime j + 1.
Matrix regime_dummies(const RegimeSet& regimes, int T);

/// OLS slope per segment (per period).
std::vector<double> segment_slopes(std::span<const double> y, const RegimeSet& regimes);

struct RegimeFan {
  tskit::ArimaFit adjusted;
  tskit::ArimaFit unconditional;
  tskit::ForecastFan adjusted_fan;
  tskit::ForecastFan unconditional_fan;
  double sd_adjusted = 0.0, sd_unconditional = 0.0;
  double x95_adjusted = 1.0, x95_unconditional = 1.0;
};

/// Fits `spec` with and without regime dummies; the fan keeps the last
/// regime's dummies switched on over the horizon.
RegimeFan regime_adjusted_fan(std::span<const double> y, const RegimeSet& regimes, const tskit::ArimaSpec& spec,
                              int h, const tskit::FitOptions& options = {});

struct RegimeAdf {
  std::string label;
  int start = 0, end = 0;  // [start, end)
  bool sufficient = false;
  tskit::AdfResult result;
};

/// ADF on the full series, its first difference and each regime.
std::vector<RegimeAdf> adf_by_regime(std::span<const double> y, const RegimeSet& regimes, int max_lags,
                                     int min_obs = 20);

}  // namespace hpf::breaks
