#include "hpf/breaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hpf::breaks {

std::vector<std::pair<int, int>> RegimeSet::segments() const {
  std::vector<std::pair<int, int>> out;
  int a = 0;
  for (int b : breakpoints) {
    out.emplace_back(a, b);
    a = b;
  }
  out.emplace_back(a, T);
  return out;
}

void RegimeSet::validate() const {
  int prev = 0;
  for (int b : breakpoints) {
    if (b <= prev || b >= T) throw ValidationError("breakpoints must be strictly increasing and interior");
    prev = b;
  }
}

SegmentCost::SegmentCost(std::span<const double> y, Cost cost) : cost_(cost) {
  const std::size_t n = y.size();
  s0_.assign(n + 1, 0.0);
  st_ = stt_ = sy_ = sty_ = syy_ = s0_;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    s0_[i + 1] = s0_[i] + 1.0;
    st_[i + 1] = st_[i] + t;
    stt_[i + 1] = stt_[i] + t * t;
    sy_[i + 1] = sy_[i] + y[i];
    sty_[i + 1] = sty_[i] + t * y[i];
    syy_[i + 1] = syy_[i] + y[i] * y[i];
  }
}

double SegmentCost::operator()(int a, int b) const {
  const double n = s0_[b] - s0_[a];
  if (n <= 0) return 0.0;
  const double Sy = sy_[b] - sy_[a], Syy = syy_[b] - syy_[a];
  double sse = Syy - Sy * Sy / n;
  if (cost_ == Cost::linear_trend && n >= 2) {
    // Center time on the segment to keep the sums well conditioned.
    const double St = st_[b] - st_[a], Stt = stt_[b] - stt_[a], Sty = sty_[b] - sty_[a];
    const double ctt = Stt - St * St / n;
    const double cty = Sty - St * Sy / n;
    if (ctt > 0) sse -= cty * cty / ctt;
  }
  return std::max(sse, 0.0);
}

namespace {

// Re-places breakpoints with their outer neighbours held fixed: first each one
// alone, then each adjacent pair jointly, until nothing moves. Every accepted
// move strictly lowers the total cost.
void refine_breakpoints(const SegmentCost& c, RegimeSet& rs, int min_size) {
  auto& bk = rs.breakpoints;
  const int K = static_cast<int>(bk.size());
  auto left = [&](int k) { return k > 0 ? bk[k - 1] : 0; };
  auto right = [&](int k) { return k + 1 < K ? bk[k + 1] : rs.T; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (int k = 0; k < K; ++k) {
      const int a = left(k), b = right(k);
      double best = c(a, bk[k]) + c(bk[k], b);
      for (int s = a + min_size; s <= b - min_size; ++s) {
        const double v = c(a, s) + c(s, b);
        if (v < best - 1e-14 * std::max(1.0, best)) {
          best = v;
          bk[k] = s;
          moved = true;
        }
      }
    }
    for (int k = 0; k + 1 < K; ++k) {
      const int a = left(k), b = right(k + 1);
      double best = c(a, bk[k]) + c(bk[k], bk[k + 1]) + c(bk[k + 1], b);
      int s1 = bk[k], s2 = bk[k + 1];
      for (int i = a + min_size; i <= b - 2 * min_size; ++i)
        for (int j = i + min_size; j <= b - min_size; ++j) {
          const double v = c(a, i) + c(i, j) + c(j, b);
          if (v < best - 1e-14 * std::max(1.0, best)) {
            best = v;
            s1 = i;
            s2 = j;
          }
        }
      if (s1 != bk[k] || s2 != bk[k + 1]) {
        bk[k] = s1;
        bk[k + 1] = s2;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace

double total_cost(std::span<const double> y, const std::vector<int>& breakpoints, Cost cost) {
  const SegmentCost c(y, cost);
  RegimeSet r{static_cast<int>(y.size()), breakpoints};
  r.validate();
  double s = 0.0;
  for (const auto& [a, b] : r.segments()) s += c(a, b);
  return s;
}

RegimeSet binary_segmentation(std::span<const double> y, int n_bkps, Cost cost, int min_size, bool refine) {
  const int T = static_cast<int>(y.size());
  if (n_bkps < 1) throw ValidationError("need at least one breakpoint");
  if (min_size < 2) throw ValidationError("minimum segment length must be at least 2");
  if (T < 10 * (n_bkps + 1)) throw ValidationError("series too short for the requested breakpoints");
  if (T < min_size * (n_bkps + 1)) throw ValidationError("too many breakpoints for the minimum segment length");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("series contains non-finite values");

  const SegmentCost c(y, cost);
  RegimeSet rs;
  rs.T = T;
  for (int k = 0; k < n_bkps; ++k) {
    double best_gain = -std::numeric_limits<double>::infinity();
    int best = -1;
    for (const auto& [a, b] : rs.segments()) {
      const double whole = c(a, b);
      for (int s = a + min_size; s <= b - min_size; ++s) {
        const double gain = whole - c(a, s) - c(s, b);
        if (gain > best_gain) {  // strict: earliest index wins ties
          best_gain = gain;
          best = s;
        }
      }
    }
    if (best < 0) throw ValidationError("no admissible split left for breakpoint " + std::to_string(k + 1));
    rs.breakpoints.insert(std::upper_bound(rs.breakpoints.begin(), rs.breakpoints.end(), best), best);
  }
  if (refine) refine_breakpoints(c, rs, min_size);
  return rs;
}

Matrix regime_dummies(const RegimeSet& regimes, int T) {
  RegimeSet r = regimes;
  r.T = T;
  r.validate();
  const auto segs = r.segments();
  Matrix D = Matrix::Zero(T, static_cast<Eigen::Index>(segs.size()) - 1);
  for (std::size_t j = 1; j < segs.size(); ++j)
    for (int t = segs[j].first; t < segs[j].second; ++t) D(t, static_cast<Eigen::Index>(j) - 1) = 1.0;
  return D;
}

std::vector<double> segment_slopes(std::span<const double> y, const RegimeSet& regimes) {
  std::vector<double> out;
  for (const auto& [a, b] : regimes.segments()) {
    const int n = b - a;
    if (n < 2) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int t = a; t < b; ++t) {
      st += t;
      sy += y[t];
      stt += double(t) * t;
      sty += t * y[t];
    }
    out.push_back((sty - st * sy / n) / (stt - st * st / n));
  }
  return out;
}

RegimeFan regime_adjusted_fan(std::span<const double> y, const RegimeSet& regimes, const tskit::ArimaSpec& spec,
                              int h, const tskit::FitOptions& options) {
  const int T = static_cast<int>(y.size());
  const Matrix D = regime_dummies(regimes, T);
  if (D.cols() > 0) {
    Matrix full(T, D.cols() + (spec.intercept ? 1 : 0));
    full.leftCols(D.cols()) = D;
    if (spec.intercept) full.col(D.cols()).setOnes();
    Eigen::ColPivHouseholderQR<Matrix> qr(full);
    if (qr.rank() < full.cols()) throw ValidationError("regime dummies are not full rank in sample");
  }
  RegimeFan out;
  out.unconditional = tskit::fit(spec, y, Matrix(T, 0), options);
  out.adjusted = tskit::fit(spec, y, D, options);
  Matrix future(h, D.cols());
  for (int j = 0; j < h; ++j) future.row(j) = D.row(T - 1);
  out.adjusted_fan = tskit::forecast_fan(out.adjusted, h, future);
  out.unconditional_fan = tskit::forecast_fan(out.unconditional, h);
  out.sd_adjusted = out.adjusted_fan.sd_at(h);
  out.sd_unconditional = out.unconditional_fan.sd_at(h);
  out.x95_adjusted = std::exp(1.96 * out.sd_adjusted);
  out.x95_unconditional = std::exp(1.96 * out.sd_unconditional);
  return out;
}

std::vector<RegimeAdf> adf_by_regime(std::span<const double> y, const RegimeSet& regimes, int max_lags, int min_obs) {
  std::vector<RegimeAdf> out;
  const int T = static_cast<int>(y.size());
  auto run = [&](const std::string& label, std::span<const double> s, int a, int b) {
    RegimeAdf r;
    r.label = label;
    r.start = a;
    r.end = b;
    const int n = static_cast<int>(s.size());
    // Reduce the lag ceiling for short segments rather than skipping them.
    const int lags = std::min(max_lags, std::max(0, (n - 1) / 3 - 1));
    if (n >= min_obs) {
      try {
        r.result = tskit::adf_test(s, lags);
        r.sufficient = true;
      } catch (const Error&) {
        r.sufficient = false;
      }
    }
    out.push_back(r);
  };
  run("full", y, 0, T);
  Series d(y.size() > 0 ? y.size() - 1 : 0);
  for (std::size_t t = 1; t < y.size(); ++t) d[t - 1] = y[t] - y[t - 1];
  run("first_difference", d, 1, T);
  int k = 1;
  for (const auto& [a, b] : regimes.segments())
    run("regime_" + std::to_string(k++), y.subspan(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a)), a, b);
  return out;
}

}  // namespace hpf::breaks
