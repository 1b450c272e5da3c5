#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hpf {

using Series = std::vector<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for all library errors. `code()` is a stable machine-readable tag
/// used by the CLI when it emits error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

class SingularSystemError : public Error {
 public:
  explicit SingularSystemError(const std::string& what) : Error("singular_system", what) {}
};

class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error("fit_failed", what) {}
};

/// Calendar month. Ordering and arithmetic operate on the linear month count.
struct Month {
  int year = 1995;
  int month = 1;  // 1..12

  static Month parse(const std::string& text);  // "YYYY-MM"
  std::string str() const;
  int serial() const { return year * 12 + (month - 1); }
  static Month from_serial(int s) { return Month{s / 12, s % 12 + 1}; }
  Month plus(int months) const { return from_serial(serial() + months); }
  friend int operator-(const Month& a, const Month& b) { return a.serial() - b.serial(); }
  friend auto operator<=>(const Month& a, const Month& b) { return a.serial() <=> b.serial(); }
  friend bool operator==(const Month& a, const Month& b) = default;
};

std::vector<Month> month_range(Month start, int count);

// Descriptive statistics on series.
double mean(std::span<const double> x);
double variance(std::span<const double> x);  // n-1 denominator
double covariance(std::span<const double> x, std::span<const double> y);
double correlation(std::span<const double> x, std::span<const double> y);
Series demeaned(std::span<const double> x);
double median(std::vector<double> x);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into preallocated slots so the
/// outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace hpf
