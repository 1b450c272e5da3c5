#include "hpf/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace hpf {

Month Month::parse(const std::string& text) {
  int y = 0, m = 0;
  char dash = 0;
  if (std::sscanf(text.c_str(), "%d%c%d", &y, &dash, &m) != 3 || dash != '-' || m < 1 || m > 12 ||
      text.size() < 6) {
    throw ValidationError("bad month '" + text + "', expected YYYY-MM");
  }
  return Month{y, m};
}

std::string Month::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

std::vector<Month> month_range(Month start, int count) {
  std::vector<Month> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) out.push_back(start.plus(i));
  return out;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("covariance: length mismatch");
  if (x.size() < 2) return 0.0;
  const double mx = mean(x), my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

double variance(std::span<const double> x) { return covariance(x, x); }

double correlation(std::span<const double> x, std::span<const double> y) {
  const double vx = variance(x), vy = variance(y);
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return covariance(x, y) / std::sqrt(vx * vy);
}

Series demeaned(std::span<const double> x) {
  const double m = mean(x);
  Series out(x.begin(), x.end());
  for (auto& v : out) v -= m;
  return out;
}

double median(std::vector<double> x) {
  if (x.empty()) throw ValidationError("median of empty set");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hpf
