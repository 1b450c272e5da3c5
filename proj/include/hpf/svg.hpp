#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hpf::svg {

struct LineSeries {
  std::string label;
  std::vector<double> y;
};

/// Minimal line chart; x is the observation index, `x_labels` optionally
/// annotate the first and last ticks.
std::string line_chart(const std::string& title, const std::vector<LineSeries>& series,
                       const std::vector<std::string>& x_labels = {});

/// Horizontal interval chart: one bar [lo, hi] with a dot at `mid` per label.
std::string interval_chart(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<double>& lo, const std::vector<double>& mid,
                           const std::vector<double>& hi, double reference);

/// Charts derived from a written CSV: x column plus the named numeric columns.
void line_chart_from_csv(const std::filesystem::path& csv_path, const std::string& x_column,
                         const std::vector<std::string>& y_columns, const std::string& title,
                         const std::filesystem::path& out);

void interval_chart_from_csv(const std::filesystem::path& csv_path, const std::string& title, double reference,
                             const std::filesystem::path& out);

}  // namespace hpf::svg
