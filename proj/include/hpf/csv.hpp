#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hpf::csv {

/// A parsed delimited file: header names plus string rows. Lines starting with
/// '#' are metadata (e.g. `# config_hash: ...`) and are collected separately.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line for each row
  std::map<std::string, std::string> meta;

  /// Index of a named column; throws ValidationError when absent.
  std::size_t column(const std::string& name) const;
  std::optional<std::size_t> find_column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);
Table parse(const std::string& text);

/// Splits one line on commas; double quotes group fields containing commas.
std::vector<std::string> split_line(const std::string& line);

std::string format_double(double v);

/// Streaming writer. Metadata lines are written before the header.
class Writer {
 public:
  explicit Writer(std::vector<std::string> header) : header_(std::move(header)) {}
  void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }
  void row(const std::vector<std::string>& fields);
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::string> lines_;
};

}  // namespace hpf::csv
