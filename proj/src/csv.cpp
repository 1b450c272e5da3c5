#include "hpf/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hpf/common.hpp"

namespace hpf::csv {

std::size_t Table::column(const std::string& name) const {
  if (auto idx = find_column(name)) return *idx;
  throw ValidationError("missing column '" + name + "'");
}

std::optional<std::size_t> Table::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto colon = line.find(':');
      if (colon != std::string::npos) {
        auto key = line.substr(1, colon - 1);
        auto value = line.substr(colon + 1);
        auto trim = [](std::string s) {
          const auto b = s.find_first_not_of(' ');
          const auto e = s.find_last_not_of(' ');
          return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        t.meta[trim(key)] = trim(value);
      }
      continue;
    }
    if (!have_header) {
      // Tolerate a UTF-8 byte order mark.
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      t.header = split_line(line);
      have_header = true;
      continue;
    }
    t.rows.push_back(split_line(line));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw ValidationError("delimited file has no header row");
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_file", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void Writer::row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line.push_back(',');
    if (fields[i].find(',') != std::string::npos) {
      line += '"' + fields[i] + '"';
    } else {
      line += fields[i];
    }
  }
  lines_.push_back(std::move(line));
}

std::string Writer::str() const {
  std::string out;
  for (const auto& [k, v] : meta_) out += "# " + k + ": " + v + "\n";
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out.push_back(',');
    out += header_[i];
  }
  out.push_back('\n');
  for (const auto& l : lines_) {
    out += l;
    out.push_back('\n');
  }
  return out;
}

void Writer::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << str();
}

}  // namespace hpf::csv
