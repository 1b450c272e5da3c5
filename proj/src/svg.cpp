#include "hpf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "hpf/common.hpp"
#include "hpf/csv.hpp"

namespace hpf::svg {

namespace {

constexpr double W = 720, H = 360, L = 60, R = 150, Tm = 30, B = 40;
const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '&') o += "&amp;";
    else if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else o += c;
  }
  return o;
}

void save(const std::filesystem::path& out, const std::string& text) {
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + out.string());
  f << text;
}

}  // namespace

std::string line_chart(const std::string& title, const std::vector<LineSeries>& series,
                       const std::vector<std::string>& x_labels) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi == lo) hi = lo + 1;
  const double pw = W - L - R, ph = H - Tm - B;
  auto X = [&](std::size_t i) { return L + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0); };
  auto Y = [&](double v) { return Tm + ph * (hi - v) / (hi - lo); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(L) + "\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">" + escape(title) + "</text>\n";
  s += "<rect x=\"" + num(L) + "\" y=\"" + num(Tm) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (double v : {lo, 0.5 * (lo + hi), hi})
    s += "<text x=\"" + num(L - 5) + "\" y=\"" + num(Y(v) + 4) +
         "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">" + num(v) + "</text>\n";
  if (!x_labels.empty()) {
    s += "<text x=\"" + num(L) + "\" y=\"" + num(H - B + 15) + "\" font-size=\"10\" font-family=\"sans-serif\">" +
         escape(x_labels.front()) + "</text>\n";
    s += "<text x=\"" + num(L + pw) + "\" y=\"" + num(H - B + 15) +
         "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">" + escape(x_labels.back()) + "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = kColors[k % 7];
    std::string pts;
    for (std::size_t i = 0; i < series[k].y.size(); ++i) {
      if (!std::isfinite(series[k].y[i])) continue;
      pts += num(X(i)) + "," + num(Y(series[k].y[i])) + " ";
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + num(W - R + 10) + "\" y=\"" + num(Tm + 14 + 16 * static_cast<double>(k)) + "\" font-size=\"11\" fill=\"" +
         col + "\" font-family=\"sans-serif\">" + escape(series[k].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string interval_chart(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<double>& lo, const std::vector<double>& mid,
                           const std::vector<double>& hi, double reference) {
  double a = reference, b = reference;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    a = std::min(a, lo[i]);
    b = std::max(b, hi[i]);
  }
  if (b == a) b = a + 1;
  const double row = 20, left = 120, width = 520;
  const double h = 50 + row * static_cast<double>(labels.size());
  auto X = [&](double v) { return left + width * (v - a) / (b - a); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"700\" height=\"" + num(h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + num(X(reference)) + "\" y1=\"25\" x2=\"" + num(X(reference)) + "\" y2=\"" + num(h - 10) +
       "\" stroke=\"#999\" stroke-dasharray=\"4,3\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = 40 + row * static_cast<double>(i);
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 4) +
         "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" + escape(labels[i]) + "</text>\n";
    s += "<line x1=\"" + num(X(lo[i])) + "\" y1=\"" + num(y) + "\" x2=\"" + num(X(hi[i])) + "\" y2=\"" + num(y) +
         "\" stroke=\"#8c564b\" stroke-width=\"6\" stroke-opacity=\"0.5\"/>\n";
    s += "<circle cx=\"" + num(X(mid[i])) + "\" cy=\"" + num(y) + "\" r=\"3\" fill=\"black\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

void line_chart_from_csv(const std::filesystem::path& csv_path, const std::string& x_column,
                         const std::vector<std::string>& y_columns, const std::string& title,
                         const std::filesystem::path& out) {
  const auto t = csv::read(csv_path);
  const auto cx = t.column(x_column);
  std::vector<LineSeries> series;
  for (const auto& c : y_columns) {
    const auto ci = t.column(c);
    LineSeries ls{c, {}};
    for (const auto& row : t.rows) ls.y.push_back(std::stod(row.at(ci)));
    series.push_back(std::move(ls));
  }
  std::vector<std::string> xl;
  if (!t.rows.empty()) xl = {t.rows.front().at(cx), t.rows.back().at(cx)};
  save(out, line_chart(title, series, xl));
}

void interval_chart_from_csv(const std::filesystem::path& csv_path, const std::string& title, double reference,
                             const std::filesystem::path& out) {
  const auto t = csv::read(csv_path);
  const auto cr = t.column("region"), cf = t.column("f_r"), cl = t.column("lo"), ch = t.column("hi");
  std::vector<std::string> labels;
  std::vector<double> lo, mid, hi;
  for (const auto& row : t.rows) {
    labels.push_back(row.at(cr));
    mid.push_back(std::stod(row.at(cf)));
    lo.push_back(std::stod(row.at(cl)));
    hi.push_back(std::stod(row.at(ch)));
  }
  save(out, interval_chart(title, labels, lo, mid, hi, reference));
}

}  // namespace hpf::svg
