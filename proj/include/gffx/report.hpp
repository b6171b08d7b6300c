#pragma once

// Tabular results, CSV serialisation and a small SVG line plot drawn from a table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gffx {

/// Shortest decimal form that parses back to the same double; nan/inf spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string format_number(long long v) { return std::to_string(v); }
inline std::string format_number(unsigned long long v) { return std::to_string(v); }
inline std::string format_number(long v) { return std::to_string(v); }
inline std::string format_number(unsigned long v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add_row(std::vector<std::string> row) {
    if (row.size() != columns_.size())
      throw std::invalid_argument("row has " + std::to_string(row.size()) + " cells, table has " +
                                  std::to_string(columns_.size()) + " columns");
    rows_.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw std::out_of_range("no column '" + name + "'");
    return static_cast<std::size_t>(it - columns_.begin());
  }

  double number(std::size_t row, const std::string& name) const {
    const auto& s = rows_.at(row)[column(name)];
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) return std::numeric_limits<double>::quiet_NaN();
    return v;
  }

  std::string to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Which table columns to plot: y columns against x, one series per value of
/// `group` (empty for a single group).
struct PlotSpec {
  std::string title;
  std::string x;
  std::vector<std::string> ys;
  std::string group;
  bool log_x = false;
  bool log_y = false;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

inline std::string svg_plot(const Table& table, const PlotSpec& spec) {
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Series> series;
  std::map<std::string, std::size_t> index;
  const bool grouped = !spec.group.empty();
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string g = grouped ? table.rows()[r][table.column(spec.group)] : "";
    for (const auto& y : spec.ys) {
      const std::string key = grouped ? (spec.ys.size() > 1 ? y + " " + spec.group + "=" + g : spec.group + "=" + g) : y;
      auto [it, fresh] = index.emplace(key, series.size());
      if (fresh) series.push_back({key, {}});
      double xv = table.number(r, spec.x), yv = table.number(r, y);
      if (spec.log_x) xv = xv > 0 ? std::log10(xv) : std::numeric_limits<double>::quiet_NaN();
      if (spec.log_y) yv = yv > 0 ? std::log10(yv) : std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(xv) && std::isfinite(yv)) series[it->second].pts.emplace_back(xv, yv);
    }
  }
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  constexpr double W = 720, H = 480, L = 70, R = 200, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return T + ph - (y - y0) / (y1 - y0) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
     << detail::xml_escape(spec.title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << detail::svg_num(sx(xv)) << "\" y=\"" << detail::svg_num(T + ph + 18)
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
       << detail::xml_escape(format_number(std::round(xv * 1000) / 1000)) << "</text>\n";
    os << "<text x=\"" << detail::svg_num(L - 6) << "\" y=\"" << detail::svg_num(sy(yv) + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
       << detail::xml_escape(format_number(std::round(yv * 1000) / 1000)) << "</text>\n";
  }
  const std::string xl = (spec.log_x ? "log10 " : "") + spec.x;
  const std::string yl = spec.log_y ? "log10 value" : "value";
  os << "<text x=\"" << detail::svg_num(L + pw / 2) << "\" y=\"" << detail::svg_num(H - 12)
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << detail::xml_escape(xl)
     << "</text>\n"
     << "<text x=\"16\" y=\"" << detail::svg_num(T + ph / 2) << "\" font-family=\"sans-serif\" font-size=\"12\""
     << " transform=\"rotate(-90 16 " << detail::svg_num(T + ph / 2) << ")\" text-anchor=\"middle\">"
     << detail::xml_escape(yl) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* colour = palette[i % std::size(palette)];
    const auto& s = series[i];
    if (!s.pts.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < s.pts.size(); ++k)
        os << (k ? " " : "") << detail::svg_num(sx(s.pts[k].first)) << ',' << detail::svg_num(sy(s.pts[k].second));
      os << "\"/>\n";
      for (auto [x, y] : s.pts)
        os << "<circle cx=\"" << detail::svg_num(sx(x)) << "\" cy=\"" << detail::svg_num(sy(y)) << "\" r=\"2.5\" fill=\""
           << colour << "\"/>\n";
    }
    const double ly = T + 14 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << detail::svg_num(L + pw + 12) << "\" y1=\"" << detail::svg_num(ly - 4) << "\" x2=\""
       << detail::svg_num(L + pw + 32) << "\" y2=\"" << detail::svg_num(ly - 4) << "\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << detail::svg_num(L + pw + 38) << "\" y=\"" << detail::svg_num(ly)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace gffx
