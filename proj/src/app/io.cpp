#include "tailrisk/app/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "tailrisk/errors.hpp"

namespace tailrisk::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  for (const auto& m : kMissingSentinels) {
    if (cell == m) return std::numeric_limits<double>::quiet_NaN();
  }
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && cell.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, col);
  }
  return v;
}

}  // namespace

Table parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("CSV input has no header row");

  std::vector<std::string> header;
  for (auto cell : split(line)) {
    std::string name = unquote(cell);
    if (name.empty()) throw ParseError("empty column name", line_no, header.size() + 1);
    if (std::find(header.begin(), header.end(), name) != header.end()) {
      throw ParseError("duplicate column '" + name + "'", line_no, header.size() + 1);
    }
    header.push_back(std::move(name));
  }

  // slot[c] is the output column of file column c, or -1 when it is skipped.
  auto listed = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  std::string absent;
  for (const auto& n : schema.columns) {
    if (!listed(header, n)) absent += (absent.empty() ? "" : ", ") + n;
  }
  for (const auto& n : schema.categorical) {
    if (!listed(header, n)) absent += (absent.empty() ? "" : ", ") + n;
  }
  if (!absent.empty()) throw DataError("missing required column(s): " + absent);

  Table t;
  std::vector<long> slot(header.size(), -1);
  std::vector<bool> is_label(header.size(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    is_label[c] = listed(schema.categorical, header[c]);
    if (schema.columns.empty() || listed(schema.columns, header[c]) || is_label[c]) {
      slot[c] = static_cast<long>(t.cols());
      t.add(header[c], {});
    }
  }
  std::map<std::size_t, std::vector<std::string>> text;  // raw labels per output column

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       line_no, std::min(cells.size(), header.size()) + 1);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (slot[c] < 0) continue;
      const auto out = static_cast<std::size_t>(slot[c]);
      if (is_label[c]) {
        text[out].push_back(unquote(cells[c]));
        t.columns[out].push_back(0.0);
      } else {
        t.columns[out].push_back(parse_cell(cells[c], line_no, c + 1));
      }
    }
  }

  for (auto& [out, cells] : text) {
    std::vector<std::string> levels;
    for (const auto& v : cells) {
      if (std::find(kMissingSentinels.begin(), kMissingSentinels.end(), v) == kMissingSentinels.end()) levels.push_back(v);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const auto it = std::lower_bound(levels.begin(), levels.end(), cells[r]);
      t.columns[out][r] = (it != levels.end() && *it == cells[r])
                              ? static_cast<double>(it - levels.begin() + 1)
                              : std::numeric_limits<double>::quiet_NaN();
    }
    t.labels[t.names[out]] = std::move(levels);
  }
  return t;
}

Table read_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema);
}

void require_columns(const Table& t, const std::vector<std::string>& names) {
  std::string absent;
  for (const auto& n : names) {
    if (t.index_of(n) < 0) absent += (absent.empty() ? "" : ", ") + n;
  }
  if (!absent.empty()) throw DataError("missing required column(s): " + absent);
}

std::vector<double> column(const Table& t, const std::string& name) {
  const long i = t.index_of(name);
  if (i < 0) throw DataError("missing required column(s): " + name);
  return t.columns[static_cast<std::size_t>(i)];
}

Eigen::MatrixXd to_matrix(const Table& t, const std::vector<std::string>& names) {
  require_columns(t, names);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& c = t.columns[static_cast<std::size_t>(t.index_of(names[j]))];
    for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c[i];
  }
  return m;
}

Eigen::MatrixXd to_matrix(const Table& t) { return to_matrix(t, t.names); }

std::string format_double(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  std::vector<std::vector<std::string>> rows(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (const auto& c : t.columns) rows[i].push_back(format_double(c[i]));
  }
  write_csv(path, t.names, rows);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  auto put = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  put(header);
  for (const auto& r : rows) put(r);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace tailrisk::io
