#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tailrisk/table.hpp"

namespace tailrisk::io {

using json = nlohmann::json;

// Cells parsed as missing (NaN). Matching is exact and case-sensitive.
inline const std::vector<std::string> kMissingSentinels{"", "NA", "NaN"};

// Which columns to keep (all when empty; absent names are a DataError) and
// which of them hold text labels. Labels are coded 1..L in sorted order.
struct CsvSchema {
  std::vector<std::string> columns;
  std::vector<std::string> categorical;
};

// Comma-separated numeric table with a header row. Cells are parsed with
// std::from_chars (locale independent); surrounding spaces are ignored.
// Row numbers in ParseError are 1-based file lines, columns 1-based.
Table parse_csv(std::istream& in, const CsvSchema& schema = {});
Table read_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

// Throws DataError listing the absent names.
void require_columns(const Table& t, const std::vector<std::string>& names);

std::vector<double> column(const Table& t, const std::string& name);
// n x names.size(); all named columns must exist.
Eigen::MatrixXd to_matrix(const Table& t, const std::vector<std::string>& names);
Eigen::MatrixXd to_matrix(const Table& t);

// %.17g, "NaN" for NaN, "inf"/"-inf" otherwise non-finite.
std::string format_double(double x);

void write_csv(const std::filesystem::path& path, const Table& t);
// Header plus preformatted cells.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

std::vector<double> to_vector(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);  // array of rows

}  // namespace tailrisk::io
