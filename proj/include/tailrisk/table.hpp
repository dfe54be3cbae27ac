#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace tailrisk {

/// Column-oriented numeric table. Missing cells are NaN.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  // Categorical columns hold codes 1..L; labels[name][code - 1] is the text.
  std::map<std::string, std::vector<std::string>> labels;

  std::size_t cols() const { return columns.size(); }
  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  // -1 when absent.
  long index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<long>(i);
    }
    return -1;
  }

  void add(std::string name, std::vector<double> values) {
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  std::size_t missing_cells() const {
    std::size_t m = 0;
    for (const auto& c : columns) {
      for (double v : c) m += std::isnan(v) ? 1 : 0;
    }
    return m;
  }
};

}  // namespace tailrisk
