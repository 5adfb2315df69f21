#pragma once

// Minimal numeric CSV reader: comma-separated, optional header row, no
// quoting. Row and column numbers in messages are 1-based file positions.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "densetest/error.hpp"
#include "densetest/numerics.hpp"

namespace densetest {

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  Matrix values;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

// Empty cells and non-finite literals still count as numeric so that a broken
// first data row is reported as such rather than taken for a header.
inline bool looks_numeric(std::string_view cell) {
  if (cell.empty()) return true;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  return ptr == cell.data() + cell.size() && (ec == std::errc() || ec == std::errc::result_out_of_range);
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "<input>") {
  CsvTable table;
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_cells(line);
    if (first) {
      first = false;
      bool numeric = true;
      for (auto c : cells) numeric = numeric && detail::looks_numeric(c);
      cols = cells.size();
      if (!numeric) {
        for (auto c : cells) table.header.emplace_back(c);
        continue;
      }
    }
    if (cells.size() != cols) {
      throw Error(ErrorKind::DataError, source + ": row " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(cols));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = detail::parse_number(cells[j]);
      if (!v) {
        throw Error(ErrorKind::DataError, source + ": row " + std::to_string(line_no) +
                                              ", column " + std::to_string(j + 1) +
                                              ": non-numeric cell '" + std::string(cells[j]) + "'");
      }
      data.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::DataError, source + ": no data rows");
  table.values = Matrix(rows, cols, std::move(data));
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DataError, "cannot read '" + path + "'");
  return parse_csv(in, path);
}

struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::string> header;
};

/// Splits a table into design and response. `y_col` is 0-based; the last
/// column is the response by default.
inline Dataset split_dataset(const CsvTable& table, std::optional<std::size_t> y_col = {},
                             const std::string& source = "<input>") {
  const std::size_t cols = table.values.cols();
  if (cols < 2) throw Error(ErrorKind::DataError, source + ": need at least two columns");
  const std::size_t yc = y_col.value_or(cols - 1);
  if (yc >= cols) {
    throw Error(ErrorKind::DataError, source + ": response column " + std::to_string(yc + 1) +
                                          " out of range (" + std::to_string(cols) + " columns)");
  }
  Dataset d;
  d.x = Matrix(table.values.rows(), cols - 1);
  d.y.resize(table.values.rows());
  for (std::size_t i = 0; i < table.values.rows(); ++i) {
    std::size_t out = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (j == yc) {
        d.y[i] = table.values(i, j);
      } else {
        d.x(i, out++) = table.values(i, j);
      }
    }
  }
  if (!table.header.empty()) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j != yc) d.header.push_back(table.header[j]);
    }
  }
  return d;
}

inline Dataset read_csv_dataset(const std::string& path, std::optional<std::size_t> y_col = {}) {
  return split_dataset(read_csv(path), y_col, path);
}

}  // namespace densetest
