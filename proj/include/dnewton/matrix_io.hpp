#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dnewton/types.hpp"

namespace dnewton {

// Plain-text matrix format: one row per line, space-separated decimals.
// Values use the shortest decimal form that reads back to the same double.

inline std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Derived>
void write_matrix(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << format_real(static_cast<double>(m(r, c)));
    }
    os << '\n';
  }
}

// Reads `rows` lines (or until a blank line / EOF when rows < 0).
inline Matrix<double> read_matrix(std::istream& is, Index rows = -1) {
  std::vector<std::vector<double>> data;
  std::string line;
  while ((rows < 0 || static_cast<Index>(data.size()) < rows) && std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (rows < 0) break;
      continue;
    }
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw Error("read_matrix: malformed number in line '" + line + "'");
    if (!data.empty() && row.size() != data.front().size())
      throw Error("read_matrix: ragged rows");
    data.push_back(std::move(row));
  }
  if (rows >= 0 && static_cast<Index>(data.size()) != rows)
    throw Error("read_matrix: expected " + std::to_string(rows) + " rows, got " +
                std::to_string(data.size()));
  const Index r = static_cast<Index>(data.size());
  const Index c = r ? static_cast<Index>(data.front().size()) : 0;
  Matrix<double> m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline Matrix<double> parse_matrix(const std::string& text) {
  std::istringstream is(text);
  return read_matrix(is);
}

}  // namespace dnewton
