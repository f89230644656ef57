#pragma once

// Text and binary containers for grid paths, covariance matrices and the
// two-column tables used to supply kappa and density functions.

#include "wwb/grid.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

/// `# b=<b> N=<N>` then a `t,value` header and one row per grid point, with
/// t = k / b^N printed to 17 significant digits.
inline void write_path_csv(std::ostream& os, const GridPath& path) {
  const BadicGrid& g = path.grid();
  os << "# b=" << g.base() << " N=" << g.depth() << '\n' << "t,value\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < path.size(); ++k) os << g.point(k) << ',' << path[k] << '\n';
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline bool is_blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (s.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}
}  // namespace detail

/// Rows of two numeric columns; comment lines and one non-numeric header line are skipped.
inline std::vector<std::pair<double, double>> read_two_column_csv(std::istream& is) {
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw std::runtime_error("line " + std::to_string(line_no) + ": expected two columns");
    if (header_allowed) {
      header_allowed = false;
      char* end = nullptr;
      std::strtod(cells[0].c_str(), &end);
      if (end == cells[0].c_str()) continue;
    }
    rows.emplace_back(detail::parse_double(cells[0], line_no), detail::parse_double(cells[1], line_no));
  }
  return rows;
}

inline std::vector<std::pair<double, double>> read_two_column_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  return read_two_column_csv(in);
}

/// Smallest depth N with b^N + 1 == count, or throws.
inline unsigned depth_for_point_count(unsigned b, std::size_t count) {
  index_t cells = 1;
  for (unsigned n = 0; n < 63; ++n) {
    if (cells + 1 == count) return n;
    if (cells > (index_t{1} << 62) / b) break;
    cells *= b;
  }
  throw std::runtime_error("row count " + std::to_string(count) + " is not b^N + 1 for b = " + std::to_string(b));
}

/// A path from two-column CSV whose t column must be the grid k / b^N.
inline GridPath read_path_csv(std::istream& is, unsigned b) {
  const auto rows = read_two_column_csv(is);
  const BadicGrid g(b, depth_for_point_count(b, rows.size()));
  std::vector<double> v(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (std::abs(rows[k].first - g.point(k)) > 1e-12)
      throw std::runtime_error("row " + std::to_string(k) + ": t does not match the b-adic grid");
    v[k] = rows[k].second;
  }
  return GridPath(g, std::move(v));
}

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) throw std::runtime_error("truncated binary header");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return x;
}

inline void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

inline double get_f64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated binary payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}
}  // namespace detail

/// Little-endian uint32 b, uint32 N, then b^N + 1 float64 values.
inline void write_path_binary(std::ostream& os, const GridPath& path) {
  detail::put_u32(os, path.grid().base());
  detail::put_u32(os, path.grid().depth());
  for (double v : path.values()) detail::put_f64(os, v);
}

inline GridPath read_path_binary(std::istream& is) {
  const unsigned b = detail::get_u32(is);
  const unsigned n = detail::get_u32(is);
  const BadicGrid g(b, n);
  std::vector<double> v(g.point_count());
  for (auto& x : v) x = detail::get_f64(is);
  return GridPath(g, std::move(v));
}

/// Same header; payload is the row-major (b^N + 1)^2 matrix over grid points.
inline void write_matrix_binary(std::ostream& os, const BadicGrid& g, const std::vector<double>& row_major) {
  if (row_major.size() != g.point_count() * g.point_count())
    throw std::invalid_argument("matrix size does not match the grid");
  detail::put_u32(os, g.base());
  detail::put_u32(os, g.depth());
  for (double v : row_major) detail::put_f64(os, v);
}

inline std::pair<BadicGrid, std::vector<double>> read_matrix_binary(std::istream& is) {
  const unsigned b = detail::get_u32(is);
  const unsigned n = detail::get_u32(is);
  const BadicGrid g(b, n);
  std::vector<double> v(g.point_count() * g.point_count());
  for (auto& x : v) x = detail::get_f64(is);
  return {g, std::move(v)};
}

}  // namespace wwb
