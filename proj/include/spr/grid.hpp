#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spr/error.hpp"

namespace spr {

namespace detail {
inline std::size_t checked_cell_count(int rows, int cols, const char* what) {
  if (rows <= 0 || cols <= 0)
    throw invalid_argument(std::string(what) + ": dimensions must be positive, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
  return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
}
}  // namespace detail

// Rectangular scalar field, row-major storage. Values are in whatever
// height/current units the instrument produced; nothing here rescales them.
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(detail::checked_cell_count(r, c, "Grid"), fill) {}
  Grid(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != detail::checked_cell_count(r, c, "Grid"))
      throw invalid_argument("Grid: value count does not match dimensions");
  }

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return values.size(); }

  bool same_shape(int r, int c) const { return rows == r && cols == c; }
};

// Per-pixel validity flags; 1 = valid, 0 = outlier.
struct BitMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;

  BitMask() = default;
  BitMask(int r, int c, std::uint8_t fill = 1)
      : rows(r), cols(c), bits(detail::checked_cell_count(r, c, "BitMask"), fill) {}

  static BitMask all_valid(int r, int c) { return BitMask(r, c, 1); }

  bool valid(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool v) {
    bits[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0;
  }
  std::size_t size() const { return bits.size(); }

  std::size_t count_valid() const {
    std::size_t n = 0;
    for (auto b : bits) n += (b != 0);
    return n;
  }
  std::size_t count_outliers() const { return bits.size() - count_valid(); }
};

inline void require_finite(const Grid& g, const char* what = "grid") {
  for (std::size_t i = 0; i < g.values.size(); ++i)
    if (!std::isfinite(g.values[i]))
      throw invalid_argument(std::string(what) + ": non-finite value at flat index " +
                             std::to_string(i));
}

inline void require_same_shape(const Grid& g, const BitMask& m) {
  if (g.rows != m.rows || g.cols != m.cols)
    throw invalid_argument("mask shape " + std::to_string(m.rows) + "x" +
                           std::to_string(m.cols) + " does not match grid " +
                           std::to_string(g.rows) + "x" + std::to_string(g.cols));
}

inline void require_same_shape(const Grid& a, const Grid& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw invalid_argument("grid shapes differ: " + std::to_string(a.rows) + "x" +
                           std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                           std::to_string(b.cols));
}

inline void require_same_shape(const BitMask& a, const BitMask& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw invalid_argument("mask shapes differ: " + std::to_string(a.rows) + "x" +
                           std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                           std::to_string(b.cols));
}

}  // namespace spr
