#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "spr/error.hpp"
#include "spr/grid.hpp"

namespace spr {

// Top-left corner of one sliding window, plus its linear index in the
// row-major enumeration of all windows.
struct PatchIndex {
  int row = 0;
  int col = 0;
  int linear = 0;
};

// All overlapping edge x edge windows of a grid, one vectorized patch per
// column. Enumeration is by top-left corner, row-major; within a patch the
// pixels are rasterized row-major as well. Both orders are load-bearing:
// golden tests and file formats assume them.
struct PatchMatrix {
  int patch_dim = 0;  // m = edge * edge
  int edge = 0;
  Eigen::MatrixXd columns;  // patch_dim x count

  int count() const { return static_cast<int>(columns.cols()); }
};

namespace detail {
inline void check_patch_edge(int rows, int cols, int edge) {
  if (edge < 1)
    throw invalid_argument("patch edge must be >= 1, got " + std::to_string(edge));
  if (edge > rows || edge > cols)
    throw invalid_argument("patch edge " + std::to_string(edge) +
                           " exceeds grid dimensions " + std::to_string(rows) + "x" +
                           std::to_string(cols));
}

// Error-free accumulation (Neumaier). sum + comp carries the exact running
// total; needed so composing extracted patches reproduces the grid bit for
// bit even where several identical contributions pile up on one pixel.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
};

// Quotient of an exactly-accumulated sum by a small integer count, corrected
// so that the average of n identical values is returned exactly.
inline double compensated_divide(const CompensatedSum& s, double count) {
  const double q = s.sum / count;
  const double rem = std::fma(-q, count, s.sum);
  return q + (rem + s.comp) / count;
}
}  // namespace detail

inline int patch_count(int rows, int cols, int edge) {
  detail::check_patch_edge(rows, cols, edge);
  return (rows - edge + 1) * (cols - edge + 1);
}

inline PatchIndex patch_index(int rows, int cols, int edge, int linear) {
  const int np = patch_count(rows, cols, edge);
  if (linear < 0 || linear >= np)
    throw invalid_argument("patch index " + std::to_string(linear) + " out of range [0, " +
                           std::to_string(np) + ")");
  const int per_row = cols - edge + 1;
  return PatchIndex{linear / per_row, linear % per_row, linear};
}

inline PatchMatrix extract_patches(const Grid& g, int edge) {
  detail::check_patch_edge(g.rows, g.cols, edge);
  const int per_row = g.cols - edge + 1;
  const int np = (g.rows - edge + 1) * per_row;
  PatchMatrix pm;
  pm.edge = edge;
  pm.patch_dim = edge * edge;
  pm.columns.resize(pm.patch_dim, np);
  for (int p = 0; p < np; ++p) {
    const int pr = p / per_row;
    const int pc = p % per_row;
    double* col = pm.columns.col(p).data();
    for (int dr = 0; dr < edge; ++dr)
      for (int dc = 0; dc < edge; ++dc) col[dr * edge + dc] = g.at(pr + dr, pc + dc);
  }
  return pm;
}

inline PatchMatrix extract_mask_patches(const BitMask& mk, int edge) {
  Grid g(mk.rows, mk.cols);
  for (std::size_t i = 0; i < mk.bits.size(); ++i) g.values[i] = mk.bits[i] ? 1.0 : 0.0;
  return extract_patches(g, edge);
}

// Per-pixel window coverage, i.e. the diagonal of S^T S. Closed form;
// interior pixels sit in edge^2 windows.
inline Grid coverage_counts(int rows, int cols, int edge) {
  detail::check_patch_edge(rows, cols, edge);
  Grid cov(rows, cols);
  auto span = [edge](int i, int n) {
    const int lo = std::max(0, i - edge + 1);
    const int hi = std::min(i, n - edge);
    return hi - lo + 1;
  };
  std::vector<double> col_cov(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) col_cov[static_cast<std::size_t>(c)] = span(c, cols);
  for (int r = 0; r < rows; ++r) {
    const double rc = span(r, rows);
    for (int c = 0; c < cols; ++c) cov.at(r, c) = rc * col_cov[static_cast<std::size_t>(c)];
  }
  return cov;
}

// Pixel-wise average of all patch estimates covering each pixel (the S^dagger
// composition). Accumulation runs in patch raster order with compensated
// sums, making compose(extract(g)) == g an exact identity.
inline Grid compose_patches(const PatchMatrix& estimates, int rows, int cols) {
  const int edge = estimates.edge;
  if (edge < 1 || edge * edge != estimates.patch_dim)
    throw invalid_argument("compose_patches: patch_dim is not a perfect square of the edge");
  const int np = patch_count(rows, cols, edge);
  if (estimates.count() != np)
    throw invalid_argument("compose_patches: expected " + std::to_string(np) +
                           " patches for " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ", got " + std::to_string(estimates.count()));

  std::vector<detail::CompensatedSum> acc(static_cast<std::size_t>(rows) * cols);
  std::vector<int> cover(static_cast<std::size_t>(rows) * cols, 0);
  const int per_row = cols - edge + 1;
  for (int p = 0; p < np; ++p) {
    const int pr = p / per_row;
    const int pc = p % per_row;
    const double* col = estimates.columns.col(p).data();
    for (int dr = 0; dr < edge; ++dr) {
      const std::size_t base = static_cast<std::size_t>(pr + dr) * cols + pc;
      for (int dc = 0; dc < edge; ++dc) {
        acc[base + dc].add(col[dr * edge + dc]);
        ++cover[base + dc];
      }
    }
  }
  Grid out(rows, cols);
  for (std::size_t i = 0; i < acc.size(); ++i)
    out.values[i] = detail::compensated_divide(acc[i], static_cast<double>(cover[i]));
  return out;
}

}  // namespace spr
