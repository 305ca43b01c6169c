#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spr/error.hpp"
#include "spr/grid.hpp"
#include "spr/preprocess.hpp"

namespace spr {

struct ScarParams {
  int min_len = 4;       // pixels along the scan line
  int max_width = 2;     // scan lines a scar may span
  double threshold = 3.0;  // in multiples of the noise sigma
};

struct ScarDiagnostics {
  bool degenerate_sigma = false;
  long runs_found = 0;
  long pixels_marked = 0;
};

// Gwyddion-style scar detector. A pixel is a candidate when, for some pair of
// clean context lines (a above, b below, a + b <= max_width + 1), it deviates
// from the average of those context values by more than threshold * sigma and
// both deviations share a sign. For max_width == 1 this reduces to comparing
// against the adjacent lines. Candidates become horizontal runs; runs of at
// least min_len pixels whose vertical extent stays within max_width lines are
// marked as outliers.
inline BitMask mark_scars(const Grid& g, const NoiseEstimate& sigma, const ScarParams& p,
                          ScarDiagnostics* diag = nullptr) {
  if (g.rows < 3)
    throw invalid_argument("mark_scars: grid needs at least 3 rows of vertical context");
  if (p.min_len < 1 || p.max_width < 1 || !(p.threshold > 0.0))
    throw invalid_argument("mark_scars: min_len, max_width must be >= 1 and threshold > 0");

  BitMask mask = BitMask::all_valid(g.rows, g.cols);
  if (!(sigma.sigma > 0.0)) {
    if (diag) diag->degenerate_sigma = true;
    return mask;
  }
  const double limit = p.threshold * sigma.sigma;

  std::vector<char> candidate(g.size(), 0);
  for (int r = 1; r < g.rows - 1; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const double v = g.at(r, c);
      bool hit = false;
      for (int above = 1; !hit && above <= p.max_width && r - above >= 0; ++above) {
        const int below_max = std::min(p.max_width + 1 - above, g.rows - 1 - r);
        for (int below = 1; below <= below_max; ++below) {
          const double up = g.at(r - above, c);
          const double dn = g.at(r + below, c);
          const double du = v - up;
          const double dd = v - dn;
          if (((du > 0.0 && dd > 0.0) || (du < 0.0 && dd < 0.0)) &&
              std::abs(v - 0.5 * (up + dn)) > limit) {
            hit = true;
            break;
          }
        }
      }
      candidate[static_cast<std::size_t>(r) * g.cols + c] = hit;
    }
  }

  // Horizontal runs of candidates, length-filtered.
  struct Run {
    int row, c0, c1;  // [c0, c1]
    int component = -1;
  };
  std::vector<Run> runs;
  for (int r = 1; r < g.rows - 1; ++r) {
    int c = 0;
    while (c < g.cols) {
      if (!candidate[static_cast<std::size_t>(r) * g.cols + c]) {
        ++c;
        continue;
      }
      int c1 = c;
      while (c1 + 1 < g.cols && candidate[static_cast<std::size_t>(r) * g.cols + c1 + 1])
        ++c1;
      if (c1 - c + 1 >= p.min_len) runs.push_back(Run{r, c, c1, -1});
      c = c1 + 1;
    }
  }
  if (diag) diag->runs_found = static_cast<long>(runs.size());

  // Group runs that touch vertically (adjacent rows, overlapping columns)
  // and keep only components within the width bound.
  std::vector<int> parent(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size() && runs[j].row <= runs[i].row + 1; ++j)
      if (runs[j].row == runs[i].row + 1 && runs[i].c0 <= runs[j].c1 &&
          runs[j].c0 <= runs[i].c1)
        parent[static_cast<std::size_t>(find(static_cast<int>(j)))] =
            find(static_cast<int>(i));

  std::vector<int> row_min(runs.size(), g.rows), row_max(runs.size(), -1);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const int root = find(static_cast<int>(i));
    row_min[static_cast<std::size_t>(root)] =
        std::min(row_min[static_cast<std::size_t>(root)], runs[i].row);
    row_max[static_cast<std::size_t>(root)] =
        std::max(row_max[static_cast<std::size_t>(root)], runs[i].row);
  }
  long marked = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const int root = find(static_cast<int>(i));
    if (row_max[static_cast<std::size_t>(root)] - row_min[static_cast<std::size_t>(root)] +
            1 >
        p.max_width)
      continue;
    for (int c = runs[i].c0; c <= runs[i].c1; ++c) {
      mask.set(runs[i].row, c, false);
      ++marked;
    }
  }
  if (diag) diag->pixels_marked = marked;
  return mask;
}

// Pixel valid iff valid in both masks (outlier sets union).
inline BitMask merge_masks(const BitMask& a, const BitMask& b) {
  require_same_shape(a, b);
  BitMask out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    out.bits[i] = (a.bits[i] != 0 && b.bits[i] != 0) ? 1 : 0;
  return out;
}

}  // namespace spr
