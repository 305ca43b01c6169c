#pragma once

#include <string>
#include <vector>

#include "spr/grid.hpp"
#include "spr/rng.hpp"

namespace sprtest {

inline spr::Grid random_grid(int rows, int cols, spr::SeededRng& rng, double lo = -1.0,
                             double hi = 1.0) {
  spr::Grid g(rows, cols);
  for (double& v : g.values) v = lo + (hi - lo) * rng.uniform01();
  return g;
}

inline bool bit_equal(const spr::Grid& a, const spr::Grid& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a.values[i] != b.values[i]) return false;
  return true;
}

inline double max_abs_diff(const spr::Grid& a, const spr::Grid& b) {
  double mx = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    mx = std::max(mx, std::abs(a.values[i] - b.values[i]));
  return mx;
}

inline double max_abs(const spr::Grid& g) {
  double mx = 0.0;
  for (double v : g.values) mx = std::max(mx, std::abs(v));
  return mx;
}

}  // namespace sprtest
