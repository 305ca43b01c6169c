#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spr/chisq.hpp"
#include "spr/error.hpp"
#include "spr/grid.hpp"

namespace spr {

struct NoiseEstimate {
  double sigma = 0.0;
};

struct DeltaParams {
  double gamma = 0.96;
  int patch_dim = 100;
  double sigma = 0.0;
};

enum class ScanAxis { rows, cols };

namespace detail {

// Median with the mean-of-two-middles convention for even counts. That
// convention is what makes line_median_level exactly idempotent.
inline double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Subtracts the least-squares plane a + b*col + c*row fitted over valid
// pixels. The fit is centered for conditioning; the plane is removed from
// every pixel, masked ones included.
inline Grid plane_level(const Grid& g, const BitMask& mk) {
  require_same_shape(g, mk);
  double n = 0.0, sr = 0.0, sc = 0.0, sz = 0.0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (mk.valid(r, c)) {
        n += 1.0;
        sr += r;
        sc += c;
        sz += g.at(r, c);
      }
  if (n < 3.0) throw degenerate_fit_error("plane_level: fewer than 3 valid pixels");
  const double mr = sr / n, mc = sc / n, mz = sz / n;

  double scc = 0.0, srr = 0.0, src = 0.0, scz = 0.0, srz = 0.0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (mk.valid(r, c)) {
        const double dr = r - mr, dc = c - mc, dz = g.at(r, c) - mz;
        scc += dc * dc;
        srr += dr * dr;
        src += dr * dc;
        scz += dc * dz;
        srz += dr * dz;
      }
  const double det = scc * srr - src * src;
  const double scale = std::max(scc, srr);
  if (det <= 1e-12 * scale * scale)
    throw degenerate_fit_error("plane_level: valid pixels are collinear, plane fit is rank deficient");
  const double b = (srr * scz - src * srz) / det;  // per-column slope
  const double c2 = (scc * srz - src * scz) / det; // per-row slope

  Grid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      out.at(r, c) = g.at(r, c) - (mz + b * (c - mc) + c2 * (r - mr));
  return out;
}

// Flags pixels strictly below the lo-quantile or strictly above the
// hi-quantile. Quantile convention: value at floor(q*(n-1)) in sorted order
// (nearest rank, lower interpolation).
inline BitMask quantile_mask(const Grid& g, double lo = 0.01, double hi = 0.99) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw invalid_argument("quantile_mask: need 0 <= lo < hi <= 1");
  std::vector<double> sorted(g.values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double lo_val = sorted[static_cast<std::size_t>(std::floor(lo * (n - 1)))];
  const double hi_val = sorted[static_cast<std::size_t>(std::floor(hi * (n - 1)))];
  BitMask mk(g.rows, g.cols, 1);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    if (g.values[i] < lo_val || g.values[i] > hi_val) mk.bits[i] = 0;
  return mk;
}

// Aligns every scan line's valid-pixel median to the global valid-pixel
// median, preserving the overall level.
inline Grid line_median_level(const Grid& g, const BitMask& mk,
                              ScanAxis axis = ScanAxis::rows) {
  require_same_shape(g, mk);
  const int lines = axis == ScanAxis::rows ? g.rows : g.cols;
  const int span = axis == ScanAxis::rows ? g.cols : g.rows;
  auto value = [&](int line, int i) {
    return axis == ScanAxis::rows ? g.at(line, i) : g.at(i, line);
  };
  auto is_valid = [&](int line, int i) {
    return axis == ScanAxis::rows ? mk.valid(line, i) : mk.valid(i, line);
  };

  std::vector<double> global;
  global.reserve(g.size());
  std::vector<double> line_median(static_cast<std::size_t>(lines));
  std::vector<double> buf;
  for (int l = 0; l < lines; ++l) {
    buf.clear();
    for (int i = 0; i < span; ++i)
      if (is_valid(l, i)) buf.push_back(value(l, i));
    if (buf.empty())
      throw degenerate_line_error(
          "line_median_level: scan line " + std::to_string(l) + " has no valid pixels", l);
    global.insert(global.end(), buf.begin(), buf.end());
    line_median[static_cast<std::size_t>(l)] = detail::median_inplace(buf);
  }
  const double global_median = detail::median_inplace(global);

  Grid out(g.rows, g.cols);
  for (int l = 0; l < lines; ++l) {
    const double shift = global_median - line_median[static_cast<std::size_t>(l)];
    for (int i = 0; i < span; ++i) {
      if (axis == ScanAxis::rows)
        out.at(l, i) = g.at(l, i) + shift;
      else
        out.at(i, l) = g.at(i, l) + shift;
    }
  }
  return out;
}

// Robust noise std-dev from the median absolute horizontal first difference
// of valid adjacent pixel pairs. 0.6745 is the normal-consistency constant
// of the MAD rule; sqrt(2) undoes the variance doubling of differencing.
inline NoiseEstimate estimate_sigma_mad(const Grid& g, const BitMask& mk) {
  require_same_shape(g, mk);
  std::vector<double> diffs;
  diffs.reserve(g.size());
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c + 1 < g.cols; ++c)
      if (mk.valid(r, c) && mk.valid(r, c + 1))
        diffs.push_back(std::abs(g.at(r, c + 1) - g.at(r, c)));
  if (diffs.size() < 2)
    throw insufficient_data_error(
        "estimate_sigma_mad: fewer than 2 valid horizontally adjacent pixel pairs");
  const double mad = detail::median_inplace(diffs);
  return NoiseEstimate{mad / (0.6745 * std::sqrt(2.0))};
}

// delta = sigma^2 * F^-1_chi2(m)(gamma): the residual-energy budget that a
// pure-noise patch stays inside with probability gamma.
inline double compute_delta(const DeltaParams& p) {
  if (!(p.gamma > 0.0 && p.gamma < 1.0))
    throw invalid_argument("compute_delta: gamma must lie in (0,1)");
  if (p.patch_dim < 1) throw invalid_argument("compute_delta: patch_dim must be >= 1");
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma))
    throw invalid_argument("compute_delta: sigma must be finite and nonnegative");
  return p.sigma * p.sigma * chi_square_quantile(p.patch_dim, p.gamma);
}

}  // namespace spr
