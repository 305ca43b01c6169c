#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spr/error.hpp"
#include "spr/grid.hpp"
#include "spr/rng.hpp"

namespace spr {

enum class Motif { gaussian_bump, dimer };

// Quasi-periodic test image: one motif per lattice site, optionally with
// alternating row brightness (period doubles along rows when active).
struct LatticeSpec {
  int rows = 128;
  int cols = 128;
  double period_r = 12.0;
  double period_c = 12.0;
  Motif motif = Motif::gaussian_bump;
  double amplitude = 1.0;
  double width = 2.0;          // gaussian sigma in pixels
  double brightness_alt = 0.0;  // [0,1]; 0.5 gives 2:1 alternating amplitudes
};

struct DegradeSpec {
  double noise_sigma = 0.0;
  int scar_count = 0;
  int scar_len_min = 8;
  int scar_len_max = 16;
  int scar_width_min = 1;
  int scar_width_max = 1;
  std::uint64_t seed = 0;
};

struct Degraded {
  Grid grid;
  BitMask truth;  // 0 exactly at overwritten pixels
};

namespace detail {

inline double motif_value(Motif motif, double dr, double dc, double width,
                          double dimer_offset) {
  const double w2 = 2.0 * width * width;
  switch (motif) {
    case Motif::gaussian_bump:
      return std::exp(-(dr * dr + dc * dc) / w2);
    case Motif::dimer:
      return std::exp(-(dr * dr + (dc - dimer_offset) * (dc - dimer_offset)) / w2) +
             std::exp(-(dr * dr + (dc + dimer_offset) * (dc + dimer_offset)) / w2);
  }
  return 0.0;
}

}  // namespace detail

// The value at (r, c) is computed from coordinates wrapped into one unit cell
// (two row periods when brightness alternates), which makes the translational
// symmetry exact by construction rather than by tail cancellation.
inline Grid generate_lattice(const LatticeSpec& spec) {
  if (spec.period_r < 2.0 || spec.period_c < 2.0)
    throw invalid_argument("generate_lattice: periods must be >= 2 pixels");
  if (spec.brightness_alt < 0.0 || spec.brightness_alt > 1.0)
    throw invalid_argument("generate_lattice: brightness_alt must lie in [0,1]");
  if (!(spec.width > 0.0)) throw invalid_argument("generate_lattice: width must be positive");

  const bool alt = spec.brightness_alt > 0.0;
  const double cell_r = alt ? 2.0 * spec.period_r : spec.period_r;
  const double dimer_offset = 0.3 * spec.period_c;
  // Sites whose motif can reach into the cell; 4 periods of margin drowns
  // gaussian tails far below double precision.
  const int margin = 4;

  Grid g(spec.rows, spec.cols, 0.0);
  for (int r = 0; r < spec.rows; ++r) {
    const double u = std::fmod(static_cast<double>(r), cell_r);
    const int site_r_max = static_cast<int>(std::ceil(cell_r / spec.period_r)) + margin;
    for (int c = 0; c < spec.cols; ++c) {
      const double v = std::fmod(static_cast<double>(c), spec.period_c);
      double acc = 0.0;
      for (int i = -margin; i <= site_r_max; ++i) {
        const double site_r = i * spec.period_r;
        const double amp =
            spec.amplitude *
            (alt && ((i % 2 + 2) % 2 == 1) ? 1.0 - spec.brightness_alt : 1.0);
        if (amp == 0.0) continue;
        for (int j = -margin; j <= margin; ++j) {
          const double site_c = j * spec.period_c;
          acc += amp * detail::motif_value(spec.motif, u - site_r, v - site_c, spec.width,
                                           dimer_offset);
        }
      }
      g.at(r, c) = acc;
    }
  }
  return g;
}

// Adds seeded white gaussian noise, then overwrites scar_count horizontal
// runs with the grid minimum (dropouts read as dark rails). The returned
// mask flags exactly the overwritten pixels.
inline Degraded degrade(const Grid& g, const DegradeSpec& spec) {
  if (spec.noise_sigma < 0.0) throw invalid_argument("degrade: noise_sigma must be >= 0");
  if (spec.scar_count < 0) throw invalid_argument("degrade: scar_count must be >= 0");
  if (spec.scar_len_min < 1 || spec.scar_len_max < spec.scar_len_min ||
      spec.scar_width_min < 1 || spec.scar_width_max < spec.scar_width_min)
    throw invalid_argument("degrade: empty scar length/width range");

  Degraded out;
  out.grid = g;
  out.truth = BitMask::all_valid(g.rows, g.cols);
  SeededRng rng(spec.seed);

  if (spec.noise_sigma > 0.0)
    for (double& v : out.grid.values) v += spec.noise_sigma * rng.normal();

  if (spec.scar_count > 0) {
    const double rail = *std::min_element(out.grid.values.begin(), out.grid.values.end());
    for (int s = 0; s < spec.scar_count; ++s) {
      const int len = std::min(rng.uniform_int(spec.scar_len_min, spec.scar_len_max), g.cols);
      const int width =
          std::min(rng.uniform_int(spec.scar_width_min, spec.scar_width_max), g.rows);
      const int r0 = rng.uniform_int(0, g.rows - width);
      const int c0 = rng.uniform_int(0, g.cols - len);
      for (int r = r0; r < r0 + width; ++r)
        for (int c = c0; c < c0 + len; ++c) {
          out.grid.at(r, c) = rail;
          out.truth.set(r, c, false);
        }
    }
  }
  return out;
}

// Peak signal-to-noise ratio in dB against the reference dynamic range
// (max - min of the reference). Identical inputs return +infinity.
inline double psnr(const Grid& reference, const Grid& test, const BitMask* mask = nullptr) {
  require_same_shape(reference, test);
  if (mask) require_same_shape(reference, *mask);
  double mn = reference.values[0], mx = reference.values[0];
  for (double v : reference.values) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double peak = mx - mn;
  double sq = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    if (mask && mask->bits[i] == 0) continue;
    const double d = test.values[i] - reference.values[i];
    sq += d * d;
    ++n;
  }
  if (n == 0) throw invalid_argument("psnr: mask leaves no pixels to compare");
  const double mse = sq / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

enum class Region { valid, outlier };

// RMSE restricted to the valid or the outlier pixels of the mask.
inline double masked_rmse(const Grid& reference, const Grid& test, const BitMask& mask,
                          Region over) {
  require_same_shape(reference, test);
  require_same_shape(reference, mask);
  double sq = 0.0;
  long n = 0;
  const bool want_valid = over == Region::valid;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    if ((mask.bits[i] != 0) != want_valid) continue;
    const double d = test.values[i] - reference.values[i];
    sq += d * d;
    ++n;
  }
  if (n == 0)
    throw invalid_argument(std::string("masked_rmse: selected region (") +
                           (want_valid ? "valid" : "outlier") + ") is empty");
  return std::sqrt(sq / static_cast<double>(n));
}

// The local-filtering baseline the sparse inpainting is compared against:
// each outlier becomes the median of the nearest (up to 5 per side) valid
// pixels on its own scan line.
inline Grid baseline_line_fill(const Grid& g, const BitMask& mk) {
  require_same_shape(g, mk);
  Grid out = g;
  std::vector<double> neighbors;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (mk.valid(r, c)) continue;
      neighbors.clear();
      int found = 0;
      for (int cc = c - 1; cc >= 0 && found < 5; --cc)
        if (mk.valid(r, cc)) {
          neighbors.push_back(g.at(r, cc));
          ++found;
        }
      found = 0;
      for (int cc = c + 1; cc < g.cols && found < 5; ++cc)
        if (mk.valid(r, cc)) {
          neighbors.push_back(g.at(r, cc));
          ++found;
        }
      if (neighbors.empty())
        throw insufficient_data_error("baseline_line_fill: scan line " + std::to_string(r) +
                                      " has no valid pixels to fill from");
      std::sort(neighbors.begin(), neighbors.end());
      const std::size_t n = neighbors.size();
      out.at(r, c) =
          n % 2 == 1 ? neighbors[n / 2] : 0.5 * (neighbors[n / 2 - 1] + neighbors[n / 2]);
    }
  }
  return out;
}

}  // namespace spr
