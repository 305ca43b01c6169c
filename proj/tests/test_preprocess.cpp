#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "spr/preprocess.hpp"
#include "test_util.hpp"

using namespace spr;

namespace {

Grid plane(int rows, int cols, double a, double b, double c) {
  Grid g(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int cc = 0; cc < cols; ++cc) g.at(r, cc) = a + b * cc + c * r;
  return g;
}

// Re-fit a plane over valid pixels; returns max(|a|,|b|,|c|).
double refit_plane_coeff(const Grid& g, const BitMask& mk) {
  double n = 0, sr = 0, sc = 0, sz = 0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (mk.valid(r, c)) {
        n++;
        sr += r;
        sc += c;
        sz += g.at(r, c);
      }
  const double mr = sr / n, mc = sc / n, mz = sz / n;
  double scc = 0, srr = 0, src = 0, scz = 0, srz = 0;
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
  const double b = (srr * scz - src * srz) / det;
  const double c2 = (scc * srz - src * scz) / det;
  const double a = mz - b * mc - c2 * mr;
  return std::max({std::abs(a), std::abs(b), std::abs(c2)});
}

}  // namespace

TEST_CASE("plane_level removes an exact plane") {
  Grid g = plane(20, 17, 3.0, -0.25, 0.5);
  BitMask mk = BitMask::all_valid(20, 17);
  Grid out = plane_level(g, mk);
  CHECK(sprtest::max_abs(out) <= 1e-12 * sprtest::max_abs(g));
}

TEST_CASE("plane_level leaves a masked spike intact") {
  Grid g = plane(16, 16, 1.0, 0.1, -0.2);
  g.at(7, 9) += 50.0;
  BitMask mk = BitMask::all_valid(16, 16);
  mk.set(7, 9, false);
  Grid out = plane_level(g, mk);
  CHECK(out.at(7, 9) == Catch::Approx(50.0).margin(1e-9));
  out.at(7, 9) = 0.0;
  CHECK(sprtest::max_abs(out) <= 1e-9 * sprtest::max_abs(g));
}

TEST_CASE("plane_level of a constant grid is zero") {
  Grid g(8, 8, 42.0);
  Grid out = plane_level(g, BitMask::all_valid(8, 8));
  CHECK(sprtest::max_abs(out) <= 1e-12 * 42.0);
}

TEST_CASE("plane_level refit contract and idempotence on random data") {
  SeededRng rng(31);
  for (int t = 0; t < 10; ++t) {
    Grid g = sprtest::random_grid(24, 31, rng, -2.0, 2.0);
    // ride a strong plane on top
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) g.at(r, c) += 5.0 - 0.8 * c + 1.1 * r;
    BitMask mk = BitMask::all_valid(g.rows, g.cols);
    Grid once = plane_level(g, mk);
    CHECK(refit_plane_coeff(once, mk) <= 1e-9 * sprtest::max_abs(g));
    Grid twice = plane_level(once, mk);
    CHECK(sprtest::max_abs_diff(once, twice) <=
          1e-10 * std::max(1.0, sprtest::max_abs(once)));
  }
}

TEST_CASE("plane_level rejects degenerate fits") {
  Grid g(6, 6, 1.0);
  BitMask mk(6, 6, 0);
  for (int c = 0; c < 6; ++c) mk.set(2, c, true);  // all valid pixels on one line
  CHECK_THROWS_AS(plane_level(g, mk), degenerate_fit_error);
}

TEST_CASE("quantile_mask follows the declared nearest-rank rule") {
  // 100x100 ramp of distinct values 0..9999. Under the rule (cutoffs at
  // floor(q*(n-1)) with strict exceedance) the oracle count is 99 lows
  // (values 0..98) and 100 highs (values 9900..9999).
  Grid g(100, 100);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<double>(i);
  BitMask mk = quantile_mask(g, 0.01, 0.99);

  std::vector<double> sorted(g.values);
  std::sort(sorted.begin(), sorted.end());
  const double lo_cut = sorted[static_cast<std::size_t>(std::floor(0.01 * 9999))];
  const double hi_cut = sorted[static_cast<std::size_t>(std::floor(0.99 * 9999))];
  long lows = 0, highs = 0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const bool masked = mk.bits[i] == 0;
    const bool should = g.values[i] < lo_cut || g.values[i] > hi_cut;
    REQUIRE(masked == should);
    if (masked && g.values[i] < lo_cut) ++lows;
    if (masked && g.values[i] > hi_cut) ++highs;
  }
  CHECK(lo_cut == 99.0);
  CHECK(hi_cut == 9899.0);
  CHECK(lows == 99);
  CHECK(highs == 100);
}

TEST_CASE("quantile_mask trivial cases and monotonicity") {
  Grid g(10, 10, 7.0);
  CHECK(quantile_mask(g, 0.01, 0.99).count_outliers() == 0);

  SeededRng rng(37);
  Grid r = sprtest::random_grid(30, 30, rng);
  CHECK(quantile_mask(r, 0.0, 1.0).count_outliers() == 0);

  const BitMask narrow = quantile_mask(r, 0.10, 0.90);
  const BitMask wide = quantile_mask(r, 0.05, 0.95);
  CHECK(wide.count_outliers() <= narrow.count_outliers());
  for (std::size_t i = 0; i < narrow.bits.size(); ++i)
    if (narrow.bits[i] == 1) CHECK(wide.bits[i] == 1);

  CHECK_THROWS_AS(quantile_mask(r, 0.5, 0.5), invalid_argument);
  CHECK_THROWS_AS(quantile_mask(r, -0.1, 0.9), invalid_argument);
}

TEST_CASE("line_median_level equalizes per-row offsets") {
  SeededRng rng(41);
  Grid base = sprtest::random_grid(1, 20, rng);
  Grid g(12, 20);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 20; ++c) g.at(r, c) = base.at(0, c) + 3.0 * r;
  BitMask mk = BitMask::all_valid(12, 20);
  Grid out = line_median_level(g, mk);

  // every line's median must now equal the global median of the original
  std::vector<double> all(out.values);
  std::sort(all.begin(), all.end());
  const double global = 0.5 * (all[all.size() / 2 - 1] + all[all.size() / 2]);
  for (int r = 0; r < 12; ++r) {
    std::vector<double> row;
    for (int c = 0; c < 20; ++c) row.push_back(out.at(r, c));
    std::sort(row.begin(), row.end());
    const double med = 0.5 * (row[9] + row[10]);
    CHECK(med == Catch::Approx(global).margin(1e-12));
  }
}

TEST_CASE("line_median_level hand case: medians 1,5,9 shift by +4,0,-4") {
  Grid g(3, 3, {0, 1, 2, 4, 5, 6, 8, 9, 10});
  Grid out = line_median_level(g, BitMask::all_valid(3, 3));
  for (int c = 0; c < 3; ++c) {
    CHECK(out.at(0, c) == Catch::Approx(g.at(0, c) + 4.0));
    CHECK(out.at(1, c) == Catch::Approx(g.at(1, c)));
    CHECK(out.at(2, c) == Catch::Approx(g.at(2, c) - 4.0));
  }
}

TEST_CASE("line_median_level is idempotent") {
  SeededRng rng(43);
  for (int t = 0; t < 8; ++t) {
    Grid g = sprtest::random_grid(15, 22, rng, -3.0, 3.0);
    BitMask mk = BitMask::all_valid(15, 22);
    // scatter some outliers
    for (int i = 0; i < 20; ++i)
      mk.set(rng.uniform_int(0, 14), rng.uniform_int(0, 21), false);
    bool any_empty_line = false;
    for (int r = 0; r < 15 && !any_empty_line; ++r) {
      bool has = false;
      for (int c = 0; c < 22; ++c) has = has || mk.valid(r, c);
      any_empty_line = !has;
    }
    if (any_empty_line) continue;
    Grid once = line_median_level(g, mk);
    Grid twice = line_median_level(once, mk);
    CHECK(sprtest::max_abs_diff(once, twice) <= 1e-12 * std::max(1.0, sprtest::max_abs(once)));
  }
}

TEST_CASE("line_median_level names the fully masked line") {
  Grid g(5, 5, 1.0);
  BitMask mk = BitMask::all_valid(5, 5);
  for (int c = 0; c < 5; ++c) mk.set(3, c, false);
  try {
    line_median_level(g, mk);
    FAIL("expected degenerate_line_error");
  } catch (const degenerate_line_error& e) {
    CHECK(e.line_index == 3);
  }
}

TEST_CASE("line_median_level along columns") {
  Grid g(4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) g.at(r, c) = 10.0 * c + r;
  Grid out = line_median_level(g, BitMask::all_valid(4, 3), ScanAxis::cols);
  // each column's median equalized; column differences removed
  for (int r = 0; r < 4; ++r) {
    CHECK(out.at(r, 0) == Catch::Approx(out.at(r, 1)));
    CHECK(out.at(r, 1) == Catch::Approx(out.at(r, 2)));
  }
}

TEST_CASE("estimate_sigma_mad basics") {
  Grid g(8, 8, 5.0);
  CHECK(estimate_sigma_mad(g, BitMask::all_valid(8, 8)).sigma == 0.0);

  // scaling by 2 is bit-exact (median and abs are exact under *2)
  SeededRng rng(47);
  Grid r = sprtest::random_grid(20, 20, rng);
  Grid r2 = r;
  for (double& v : r2.values) v *= 2.0;
  const double s1 = estimate_sigma_mad(r, BitMask::all_valid(20, 20)).sigma;
  const double s2 = estimate_sigma_mad(r2, BitMask::all_valid(20, 20)).sigma;
  CHECK(s2 == 2.0 * s1);
}

TEST_CASE("estimate_sigma_mad recovers a known noise level") {
  const int n = 512;
  Grid g(n, n);
  SeededRng rng(4711);
  double noise_sq = 0.0, noise_sum = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double smooth = std::sin(2.0 * M_PI * r / 256.0) * std::sin(2.0 * M_PI * c / 256.0);
      const double nz = rng.normal();
      noise_sq += nz * nz;
      noise_sum += nz;
      g.at(r, c) = smooth + nz;
    }
  const double count = static_cast<double>(n) * n;
  const double noise_std =
      std::sqrt((noise_sq - noise_sum * noise_sum / count) / (count - 1.0));
  const double sigma_hat = estimate_sigma_mad(g, BitMask::all_valid(n, n)).sigma;
  CHECK(sigma_hat >= 0.95);
  CHECK(sigma_hat <= 1.05);
  CHECK(std::abs(sigma_hat - noise_std) <= 0.05);
}

TEST_CASE("estimate_sigma_mad is shift invariant but not ramp invariant") {
  SeededRng rng(53);
  Grid g = sprtest::random_grid(24, 24, rng);
  BitMask mk = BitMask::all_valid(24, 24);
  const double s0 = estimate_sigma_mad(g, mk).sigma;

  Grid shifted = g;
  for (double& v : shifted.values) v += 123.0;
  CHECK(estimate_sigma_mad(shifted, mk).sigma == s0);

  Grid ramped = g;
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c) ramped.at(r, c) += 10.0 * c;
  CHECK(estimate_sigma_mad(ramped, mk).sigma != s0);  // hence plane_level runs first
}

TEST_CASE("estimate_sigma_mad needs at least two valid pairs") {
  Grid g(3, 3, 1.0);
  BitMask mk(3, 3, 0);
  mk.set(0, 0, true);
  mk.set(2, 2, true);  // no adjacent pair at all
  CHECK_THROWS_AS(estimate_sigma_mad(g, mk), insufficient_data_error);
}

TEST_CASE("compute_delta matches the closed-form chi-square(2) quantile") {
  const double gamma = 1.0 - std::exp(-1.0);
  const double q = compute_delta({gamma, 2, 1.0});
  CHECK(std::abs(q - 2.0) <= 1e-12);
}

TEST_CASE("compute_delta scales exactly with sigma^2") {
  const double d1 = compute_delta({0.96, 100, 1.0});
  const double d2 = compute_delta({0.96, 100, 2.0});
  CHECK(d2 == 4.0 * d1);
}

TEST_CASE("compute_delta agrees with the independent even-df oracle") {
  for (const int m : {2, 10, 64, 100}) {
    for (const double gamma : {0.5, 0.9, 0.96, 0.999}) {
      const double mine = compute_delta({gamma, m, 1.0});
      const double ref = oracle::chi2_quantile_even_df(m, gamma);
      CHECK(std::abs(mine - ref) <= 1e-8 * ref);
    }
  }
}

TEST_CASE("compute_delta is strictly increasing in gamma and patch_dim") {
  double prev = 0.0;
  for (const double gamma : {0.1, 0.3, 0.5, 0.7, 0.9, 0.96, 0.99}) {
    const double v = compute_delta({gamma, 25, 1.0});
    CHECK(v > prev);
    prev = v;
  }
  prev = 0.0;
  for (const int m : {1, 2, 5, 25, 60, 100, 144}) {
    const double v = compute_delta({0.96, m, 1.0});
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("compute_delta validates gamma") {
  CHECK_THROWS_AS(compute_delta({0.0, 100, 1.0}), invalid_argument);
  CHECK_THROWS_AS(compute_delta({1.0, 100, 1.0}), invalid_argument);
  CHECK_THROWS_AS(compute_delta({1.5, 100, 1.0}), invalid_argument);
}
