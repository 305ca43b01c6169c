#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spr/artifacts.hpp"
#include "test_util.hpp"

using namespace spr;

namespace {

// Varies along columns only; vertical differences of the clean grid are
// exactly zero, so candidates come from the injections alone.
Grid column_base(int rows, int cols) {
  Grid g(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) g.at(r, c) = 0.04 * std::cos(0.15 * c);
  return g;
}

long masked_count(const BitMask& mk) { return static_cast<long>(mk.count_outliers()); }

}  // namespace

TEST_CASE("mark_scars leaves a constant grid untouched") {
  Grid g(16, 16, 3.0);
  BitMask mk = mark_scars(g, {1.0}, {4, 2, 3.0});
  CHECK(masked_count(mk) == 0);
}

TEST_CASE("mark_scars finds an injected single-line run exactly") {
  Grid g = column_base(24, 40);
  const double sigma = 0.1;
  const int row = 11, c0 = 8, len = 8;
  for (int c = c0; c < c0 + len; ++c) g.at(row, c) += 10.0 * sigma;

  BitMask mk = mark_scars(g, {sigma}, {4, 2, 3.0});
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const bool in_run = r == row && c >= c0 && c < c0 + len;
      if (in_run)
        CHECK(!mk.valid(r, c));
      else if (r != row || c < c0 - 1 || c > c0 + len)  // one pixel of slack at run ends
        CHECK(mk.valid(r, c));
    }
}

TEST_CASE("mark_scars respects min_len") {
  Grid g = column_base(24, 40);
  const double sigma = 0.1;
  for (int c = 8; c < 16; ++c) g.at(11, c) += 10.0 * sigma;  // 8-pixel run
  BitMask mk = mark_scars(g, {sigma}, {16, 2, 3.0});
  CHECK(masked_count(mk) == 0);
}

TEST_CASE("mark_scars detects a two-line scar when max_width allows") {
  Grid g = column_base(30, 50);
  const double sigma = 0.1;
  for (int r = 14; r <= 15; ++r)
    for (int c = 10; c < 28; ++c) g.at(r, c) -= 12.0 * sigma;

  BitMask narrow = mark_scars(g, {sigma}, {4, 1, 3.0});
  BitMask wide = mark_scars(g, {sigma}, {4, 2, 3.0});
  CHECK(masked_count(narrow) == 0);  // width-1 context cannot see around a 2-line scar
  long hit = 0;
  for (int r = 14; r <= 15; ++r)
    for (int c = 10; c < 28; ++c) hit += !wide.valid(r, c);
  CHECK(hit == 2 * 18);
  CHECK(masked_count(wide) == 2 * 18);
}

TEST_CASE("mark_scars ignores blocks taller than max_width") {
  Grid g = column_base(30, 50);
  const double sigma = 0.1;
  for (int r = 14; r <= 16; ++r)  // 3 lines tall
    for (int c = 10; c < 28; ++c) g.at(r, c) += 15.0 * sigma;
  BitMask mk = mark_scars(g, {sigma}, {4, 2, 3.0});
  CHECK(masked_count(mk) == 0);
}

TEST_CASE("mark_scars with zero sigma degenerates to all-valid plus a warning") {
  Grid g = column_base(10, 10);
  ScarDiagnostics diag;
  BitMask mk = mark_scars(g, {0.0}, {4, 2, 3.0}, &diag);
  CHECK(diag.degenerate_sigma);
  CHECK(masked_count(mk) == 0);
}

TEST_CASE("mark_scars threshold monotonicity") {
  SeededRng rng(263);
  Grid g = column_base(32, 48);
  for (const int r : {2, 6, 10, 14, 18, 22}) {  // spaced so components never merge
    const int c0 = rng.uniform_int(0, 30);
    const double amp = (2.0 + 4.0 * rng.uniform01()) * 0.1;
    for (int c = c0; c < c0 + 10; ++c) g.at(r, c) += amp;
  }
  const NoiseEstimate sigma{0.1};
  BitMask loose = mark_scars(g, sigma, {4, 2, 2.0});
  BitMask strict = mark_scars(g, sigma, {4, 2, 4.0});
  CHECK(masked_count(strict) <= masked_count(loose));
  for (std::size_t i = 0; i < loose.bits.size(); ++i)
    if (strict.bits[i] == 0) CHECK(loose.bits[i] == 0);
}

TEST_CASE("mark_scars output never exceeds max_width per component") {
  SeededRng rng(269);
  for (const int max_width : {1, 2, 3}) {
    Grid g = column_base(40, 40);
    for (int i = 0; i < 8; ++i) {
      const int w = rng.uniform_int(1, 3);
      const int r = rng.uniform_int(1, 36 - w);
      const int c0 = rng.uniform_int(0, 20);
      for (int rr = r; rr < r + w; ++rr)
        for (int c = c0; c < c0 + 12; ++c) g.at(rr, c) += 1.0;
    }
    BitMask mk = mark_scars(g, {0.05}, {4, max_width, 3.0});
    for (int c = 0; c < 40; ++c) {
      int run = 0;
      for (int r = 0; r < 40; ++r) {
        run = mk.valid(r, c) ? 0 : run + 1;
        CHECK(run <= max_width);
      }
    }
  }
}

TEST_CASE("mark_scars validates its inputs") {
  Grid g(2, 10, 0.0);
  CHECK_THROWS_AS(mark_scars(g, {1.0}, {4, 2, 3.0}), invalid_argument);
  Grid ok(10, 10, 0.0);
  CHECK_THROWS_AS(mark_scars(ok, {1.0}, {0, 2, 3.0}), invalid_argument);
  CHECK_THROWS_AS(mark_scars(ok, {1.0}, {4, 0, 3.0}), invalid_argument);
  CHECK_THROWS_AS(mark_scars(ok, {1.0}, {4, 2, 0.0}), invalid_argument);
}

TEST_CASE("merge_masks algebra") {
  SeededRng rng(271);
  BitMask a(6, 6, 1), b(6, 6, 1), ones(6, 6, 1);
  for (int i = 0; i < 8; ++i) {
    a.set(rng.uniform_int(0, 5), rng.uniform_int(0, 5), false);
    b.set(rng.uniform_int(0, 5), rng.uniform_int(0, 5), false);
  }
  CHECK(merge_masks(a, ones).bits == a.bits);               // identity element
  CHECK(merge_masks(a, a).bits == a.bits);                  // idempotent
  CHECK(merge_masks(a, b).bits == merge_masks(b, a).bits);  // commutative

  BitMask c(6, 6, 1);
  c.set(0, 0, false);
  CHECK(merge_masks(merge_masks(a, b), c).bits == merge_masks(a, merge_masks(b, c)).bits);

  // disjoint outlier sets combine to the union
  BitMask d1(4, 4, 1), d2(4, 4, 1);
  d1.set(0, 1, false);
  d2.set(3, 2, false);
  BitMask u = merge_masks(d1, d2);
  CHECK(u.count_outliers() == 2);
  CHECK(!u.valid(0, 1));
  CHECK(!u.valid(3, 2));

  BitMask wrong(5, 6, 1);
  CHECK_THROWS_AS(merge_masks(a, wrong), invalid_argument);
}
