#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "spr/io.hpp"
#include "test_util.hpp"

using namespace spr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spr-io-" + std::to_string(static_cast<unsigned>(::getpid())));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("tsv grid round-trips bit-exactly") {
  TempDir tmp;
  SeededRng rng(307);
  Grid g = sprtest::random_grid(13, 9, rng, -1e6, 1e6);
  g.at(0, 0) = 1e-300;
  g.at(0, 1) = -3.14159265358979312e44;
  g.at(0, 2) = 0.1;
  Metadata meta{{"units", "nm"}, {"source", "test"}};
  write_grid(g, meta, tmp.file("g.tsv"), GridFormat::tsv_float);

  GridFile back = read_grid(tmp.file("g.tsv"));
  CHECK(back.format == GridFormat::tsv_float);
  REQUIRE(sprtest::bit_equal(back.grid, g));
  REQUIRE(back.metadata.size() == 2);
  CHECK(back.metadata[0].first == "units");
  CHECK(back.metadata[0].second == "nm");
}

TEST_CASE("a 1x1 grid makes a valid minimal file") {
  TempDir tmp;
  Grid g(1, 1, -0.125);
  write_grid(g, {}, tmp.file("one.tsv"), GridFormat::tsv_float);
  CHECK(sprtest::bit_equal(read_grid(tmp.file("one.tsv")).grid, g));

  write_grid(g, {}, tmp.file("one.pgm"), GridFormat::pgm16);
  CHECK(read_grid(tmp.file("one.pgm")).grid.at(0, 0) == -0.125);
}

TEST_CASE("pgm16 round-trip stays within the quantization bound") {
  TempDir tmp;
  SeededRng rng(311);
  Grid g = sprtest::random_grid(21, 17, rng, -3.0, 7.0);
  write_grid(g, {{"units", "pA"}}, tmp.file("g.pgm"), GridFormat::pgm16);
  GridFile back = read_grid(tmp.file("g.pgm"));
  CHECK(back.format == GridFormat::pgm16);
  CHECK(sprtest::max_abs_diff(back.grid, g) <= 10.0 / 65535.0);
  bool units_seen = false;
  for (const auto& [k, v] : back.metadata) units_seen = units_seen || (k == "units" && v == "pA");
  CHECK(units_seen);
}

TEST_CASE("pgm16 of a constant grid reproduces the constant exactly") {
  TempDir tmp;
  Grid g(5, 5, 2.5);
  write_grid(g, {}, tmp.file("c.pgm"), GridFormat::pgm16);
  CHECK(sprtest::bit_equal(read_grid(tmp.file("c.pgm")).grid, g));
}

TEST_CASE("grid parser reports malformed input with line numbers") {
  TempDir tmp;
  write_text(tmp.file("bad1"), "SPGRID v2 3 3\n");
  CHECK_THROWS_AS(read_grid(tmp.file("bad1")), parse_error);

  write_text(tmp.file("bad2"), "SPGRID v1 2 2\n1 2\n3\n");
  try {
    read_grid(tmp.file("bad2"));
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line_number == 3);
  }

  write_text(tmp.file("bad3"), "SPGRID v1 2 2\n1 2\n3 nan\n");
  CHECK_THROWS_AS(read_grid(tmp.file("bad3")), parse_error);

  write_text(tmp.file("bad4"), "SPGRID v1 2 2\n1 2 9\n3 4\n");
  CHECK_THROWS_AS(read_grid(tmp.file("bad4")), parse_error);

  write_text(tmp.file("bad5"), "SPGRID v1 3 2\n1 2\n3 4\n");
  CHECK_THROWS_AS(read_grid(tmp.file("bad5")), parse_error);

  write_text(tmp.file("bad6"), "nonsense\n");
  CHECK_THROWS_AS(read_grid(tmp.file("bad6")), parse_error);

  CHECK_THROWS_AS(read_grid(tmp.file("missing")), parse_error);
}

TEST_CASE("mask round-trips bit-exactly") {
  TempDir tmp;
  SECTION("all valid") {
    BitMask mk = BitMask::all_valid(9, 13);
    write_mask(mk, tmp.file("m.pbm"));
    CHECK(read_mask(tmp.file("m.pbm")).bits == mk.bits);
  }
  SECTION("random masks of awkward widths") {
    SeededRng rng(313);
    for (const int cols : {1, 7, 8, 9, 17}) {
      BitMask mk(5, cols, 1);
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < cols; ++c) mk.set(r, c, rng.uniform01() < 0.5);
      const std::string path = tmp.file("m" + std::to_string(cols) + ".pbm");
      write_mask(mk, path);
      BitMask back = read_mask(path);
      REQUIRE(back.rows == 5);
      REQUIRE(back.cols == cols);
      CHECK(back.bits == mk.bits);
    }
  }
}

TEST_CASE("mask parser rejects malformed input") {
  TempDir tmp;
  write_text(tmp.file("bad.pbm"), "P1\n3 3\n");
  CHECK_THROWS_AS(read_mask(tmp.file("bad.pbm")), parse_error);
  write_text(tmp.file("short.pbm"), "P4\n16 4\nxy");
  CHECK_THROWS_AS(read_mask(tmp.file("short.pbm")), parse_error);
}

TEST_CASE("dictionary round-trips bit-exactly") {
  TempDir tmp;
  SeededRng rng(317);
  Dictionary d;
  d.patch_dim = 7;
  d.atom_count = 5;
  d.atoms.resize(7, 5);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 7; ++i) d.atoms(i, j) = rng.normal();
    d.atoms.col(j) /= d.atoms.col(j).norm() * (1.0 + rng.uniform01());
  }
  write_dictionary(d, tmp.file("d.spdict"));
  Dictionary back = read_dictionary(tmp.file("d.spdict"));
  REQUIRE(back.patch_dim == 7);
  REQUIRE(back.atom_count == 5);
  CHECK(back.atoms == d.atoms);
}

TEST_CASE("identity dictionary golden file") {
  TempDir tmp;
  Dictionary d = Dictionary::identity(2);
  write_dictionary(d, tmp.file("id.spdict"));
  std::ifstream in(tmp.file("id.spdict"));
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "SPDICT v1\n2 2\n1 0\n0 1\n");
}

TEST_CASE("dictionary parser rejects malformed input") {
  TempDir tmp;
  write_text(tmp.file("t1"), "SPDICT v0\n2 2\n1 0\n0 1\n");
  CHECK_THROWS_AS(read_dictionary(tmp.file("t1")), parse_error);
  write_text(tmp.file("t2"), "SPDICT v1\n2 2\n1 0\n");  // truncated
  CHECK_THROWS_AS(read_dictionary(tmp.file("t2")), parse_error);
  write_text(tmp.file("t3"), "SPDICT v1\n2 2\n1 0\n0 1 5\n");  // trailing junk
  CHECK_THROWS_AS(read_dictionary(tmp.file("t3")), parse_error);
  write_text(tmp.file("t4"), "SPDICT v1\n-2 2\n");
  CHECK_THROWS_AS(read_dictionary(tmp.file("t4")), parse_error);
}
