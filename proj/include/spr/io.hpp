#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spr/dictionary.hpp"
#include "spr/error.hpp"
#include "spr/grid.hpp"

namespace spr {

using Metadata = std::vector<std::pair<std::string, std::string>>;

enum class GridFormat { tsv_float, pgm16 };

struct GridFile {
  Grid grid;
  Metadata metadata;
  GridFormat format = GridFormat::tsv_float;
};

namespace detail {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw parse_error("cannot open '" + path + "' for writing");
  return out;
}

inline void write_metadata_comments(std::ofstream& out, const Metadata& meta) {
  for (const auto& [key, value] : meta) {
    if (key.find_first_of("\n\r=#") != std::string::npos ||
        value.find_first_of("\n\r") != std::string::npos)
      throw invalid_argument("metadata keys/values must be single-line, key without '=' or '#'");
    out << "# " << key << "=" << value << "\n";
  }
}

inline bool parse_meta_comment(const std::string& line, Metadata& meta) {
  if (line.empty() || line[0] != '#') return false;
  std::size_t start = 1;
  while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start])))
    ++start;
  const std::size_t eq = line.find('=', start);
  if (eq == std::string::npos) {
    meta.emplace_back(line.substr(start), "");
  } else {
    meta.emplace_back(line.substr(start, eq - start), line.substr(eq + 1));
  }
  return true;
}

inline double parse_double_token(const char*& cursor, long line_no) {
  char* end = nullptr;
  const double v = std::strtod(cursor, &end);
  if (end == cursor) throw parse_error("expected a number", line_no);
  cursor = end;
  if (!std::isfinite(v)) throw parse_error("non-finite value", line_no);
  return v;
}

// PNM header tokens: whitespace separated, '#' comments run to end of line.
inline std::string pnm_token(std::istream& in, Metadata* meta) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      std::string line = "#";
      while ((ch = in.get()) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
      if (meta) parse_meta_comment(line, *meta);
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

inline long parse_pnm_int(std::istream& in, Metadata* meta, const char* what) {
  const std::string tok = pnm_token(in, meta);
  if (tok.empty()) throw parse_error(std::string("truncated header, missing ") + what);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (*end != '\0' || v <= 0)
    throw parse_error(std::string("bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

// --- grids ----------------------------------------------------------------
//
// tsv-float: line "SPGRID v1 <rows> <cols>", optional "# key=value" comment
// lines, then <rows> lines of <cols> tab-separated full-precision decimals.
// Round-trips bit-exactly.
//
// pgm16: binary P5, maxval 65535, big-endian samples as the PNM standard
// requires; quantization offset/scale are recorded as header comments so
// read(write(g)) is within (max-min)/65535 of g.

inline void write_grid(const Grid& g, const Metadata& meta, const std::string& path,
                       GridFormat format) {
  require_finite(g);
  auto out = detail::open_output(path);
  if (format == GridFormat::tsv_float) {
    out << "SPGRID v1 " << g.rows << " " << g.cols << "\n";
    detail::write_metadata_comments(out, meta);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        if (c) out << '\t';
        out << detail::format_double(g.at(r, c));
      }
      out << '\n';
    }
  } else {
    double mn = g.values[0], mx = g.values[0];
    for (double v : g.values) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    const double scale = (mx - mn) / 65535.0;
    out << "P5\n";
    out << "# offset=" << detail::format_double(mn) << "\n";
    out << "# scale=" << detail::format_double(scale) << "\n";
    detail::write_metadata_comments(out, meta);
    out << g.cols << " " << g.rows << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(g.cols) * 2);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        const double q =
            scale > 0.0 ? std::round((g.at(r, c) - mn) / scale) : 0.0;
        const auto u = static_cast<std::uint16_t>(std::min(65535.0, std::max(0.0, q)));
        row[static_cast<std::size_t>(c) * 2] = static_cast<unsigned char>(u >> 8);
        row[static_cast<std::size_t>(c) * 2 + 1] = static_cast<unsigned char>(u & 0xff);
      }
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<long>(row.size()));
    }
  }
  if (!out) throw parse_error("write failed for '" + path + "'");
}

inline GridFile read_grid(const std::string& path) {
  auto in = detail::open_input(path);
  GridFile gf;

  std::string first;
  if (!std::getline(in, first)) throw parse_error("empty file '" + path + "'", 1);
  if (first.rfind("SPGRID", 0) == 0) {
    gf.format = GridFormat::tsv_float;
    std::istringstream hdr(first);
    std::string magic, version;
    long rows = 0, cols = 0;
    hdr >> magic >> version >> rows >> cols;
    if (version != "v1" || rows <= 0 || cols <= 0 || !hdr)
      throw parse_error("malformed SPGRID header", 1);
    Grid g(static_cast<int>(rows), static_cast<int>(cols));
    long line_no = 1;
    int r = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::parse_meta_comment(line, gf.metadata)) continue;
      if (line.empty()) continue;
      if (r >= g.rows) throw parse_error("more data rows than the declared " +
                                         std::to_string(rows), line_no);
      const char* cursor = line.c_str();
      for (int c = 0; c < g.cols; ++c) g.at(r, c) = detail::parse_double_token(cursor, line_no);
      while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
      if (*cursor != '\0')
        throw parse_error("trailing data beyond the declared " + std::to_string(cols) +
                          " columns", line_no);
      ++r;
    }
    if (r != g.rows)
      throw parse_error("expected " + std::to_string(rows) + " data rows, found " +
                        std::to_string(r), line_no);
    gf.grid = std::move(g);
    return gf;
  }

  if (first.size() >= 2 && first[0] == 'P' && first[1] == '5') {
    gf.format = GridFormat::pgm16;
    Metadata header_meta;
    long cols = 0, rows = 0, maxval = 0;
    {
      // Header tokens may continue on the magic line; feed the remainder of
      // that line back in front of the stream.
      std::stringstream combined;
      combined << first.substr(2) << "\n" << in.rdbuf();
      cols = detail::parse_pnm_int(combined, &header_meta, "width");
      rows = detail::parse_pnm_int(combined, &header_meta, "height");
      maxval = detail::parse_pnm_int(combined, &header_meta, "maxval");
      if (maxval != 65535) throw parse_error("pgm16 requires maxval 65535");
      double offset = 0.0, scale = 1.0;
      for (const auto& [key, value] : header_meta) {
        if (key == "offset")
          offset = std::strtod(value.c_str(), nullptr);
        else if (key == "scale")
          scale = std::strtod(value.c_str(), nullptr);
        else
          gf.metadata.emplace_back(key, value);
      }
      if (!std::isfinite(offset) || !std::isfinite(scale))
        throw parse_error("non-finite offset/scale in pgm16 header");
      Grid g(static_cast<int>(rows), static_cast<int>(cols));
      std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols * 2);
      combined.read(reinterpret_cast<char*>(raw.data()), static_cast<long>(raw.size()));
      if (combined.gcount() != static_cast<long>(raw.size()))
        throw parse_error("truncated pgm16 pixel data");
      for (std::size_t i = 0; i < g.values.size(); ++i) {
        const unsigned u = (static_cast<unsigned>(raw[i * 2]) << 8) | raw[i * 2 + 1];
        g.values[i] = offset + scale * static_cast<double>(u);
      }
      gf.grid = std::move(g);
    }
    return gf;
  }

  throw parse_error("unrecognized grid format (expected SPGRID or P5 magic)", 1);
}

// --- masks ------------------------------------------------------------------
//
// Standard P4 portable bitmap, MSB-first rows padded to whole bytes. A file
// bit of 0 marks an outlier, 1 a valid pixel (valid pixels render black).

inline void write_mask(const BitMask& mk, const std::string& path) {
  auto out = detail::open_output(path);
  out << "P4\n" << mk.cols << " " << mk.rows << "\n";
  const int stride = (mk.cols + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  for (int r = 0; r < mk.rows; ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (int c = 0; c < mk.cols; ++c)
      if (mk.valid(r, c)) row[static_cast<std::size_t>(c / 8)] |= 1u << (7 - (c & 7));
    out.write(reinterpret_cast<const char*>(row.data()), stride);
  }
  if (!out) throw parse_error("write failed for '" + path + "'");
}

inline BitMask read_mask(const std::string& path) {
  auto in = detail::open_input(path);
  Metadata ignored;
  const std::string magic = detail::pnm_token(in, &ignored);
  if (magic != "P4") throw parse_error("not a P4 bitmap: '" + path + "'", 1);
  const long cols = detail::parse_pnm_int(in, &ignored, "width");
  const long rows = detail::parse_pnm_int(in, &ignored, "height");
  BitMask mk(static_cast<int>(rows), static_cast<int>(cols), 0);
  const long stride = (cols + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  for (long r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), stride);
    if (in.gcount() != stride) throw parse_error("truncated P4 pixel data");
    for (long c = 0; c < cols; ++c)
      mk.set(static_cast<int>(r), static_cast<int>(c),
             (row[static_cast<std::size_t>(c / 8)] >> (7 - (c & 7))) & 1u);
  }
  return mk;
}

// --- dictionaries -----------------------------------------------------------
//
// "SPDICT v1" / "m k" / k lines of m full-precision decimals, one atom per
// line. Round-trips bit-exactly.

inline void write_dictionary(const Dictionary& d, const std::string& path) {
  require_shape(d);
  auto out = detail::open_output(path);
  out << "SPDICT v1\n" << d.patch_dim << " " << d.atom_count << "\n";
  for (int j = 0; j < d.atom_count; ++j) {
    for (int i = 0; i < d.patch_dim; ++i) {
      if (i) out << ' ';
      out << detail::format_double(d.atoms(i, j));
    }
    out << '\n';
  }
  if (!out) throw parse_error("write failed for '" + path + "'");
}

inline Dictionary read_dictionary(const std::string& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("SPDICT v1", 0) != 0)
    throw parse_error("missing SPDICT v1 magic in '" + path + "'", 1);
  if (!std::getline(in, line)) throw parse_error("missing dimension line", 2);
  long m = 0, k = 0;
  {
    std::istringstream dims(line);
    dims >> m >> k;
    if (!dims || m <= 0 || k <= 0) throw parse_error("bad dimension line '" + line + "'", 2);
  }
  Dictionary d;
  d.patch_dim = static_cast<int>(m);
  d.atom_count = static_cast<int>(k);
  d.atoms.resize(m, k);
  for (long j = 0; j < k; ++j) {
    if (!std::getline(in, line))
      throw parse_error("expected " + std::to_string(k) + " atom lines, found " +
                        std::to_string(j), 2 + j);
    const char* cursor = line.c_str();
    for (long i = 0; i < m; ++i)
      d.atoms(i, j) = detail::parse_double_token(cursor, 3 + j);
    while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
    if (*cursor != '\0') throw parse_error("trailing data on atom line", 3 + j);
  }
  return d;
}

}  // namespace spr
