#pragma once

#include <stdexcept>
#include <string>

namespace spr {

// Shape or argument violations detected before any computation starts.
class invalid_argument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A least-squares fit whose normal equations are rank deficient
// (e.g. all valid pixels lie on one line).
class degenerate_fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scan line with no valid pixels; carries the offending line index.
class degenerate_line_error : public std::runtime_error {
 public:
  degenerate_line_error(const std::string& msg, int line)
      : std::runtime_error(msg), line_index(line) {}
  int line_index;
};

// Too little data to estimate anything (valid pairs, clean patches, ...).
class insufficient_data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; line_number is 1-based, 0 when unknown.
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& msg, long line = 0)
      : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")"
                                    : msg),
        line_number(line) {}
  long line_number;
};

}  // namespace spr
