#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace crpsreg::textio {

/// Shortest form that round-trips, at most 17 significant digits; integral
/// values keep a trailing ".0".
std::string format_real(double v);

/// One non-comment, non-blank line of a comma-delimited file.
struct Row {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

/// Reads comma-delimited rows; lines starting with '#' and blank lines are skipped.
std::vector<Row> read_rows(std::istream& in);
std::vector<Row> read_rows_from_file(const std::string& path);

/// Parses a finite real. Throws crpsreg::Error naming `line` on failure.
double parse_real(std::string_view text, std::size_t line);

std::string read_file(const std::string& path);

}  // namespace crpsreg::textio
