#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace tops::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// RFC-4180-style reader: comma separated, double-quoted fields may contain
/// commas and doubled quotes. Blank lines are skipped. Throws ParseError on
/// ragged rows or unterminated quotes.
Table read(std::istream& in);
Table read_file(const std::string& path);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace tops::csv
