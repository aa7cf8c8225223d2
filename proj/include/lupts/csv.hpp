#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lupts {

// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Numeric CSV with a header row. Empty cells and "nan" read as NaN.
CsvTable read_csv(std::istream& in);

struct RawCsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawCsvTable read_raw_csv(std::istream& in);

double parse_double_cell(const std::string& cell);

}  // namespace lupts
