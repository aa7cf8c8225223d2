#include "lupts/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>

#include "lupts/errors.hpp"

namespace lupts {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

double parse_double_cell(const std::string& cell) {
  if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA")
    return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw InvalidInput("csv: cannot parse number '" + cell + "'");
  return v;
}

RawCsvTable read_raw_csv(std::istream& in) {
  RawCsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line);
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size())
      throw ShapeError("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw ShapeError("csv: missing header row");
  return table;
}

CsvTable read_csv(std::istream& in) {
  RawCsvTable raw = read_raw_csv(in);
  CsvTable out;
  out.header = std::move(raw.header);
  out.rows.reserve(raw.rows.size());
  for (const auto& r : raw.rows) {
    std::vector<double> row;
    row.reserve(r.size());
    for (const auto& c : r) row.push_back(parse_double_cell(c));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace lupts
