#pragma once

#include <string>
#include <vector>

#include "lupts/csv.hpp"
#include "lupts/dgp.hpp"

namespace lupts {

struct SequenceSpec {
  std::string timestamp_column = "timestamp";
  std::string outcome_column;
  std::vector<std::string> feature_columns;  // empty: every column but the timestamp
  int length = 3;        // rows per sequence; the first length-1 rows are x_1..x_T
  double step = 3600.0;  // seconds between consecutive rows of a sequence
  double min_gap = 0.0;  // seconds from the end of one sequence to the start of the next

  void validate() const;
};

struct AssembledSequences {
  TimeSeriesDataset data;
  std::vector<double> start_times;
  std::vector<std::string> feature_names;
  bool empty = false;  // no complete sequence was found
};

// Seconds since the epoch, or ISO-8601 (YYYY-MM-DD[THH:MM[:SS]][Z]) read as UTC.
double parse_timestamp(const std::string& cell);

// Greedy left-to-right scan over rows sorted by timestamp. A candidate
// starting at row i is kept when rows i..i+length-1 sit exactly at
// start + j*step, carry no missing values, and the start lies at least
// min_gap after the end of the previously kept sequence. The outcome is the
// outcome column of the final row.
AssembledSequences assemble_sequences(const RawCsvTable& table, const SequenceSpec& spec);

}  // namespace lupts
