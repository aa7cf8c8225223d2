#include "lupts/sequences.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "lupts/errors.hpp"

namespace lupts {

void SequenceSpec::validate() const {
  if (length < 2) throw InvalidConfig("sequences: length must be >= 2 (at least one input step plus the outcome)");
  if (!(step > 0.0)) throw InvalidConfig("sequences: step must be positive");
  if (!(min_gap >= 0.0)) throw InvalidConfig("sequences: min_gap must be >= 0");
  if (outcome_column.empty()) throw InvalidConfig("sequences: outcome column not set");
  if (timestamp_column.empty()) throw InvalidConfig("sequences: timestamp column not set");
}

double parse_timestamp(const std::string& cell) {
  if (cell.empty()) throw InvalidInput("timestamp: empty cell");
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec == std::errc() && res.ptr == cell.data() + cell.size()) {
    if (!std::isfinite(v)) throw InvalidInput("timestamp: not finite '" + cell + "'");
    return v;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double s = 0.0;
  char sep = 0;
  const int n = std::sscanf(cell.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &s);
  if (n != 3 && n < 6) throw InvalidInput("timestamp: cannot parse '" + cell + "'");
  if (n > 3 && sep != 'T' && sep != ' ') throw InvalidInput("timestamp: cannot parse '" + cell + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw InvalidInput("timestamp: invalid date '" + cell + "'");
  const double days = static_cast<double>(sys_days{ymd}.time_since_epoch().count());
  return days * 86400.0 + h * 3600.0 + mi * 60.0 + s;
}

namespace {

int column_index(const RawCsvTable& table, const std::string& name) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw InvalidConfig("sequences: no column named '" + name + "'");
  return static_cast<int>(it - table.header.begin());
}

}  // namespace

AssembledSequences assemble_sequences(const RawCsvTable& table, const SequenceSpec& spec) {
  spec.validate();
  const int ts_col = column_index(table, spec.timestamp_column);
  const int y_col = column_index(table, spec.outcome_column);
  std::vector<int> feat_cols;
  AssembledSequences out;
  if (spec.feature_columns.empty()) {
    for (int j = 0; j < static_cast<int>(table.header.size()); ++j)
      if (j != ts_col) feat_cols.push_back(j);
  } else {
    for (const auto& name : spec.feature_columns) feat_cols.push_back(column_index(table, name));
  }
  if (feat_cols.empty()) throw InvalidConfig("sequences: no feature columns");
  for (int j : feat_cols) out.feature_names.push_back(table.header[j]);

  const int n = static_cast<int>(table.rows.size());
  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) {
    times[i] = parse_timestamp(table.rows[i][ts_col]);
    if (i > 0 && !(times[i] > times[i - 1])) throw InvalidInput("sequences: timestamps must be strictly increasing");
  }

  // Parse every needed cell once; missing cells become NaN.
  const int k = static_cast<int>(feat_cols.size());
  Matrix features(n, k);
  Vector outcome(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) features(i, j) = parse_double_cell(table.rows[i][feat_cols[j]]);
    outcome(i) = parse_double_cell(table.rows[i][y_col]);
  }

  const double tol = 1e-9 * std::max(1.0, spec.step);
  const int L = spec.length;
  std::vector<int> starts;
  bool have_prev = false;
  double prev_end = 0.0;
  int i = 0;
  while (i + L <= n) {
    if (have_prev && times[i] - prev_end < spec.min_gap - tol) {
      ++i;
      continue;
    }
    bool ok = true;
    for (int j = 0; j < L && ok; ++j) {
      const int r = i + j;
      if (std::abs(times[r] - (times[i] + j * spec.step)) > tol) ok = false;
      else if (j < L - 1 && !features.row(r).allFinite()) ok = false;
      else if (j == L - 1 && !std::isfinite(outcome(r))) ok = false;
    }
    if (!ok) {
      ++i;
      continue;
    }
    starts.push_back(i);
    have_prev = true;
    prev_end = times[i + L - 1];
    i += L;
  }

  const int m = static_cast<int>(starts.size());
  const int T = L - 1;
  out.data.x.assign(T, Matrix(m, k));
  out.data.y.resize(m, 1);
  for (int s = 0; s < m; ++s) {
    for (int t = 0; t < T; ++t) out.data.x[t].row(s) = features.row(starts[s] + t);
    out.data.y(s, 0) = outcome(starts[s] + L - 1);
    out.start_times.push_back(times[starts[s]]);
  }
  out.empty = m == 0;
  return out;
}

}  // namespace lupts
