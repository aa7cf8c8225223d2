#pragma once

#include <vector>

#include "lupts/dgp.hpp"

namespace lupts {

// Per-column affine scaling of every (time step, feature) column and every
// outcome column, fit on training data only. Population standard deviation.
// Constant columns are centered, left unscaled and flagged.
struct Standardizer {
  std::vector<Vector> x_mean;  // one per time step
  std::vector<Vector> x_scale;
  Vector y_mean;
  Vector y_scale;
  std::vector<std::vector<bool>> x_constant;
  std::vector<bool> y_constant;

  static Standardizer fit(const TimeSeriesDataset& train);

  TimeSeriesDataset apply(const TimeSeriesDataset& data) const;
  TimeSeriesDataset invert(const TimeSeriesDataset& data) const;

  Matrix apply_x(int step, const Matrix& x) const;
  Matrix apply_y(const Matrix& y) const;
  Matrix invert_y(const Matrix& y) const;
};

}  // namespace lupts
