#include "lupts/standardizer.hpp"

#include <algorithm>
#include <cmath>

#include "lupts/errors.hpp"

namespace lupts {

namespace {

void column_stats(const Matrix& a, Vector& mean, Vector& scale, std::vector<bool>& constant) {
  if (a.rows() < 1) throw InvalidInput("standardizer: no rows to fit");
  mean = a.colwise().mean().transpose();
  scale.resize(a.cols());
  constant.assign(a.cols(), false);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double sd = std::sqrt((a.col(j).array() - mean(j)).square().mean());
    // relative threshold so that a constant column with rounding noise still counts
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean(j))))) {
      scale(j) = 1.0;
      constant[j] = true;
    } else {
      scale(j) = sd;
    }
  }
}

Matrix forward(const Matrix& a, const Vector& mean, const Vector& scale) {
  if (a.cols() != mean.size()) throw ShapeError("standardizer: column count differs from the fitted data");
  return (a.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix backward(const Matrix& a, const Vector& mean, const Vector& scale) {
  if (a.cols() != mean.size()) throw ShapeError("standardizer: column count differs from the fitted data");
  Matrix out = a.array().rowwise() * scale.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

}  // namespace

Standardizer Standardizer::fit(const TimeSeriesDataset& train) {
  train.validate();
  Standardizer s;
  const int T = train.horizon();
  s.x_mean.resize(T);
  s.x_scale.resize(T);
  s.x_constant.resize(T);
  for (int t = 0; t < T; ++t) column_stats(train.x[t], s.x_mean[t], s.x_scale[t], s.x_constant[t]);
  column_stats(train.y, s.y_mean, s.y_scale, s.y_constant);
  return s;
}

Matrix Standardizer::apply_x(int step, const Matrix& x) const {
  if (step < 0 || step >= static_cast<int>(x_mean.size())) throw ShapeError("standardizer: time step out of range");
  return forward(x, x_mean[step], x_scale[step]);
}

Matrix Standardizer::apply_y(const Matrix& y) const { return forward(y, y_mean, y_scale); }

Matrix Standardizer::invert_y(const Matrix& y) const { return backward(y, y_mean, y_scale); }

TimeSeriesDataset Standardizer::apply(const TimeSeriesDataset& data) const {
  if (data.horizon() != static_cast<int>(x_mean.size())) throw ShapeError("standardizer: horizon differs");
  TimeSeriesDataset out;
  for (int t = 0; t < data.horizon(); ++t) out.x.push_back(apply_x(t, data.x[t]));
  out.y = apply_y(data.y);
  out.latents = data.latents;
  return out;
}

TimeSeriesDataset Standardizer::invert(const TimeSeriesDataset& data) const {
  if (data.horizon() != static_cast<int>(x_mean.size())) throw ShapeError("standardizer: horizon differs");
  TimeSeriesDataset out;
  for (int t = 0; t < data.horizon(); ++t) out.x.push_back(backward(data.x[t], x_mean[t], x_scale[t]));
  out.y = invert_y(data.y);
  out.latents = data.latents;
  return out;
}

}  // namespace lupts
