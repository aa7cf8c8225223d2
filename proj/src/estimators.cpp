#include "lupts/estimators.hpp"

#include <algorithm>
#include <string>

#include "lupts/errors.hpp"

namespace lupts {

Matrix LinearPredictor::predict(const Matrix& x1) const {
  if (x1.cols() != map.input_dim())
    throw ShapeError("predict: input width " + std::to_string(x1.cols()) + ", model expects " +
                     std::to_string(map.input_dim()));
  return apply_map(map, x1) * weights;
}

Matrix KernelPredictor::predict(const Matrix& x) const {
  if (x.cols() != support.cols()) throw ShapeError("predict: input width does not match support points");
  return gram(kernel, x, support) * dual;
}

Matrix predict(const LinearPredictor& model, const Matrix& x) { return model.predict(x); }
Matrix predict(const KernelPredictor& model, const Matrix& x) { return model.predict(x); }

namespace {

void check_data(const TimeSeriesDataset& data, int input_dim) {
  data.validate();
  if (data.width() != input_dim)
    throw ShapeError("fit: data width " + std::to_string(data.width()) + ", map expects " +
                     std::to_string(input_dim));
}

Matrix compose(const std::vector<Matrix>& transitions, const Matrix& head) {
  Matrix theta = head;
  for (auto it = transitions.rbegin(); it != transitions.rend(); ++it) theta = (*it) * theta;
  return theta;
}

void check_symmetric(const Matrix& k) {
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidKernel("kernel Gram matrix is not symmetric");
}

}  // namespace

LinearPredictor fit_classical(const TimeSeriesDataset& data, const FeatureMap& map) {
  check_data(data, map.input_dim());
  const Matrix z1 = apply_map(map, data.x[0]);
  LinearPredictor out;
  out.map = map;
  out.outcome_head = lstsq(z1, data.y);
  out.weights = out.outcome_head;
  return out;
}

LinearPredictor fit_lupts(const TimeSeriesDataset& data, const std::vector<FeatureMap>& maps) {
  if (static_cast<int>(maps.size()) != data.horizon())
    throw ShapeError("fit_lupts: need one map per time step");
  for (const auto& m : maps) check_data(data, m.input_dim());
  const int T = data.horizon();
  std::vector<Matrix> z;
  z.reserve(T);
  for (int t = 0; t < T; ++t) z.push_back(apply_map(maps[t], data.x[t]));

  LinearPredictor out;
  out.map = maps[0];
  for (int t = 0; t + 1 < T; ++t) out.transitions.push_back(lstsq(z[t], z[t + 1]));
  out.outcome_head = lstsq(z[T - 1], data.y);
  out.weights = compose(out.transitions, out.outcome_head);
  return out;
}

LinearPredictor fit_lupts(const TimeSeriesDataset& data, const FeatureMap& map) {
  return fit_lupts(data, std::vector<FeatureMap>(static_cast<std::size_t>(data.horizon()), map));
}

LinearPredictor fit_constrained_lupts(const TimeSeriesDataset& data, const std::vector<FeatureMap>& maps,
                                      double radius) {
  if (!(radius > 0.0)) throw InvalidInput("fit_constrained_lupts: radius must be positive");
  if (static_cast<int>(maps.size()) != data.horizon())
    throw ShapeError("fit_constrained_lupts: need one map per time step");
  for (const auto& m : maps) check_data(data, m.input_dim());
  const int T = data.horizon();
  std::vector<Matrix> z;
  for (int t = 0; t < T; ++t) z.push_back(apply_map(maps[t], data.x[t]));

  auto constrained = [&](const Matrix& a, const Matrix& b) {
    Matrix coef(a.cols(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) coef.col(j) = norm_constrained_lstsq(a, b.col(j), radius);
    return coef;
  };

  LinearPredictor out;
  out.map = maps[0];
  out.outcome_head = constrained(z[T - 1], data.y);
  // Backward from T, as in the recursive construction; fits are independent.
  out.transitions.resize(static_cast<std::size_t>(T - 1));
  for (int t = T - 2; t >= 0; --t) out.transitions[t] = constrained(z[t], z[t + 1]);
  for (const auto& a : out.transitions) out.transition_spectral_norms.push_back(svd(a).s(0));
  out.weights = compose(out.transitions, out.outcome_head);
  return out;
}

LinearPredictor fit_consistent_rrf_lupts(const TimeSeriesDataset& data, const std::vector<int>& widths,
                                         double gamma, double radius, std::uint64_t seed) {
  if (static_cast<int>(widths.size()) != data.horizon())
    throw ShapeError("fit_consistent_rrf_lupts: need one width per time step");
  if (!(radius > 0.0)) throw InvalidInput("fit_consistent_rrf_lupts: radius must be positive");
  return fit_constrained_lupts(data, per_step_maps(MapKind::rrf, data.width(), widths, gamma, seed), radius);
}

KernelPredictor fit_kernel_classical(const TimeSeriesDataset& data, const Kernel& kernel) {
  data.validate();
  const Matrix k1 = gram(kernel, data.x[0], data.x[0]);
  check_symmetric(k1);
  return {kernel, data.x[0], lstsq(k1, data.y)};
}

KernelPredictor fit_kernel_lupts(const TimeSeriesDataset& data, const Kernel& kernel) {
  data.validate();
  const int T = data.horizon();
  std::vector<Matrix> grams;
  grams.reserve(T);
  for (int t = 0; t < T; ++t) {
    grams.push_back(gram(kernel, data.x[t], data.x[t]));
    check_symmetric(grams.back());
  }
  // Right to left: v <- K_t pinv(K_t) v for t = T..2, then pinv(K_1) v.
  Matrix v = data.y;
  for (int t = T - 1; t >= 1; --t) v = grams[t] * lstsq(grams[t], v);
  return {kernel, data.x[0], lstsq(grams[0], v)};
}

}  // namespace lupts
