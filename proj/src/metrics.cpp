#include "lupts/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lupts/errors.hpp"

namespace lupts {

double r2(const Matrix& y_true, const Matrix& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) throw ShapeError("r2: shape mismatch");
  if (y_true.rows() < 2) throw ShapeError("r2: need at least two rows");
  double acc = 0.0;
  for (Eigen::Index c = 0; c < y_true.cols(); ++c) {
    const double mean = y_true.col(c).mean();
    const double ss_tot = (y_true.col(c).array() - mean).square().sum();
    if (!(ss_tot > 0.0)) throw DegenerateTarget("r2: target column has zero variance");
    const double ss_res = (y_true.col(c) - y_pred.col(c)).squaredNorm();
    acc += 1.0 - ss_res / ss_tot;
  }
  return acc / static_cast<double>(y_true.cols());
}

double BiasVarianceReport::variance_standard_error() const {
  if (n_repetitions < 2) return 0.0;
  return mean_variance() * std::sqrt(2.0 / static_cast<double>(n_repetitions - 1));
}

BiasVarianceReport bias_variance(std::span<const Matrix> predictions, const Matrix& truth) {
  if (predictions.size() < 2) throw InvalidInput("bias_variance: need at least two repetitions");
  const Eigen::Index n = truth.rows();
  const Eigen::Index q = truth.cols();
  for (const auto& p : predictions)
    if (p.rows() != n || p.cols() != q) throw ShapeError("bias_variance: prediction shape mismatch");
  const double r = static_cast<double>(predictions.size());

  Matrix mean = Matrix::Zero(n, q);
  for (const auto& p : predictions) mean += p;
  mean /= r;
  Matrix var = Matrix::Zero(n, q);
  for (const auto& p : predictions) var += (p - mean).cwiseAbs2();
  var /= (r - 1.0);

  BiasVarianceReport rep;
  rep.squared_bias = (mean - truth).cwiseAbs2().colwise().mean().transpose();
  rep.variance = var.colwise().mean().transpose();
  rep.n_repetitions = static_cast<int>(predictions.size());
  rep.n_test_points = static_cast<int>(n);
  return rep;
}

Matrix true_conditional_mean(const LatentSystem& sys, const Matrix& z1) {
  if (z1.cols() != sys.d) throw ShapeError("true_conditional_mean: latent width mismatch");
  return z1 * sys.rollout();
}

Matrix true_conditional_mean(const LatentSystem& sys, const TimeSeriesDataset& data) {
  if (!data.latents) throw Unsupported("true_conditional_mean: dataset carries no latent states");
  return true_conditional_mean(sys, data.latents->front());
}

SvccaResult svcca(const Matrix& learned, const Matrix& truth, double variance_retained) {
  if (learned.rows() != truth.rows()) throw ShapeError("svcca: row mismatch");
  const PcaResult a = pca(learned, variance_retained);
  const PcaResult b = pca(truth, variance_retained);
  SvccaResult out;
  out.learned_components = static_cast<int>(a.projected.cols());
  out.true_components = static_cast<int>(b.projected.cols());
  const Eigen::Index need = std::max(a.projected.cols(), b.projected.cols()) + 1;
  if (learned.rows() < learned.cols() + truth.cols() + 1) out.underdetermined = true;
  if (a.degenerate || b.degenerate || learned.rows() < need) {
    out.underdetermined = true;
    out.correlations = Vector::Zero(std::min(a.projected.cols(), b.projected.cols()));
    return out;
  }
  out.correlations = cca(a.projected, b.projected);
  out.mean = out.correlations.size() ? out.correlations.mean() : 0.0;
  return out;
}

Matrix svcca_alignment(const Matrix& learned, const Matrix& truth, double variance_retained) {
  if (learned.rows() != truth.rows()) throw ShapeError("svcca_alignment: row mismatch");
  const PcaResult a = pca(learned, variance_retained);
  Matrix design(learned.rows(), a.projected.cols() + 1);
  design << a.projected, Matrix::Ones(learned.rows(), 1);
  return design * lstsq(design, truth);
}

double sign_test_pvalue(int wins, int n) {
  if (n <= 0) return 1.0;
  // Sum of binomial probabilities in log space.
  double p = 0.0;
  for (int k = std::max(wins, 0); k <= n; ++k) {
    const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    p += std::exp(logc - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace lupts
