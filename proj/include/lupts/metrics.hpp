#pragma once

#include <span>
#include <vector>

#include "lupts/dgp.hpp"
#include "lupts/linalg.hpp"

namespace lupts {

// 1 - SS_res / SS_tot per output column, averaged over columns. Throws
// DegenerateTarget when a column of y_true has zero variance.
double r2(const Matrix& y_true, const Matrix& y_pred);

struct BiasVarianceReport {
  Vector squared_bias;  // per output
  Vector variance;      // per output, unbiased over repetitions
  int n_repetitions = 0;
  int n_test_points = 0;

  double mean_squared_bias() const { return squared_bias.mean(); }
  double mean_variance() const { return variance.mean(); }
  // Gaussian approximation of the standard error of mean_variance().
  double variance_standard_error() const;
};

// predictions[r] is repetition r's prediction on the shared test set (n x q).
BiasVarianceReport bias_variance(std::span<const Matrix> predictions, const Matrix& true_conditional_mean);

template <typename Model>
BiasVarianceReport bias_variance(std::span<const Model> models, const Matrix& test_x,
                                 const Matrix& true_conditional_mean) {
  std::vector<Matrix> preds;
  preds.reserve(models.size());
  for (const auto& m : models) preds.push_back(m.predict(test_x));
  return bias_variance(std::span<const Matrix>(preds), true_conditional_mean);
}

// Noise-free rollout (A_1 ... A_{T-1} beta)^T z_1 for every row of z1.
Matrix true_conditional_mean(const LatentSystem& sys, const Matrix& z1);

// Same, reading z_1 from the dataset; throws Unsupported without latents.
Matrix true_conditional_mean(const LatentSystem& sys, const TimeSeriesDataset& data);

struct SvccaResult {
  double mean = 0.0;
  Vector correlations;
  int learned_components = 0;
  int true_components = 0;
  bool underdetermined = false;  // n < kept dimensions + 1 on either side
};

// PCA on each view at variance_retained, then CCA; mean canonical correlation.
SvccaResult svcca(const Matrix& learned, const Matrix& truth, double variance_retained = 0.99);

// Least-squares map from the retained learned components onto the true
// latents (with intercept), evaluated on the learned rows. Plot data for
// latent-recovery scatter plots.
Matrix svcca_alignment(const Matrix& learned, const Matrix& truth, double variance_retained = 0.99);

// One-sided sign test: P(Bin(n, 1/2) >= wins).
double sign_test_pvalue(int wins, int n);

}  // namespace lupts
