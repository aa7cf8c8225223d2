#pragma once

#include <cstdint>
#include <vector>

#include "lupts/dgp.hpp"
#include "lupts/features.hpp"
#include "lupts/kernels.hpp"

namespace lupts {

// h(x) = weights^T map(x).
struct LinearPredictor {
  FeatureMap map;
  Matrix weights;  // D x q

  // Retained stepwise fits: A_1..A_{T-1} (D_t x D_{t+1}) and beta (D_T x q).
  std::vector<Matrix> transitions;
  Matrix outcome_head;
  // Largest singular value of each A_t; filled by the norm-constrained fit.
  std::vector<double> transition_spectral_norms;

  Matrix predict(const Matrix& x1) const;
};

// h(x) = sum_i dual_i k(support_i, x).
struct KernelPredictor {
  Kernel kernel;
  Matrix support;  // training X_1, m x k
  Matrix dual;     // m x q

  Matrix predict(const Matrix& x) const;
};

// OLS on the first time step only: pinv(Z1^T Z1) Z1^T Y.
LinearPredictor fit_classical(const TimeSeriesDataset& data, const FeatureMap& map);

// Generalized LuPTS with one shared map: theta = A_1 ... A_{T-1} beta with
// A_t = pinv(Z_t^T Z_t) Z_t^T Z_{t+1}, beta = pinv(Z_T^T Z_T) Z_T^T Y.
LinearPredictor fit_lupts(const TimeSeriesDataset& data, const FeatureMap& map);

// Same chain with a separate map per time step (maps.size() == T); transitions
// become rectangular when widths differ. Predictions use maps[0].
LinearPredictor fit_lupts(const TimeSeriesDataset& data, const std::vector<FeatureMap>& maps);

// Chain of norm-constrained fits: beta columns and every per-target
// coefficient vector of A_t satisfy ||.|| <= radius.
LinearPredictor fit_constrained_lupts(const TimeSeriesDataset& data, const std::vector<FeatureMap>& maps,
                                      double radius);

// Per-step random ReLU maps of the given widths (one fresh map per step,
// seeds derived from `seed`), fitted with fit_constrained_lupts.
LinearPredictor fit_consistent_rrf_lupts(const TimeSeriesDataset& data, const std::vector<int>& widths,
                                         double gamma, double radius, std::uint64_t seed);

// Kernel OLS on X_1: dual = pinv(K_1) Y.
KernelPredictor fit_kernel_classical(const TimeSeriesDataset& data, const Kernel& kernel);

// dual = pinv(K_1) [prod_{t=2..T} K_t pinv(K_t)] Y.
KernelPredictor fit_kernel_lupts(const TimeSeriesDataset& data, const Kernel& kernel);

Matrix predict(const LinearPredictor& model, const Matrix& x);
Matrix predict(const KernelPredictor& model, const Matrix& x);

}  // namespace lupts
