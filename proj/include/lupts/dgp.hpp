#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lupts/linalg.hpp"

namespace lupts {

// Latent linear-Gaussian system
//   z_{t+1} = A_t^T z_t + e_t,  y = beta^T z_T + e_y,  t = 1..T-1.
struct LatentSystem {
  int d = 1;
  int q = 1;
  int horizon = 1;                  // T, number of observed time points
  std::vector<Matrix> transitions;  // T-1 matrices, d x d; transitions[0] is A_1
  Matrix outcome_map;               // beta, d x q
  double transition_noise_std = 1.0;
  double outcome_noise_std = 1.0;
  double init_std = 2.2360679774997898;  // sqrt(5): N(0, 5) read as variance 5
  double spectral_radius = 1.3;

  // A_1 ... A_{T-1} beta (d x q): the coefficient of E[Y | z_1].
  Matrix rollout() const;
};

// Observations x_t for t = 1..T stored as T blocks of m x k; row i of every
// block belongs to the same series.
struct TimeSeriesDataset {
  std::vector<Matrix> x;
  Matrix y;
  std::optional<std::vector<Matrix>> latents;  // T blocks of m x d

  int size() const { return static_cast<int>(y.rows()); }
  int horizon() const { return static_cast<int>(x.size()); }
  int width() const { return x.empty() ? 0 : static_cast<int>(x.front().cols()); }
  int outcomes() const { return static_cast<int>(y.cols()); }

  // Rows selected by index, in the given order.
  TimeSeriesDataset subset(std::span<const int> rows) const;
  // Throws ShapeError/InvalidInput if blocks disagree or hold non-finite data.
  void validate() const;
};

enum class Observation { identity, square_sign };

// Diagonal 1, off-diagonal N(0, 0.2), rescaled to the target spectral radius;
// beta entries N(0, 0.2). Variances, not standard deviations.
LatentSystem sample_system(int d, int q, int horizon, double spectral_radius, std::uint64_t seed);

// Latent states observed directly (x = z); latents are stored.
TimeSeriesDataset simulate(const LatentSystem& sys, int m, std::uint64_t seed);

// [z1^2, sgn z1, ..., zd^2, sgn zd] with sgn(0) = 0.
Vector square_sign(const Vector& z);
Vector square_sign_inverse(const Vector& x);
Matrix square_sign_rows(const Matrix& z);

TimeSeriesDataset generate_square_sign_dataset(const LatentSystem& sys, int m, std::uint64_t seed);

TimeSeriesDataset generate(const LatentSystem& sys, Observation obs, int m, std::uint64_t seed);

// Flat CSV: one row per series, columns t{tau}_f{j} (tau 1-based, j 0-based)
// followed by y{l}. Latents are not serialized.
void write_dataset_csv(std::ostream& out, const TimeSeriesDataset& data);
TimeSeriesDataset read_dataset_csv(std::istream& in);

}  // namespace lupts
