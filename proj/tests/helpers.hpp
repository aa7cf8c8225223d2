#pragma once

#include <cmath>
#include <random>

#include "lupts/linalg.hpp"
#include "lupts/rng.hpp"

namespace lupts::testing {

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Matrix a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = n(rng);
  return a;
}

// max |a - b| / max(1, max |b|)
inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace lupts::testing
