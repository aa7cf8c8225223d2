#pragma once

#include <Eigen/Dense>
#include <optional>

namespace lupts {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thin SVD: a = u * diag(s) * vt, s nonincreasing.
struct SvdFactors {
  Matrix u;
  Vector s;
  Matrix vt;
};

// Throws InvalidInput when any entry is NaN or infinite.
void require_finite(const Matrix& a, const char* what);

SvdFactors svd(const Matrix& a);

// max(rows, cols) * machine epsilon.
double default_rcond(Eigen::Index rows, Eigen::Index cols);

// Moore-Penrose pseudo-inverse. Singular values at or below rcond * s_max are
// treated as zero.
Matrix pinv(const Matrix& a, std::optional<double> rcond = std::nullopt);

// Minimum-norm least-squares solution pinv(a^T a) a^T b, evaluated as
// pinv(a) b from the SVD of a.
Matrix lstsq(const Matrix& a, const Matrix& b, std::optional<double> rcond = std::nullopt);

// argmin ||a x - b||^2 subject to ||x|| <= radius. Inactive constraint returns
// the minimum-norm solution; otherwise the ridge path is bisected for the
// multiplier that puts the solution on the sphere.
Vector norm_constrained_lstsq(const Matrix& a, const Vector& b, double radius);

// Same, with the multiplier that was used (0 when the constraint is inactive).
struct ConstrainedSolution {
  Vector x;
  double multiplier = 0.0;
};
ConstrainedSolution norm_constrained_lstsq_detail(const Matrix& a, const Vector& b, double radius);

struct PcaResult {
  Matrix components;          // cols x k principal directions
  Matrix projected;           // rows x k scores of the centered data
  Vector mean;                // column means used for centering
  Vector explained_variance;  // per retained component
  double retained_fraction = 0.0;
  bool degenerate = false;    // input had zero total variance
};

// Keeps the smallest number of leading components whose cumulative variance
// fraction reaches variance_retained.
PcaResult pca(const Matrix& x, double variance_retained);

// Canonical correlations between the column spaces of x and y, sorted
// nonincreasing and clipped to [0, 1]. Length min(x.cols, y.cols).
Vector cca(const Matrix& x, const Matrix& y);

// max |eigenvalue| (complex modulus).
double spectral_radius(const Matrix& a);

// Numerical rank under the pinv cutoff.
Eigen::Index numerical_rank(const Matrix& a, std::optional<double> rcond = std::nullopt);

// s_max / s_min, infinity for singular input.
double condition_number(const Matrix& a);

}  // namespace lupts
