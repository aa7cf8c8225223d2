#include "lupts/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lupts/errors.hpp"

namespace lupts {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

SvdFactors svd(const Matrix& a) {
  require_finite(a, "svd");
  if (a.size() == 0) throw ShapeError("svd: empty matrix");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
}

double default_rcond(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

namespace {

Vector inverted_spectrum(const Vector& s, double rcond) {
  const double cutoff = s.size() > 0 ? rcond * s(0) : 0.0;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return inv;
}

}  // namespace

Matrix pinv(const Matrix& a, std::optional<double> rcond) {
  const auto f = svd(a);
  const Vector inv = inverted_spectrum(f.s, rcond.value_or(default_rcond(a.rows(), a.cols())));
  return f.vt.transpose() * inv.asDiagonal() * f.u.transpose();
}

Matrix lstsq(const Matrix& a, const Matrix& b, std::optional<double> rcond) {
  if (a.rows() != b.rows())
    throw ShapeError("lstsq: a has " + std::to_string(a.rows()) + " rows, b has " +
                     std::to_string(b.rows()));
  require_finite(b, "lstsq");
  const auto f = svd(a);
  const Vector inv = inverted_spectrum(f.s, rcond.value_or(default_rcond(a.rows(), a.cols())));
  return f.vt.transpose() * (inv.asDiagonal() * (f.u.transpose() * b));
}

ConstrainedSolution norm_constrained_lstsq_detail(const Matrix& a, const Vector& b, double radius) {
  if (!(radius > 0.0))
    throw InvalidInput("norm_constrained_lstsq: radius must be positive");
  if (a.rows() != b.rows()) throw ShapeError("norm_constrained_lstsq: a/b row mismatch");
  require_finite(b, "norm_constrained_lstsq");

  const auto f = svd(a);
  const double cutoff = default_rcond(a.rows(), a.cols()) * (f.s.size() ? f.s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < f.s.size() && f.s(rank) > cutoff) ++rank;
  const Vector s = f.s.head(rank);
  const Vector c = f.u.leftCols(rank).transpose() * b;
  const Matrix v = f.vt.topRows(rank).transpose();

  // x(l) = V diag(s / (s^2 + l)) U^T b; its norm decreases monotonically in l.
  auto coeffs = [&](double l) -> Vector {
    return (s.array() / (s.array().square() + l) * c.array()).matrix();
  };
  auto norm_at = [&](double l) { return coeffs(l).norm(); };

  if (norm_at(0.0) <= radius) return {v * coeffs(0.0), 0.0};

  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (norm_at(hi) >= radius) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 2000) throw InvalidInput("norm_constrained_lstsq: multiplier bracket failed");
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (norm_at(mid) > radius)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  // hi is the feasible end of the bracket.
  return {v * coeffs(hi), hi};
}

Vector norm_constrained_lstsq(const Matrix& a, const Vector& b, double radius) {
  return norm_constrained_lstsq_detail(a, b, radius).x;
}

PcaResult pca(const Matrix& x, double variance_retained) {
  if (x.rows() < 2) throw ShapeError("pca: need at least two rows");
  if (!(variance_retained > 0.0 && variance_retained <= 1.0))
    throw InvalidInput("pca: variance_retained must lie in (0, 1]");
  require_finite(x, "pca");

  PcaResult out;
  out.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.mean.transpose();
  const auto f = svd(centered);
  const Vector var = f.s.array().square() / static_cast<double>(x.rows() - 1);
  const double total = var.sum();
  if (!(total > 0.0)) {
    out.degenerate = true;
    out.components = Matrix::Zero(x.cols(), 1);
    out.projected = Matrix::Zero(x.rows(), 1);
    out.explained_variance = Vector::Zero(1);
    return out;
  }
  // Tolerance keeps exact-rank inputs from requesting a numerically zero tail.
  const double tol = 1e-12;
  Eigen::Index k = 0;
  double acc = 0.0;
  while (k < var.size()) {
    acc += var(k);
    ++k;
    if (acc / total >= variance_retained - tol) break;
  }
  out.retained_fraction = acc / total;
  out.components = f.vt.topRows(k).transpose();
  out.projected = centered * out.components;
  out.explained_variance = var.head(k);
  return out;
}

namespace {

// Orthonormal basis of the centered column space (whitened data).
Matrix whitened_basis(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const auto f = svd(centered);
  const double cutoff = default_rcond(x.rows(), x.cols()) * (f.s.size() ? f.s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < f.s.size() && f.s(rank) > cutoff) ++rank;
  return f.u.leftCols(rank);
}

}  // namespace

Vector cca(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ShapeError("cca: row mismatch");
  if (x.rows() < std::max(x.cols(), y.cols()) + 1) throw ShapeError("cca: too few rows");
  require_finite(x, "cca");
  require_finite(y, "cca");
  const Eigen::Index k = std::min(x.cols(), y.cols());
  Vector rho = Vector::Zero(k);
  const Matrix qx = whitened_basis(x);
  const Matrix qy = whitened_basis(y);
  if (qx.cols() == 0 || qy.cols() == 0) return rho;
  const Matrix m = qx.transpose() * qy;
  Eigen::JacobiSVD<Matrix> dec(m);
  const Vector s = dec.singularValues();
  for (Eigen::Index i = 0; i < std::min(k, s.size()); ++i) rho(i) = std::clamp(s(i), 0.0, 1.0);
  return rho;
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("spectral_radius: matrix not square");
  require_finite(a, "spectral_radius");
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::Index numerical_rank(const Matrix& a, std::optional<double> rcond) {
  const auto f = svd(a);
  const double cutoff = rcond.value_or(default_rcond(a.rows(), a.cols())) * f.s(0);
  Eigen::Index r = 0;
  while (r < f.s.size() && f.s(r) > cutoff) ++r;
  return r;
}

double condition_number(const Matrix& a) {
  const auto f = svd(a);
  const double smin = f.s(f.s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return f.s(0) / smin;
}

}  // namespace lupts
