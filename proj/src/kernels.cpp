#include "lupts/kernels.hpp"

#include <cmath>

#include "lupts/errors.hpp"

namespace lupts {

Kernel Kernel::gaussian(double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("gaussian kernel: gamma must be positive");
  Kernel k;
  k.kind = Kind::gaussian;
  k.gamma = gamma;
  return k;
}

Kernel Kernel::from_map(const FeatureMap& map) {
  Kernel k;
  k.kind = Kind::feature_map;
  k.map = std::make_shared<const FeatureMap>(map);
  return k;
}

Kernel Kernel::custom(std::function<double(const Vector&, const Vector&)> fn) {
  Kernel k;
  k.kind = Kind::custom;
  k.fn = std::move(fn);
  return k;
}

double Kernel::operator()(const Vector& a, const Vector& b) const {
  switch (kind) {
    case Kind::linear:
      return a.dot(b);
    case Kind::gaussian:
      return std::exp(-gamma * (a - b).squaredNorm());
    case Kind::feature_map:
      return map->apply(a).dot(map->apply(b));
    case Kind::custom:
      return fn(a, b);
  }
  return 0.0;
}

std::string Kernel::name() const {
  switch (kind) {
    case Kind::linear: return "linear";
    case Kind::gaussian: return "gaussian";
    case Kind::feature_map: return "feature_map";
    case Kind::custom: return "custom";
  }
  return "unknown";
}

namespace {

void check(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("gram: inputs differ in width");
}

}  // namespace

Matrix gram(const Kernel& kernel, const Matrix& a, const Matrix& b) {
  check(a, b);
  Matrix g(a.rows(), b.rows());
  const Eigen::Index n = a.rows();
  // Custom kernels may not be reentrant.
  const bool parallel = kernel.kind != Kernel::Kind::custom && n * b.rows() > 4096;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector ai = a.row(i).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) g(i, j) = kernel(ai, b.row(j).transpose());
  }
  return g;
}

Matrix gram_serial(const Kernel& kernel, const Matrix& a, const Matrix& b) {
  check(a, b);
  Matrix g(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector ai = a.row(i).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) g(i, j) = kernel(ai, b.row(j).transpose());
  }
  return g;
}

}  // namespace lupts
