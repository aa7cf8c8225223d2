#include "lupts/features.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lupts/errors.hpp"
#include "lupts/rng.hpp"

namespace lupts {

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::identity: return "identity";
    case MapKind::square_sign_inverse: return "square_sign_inverse";
    case MapKind::rff: return "rff";
    case MapKind::rrf: return "rrf";
    case MapKind::linear_transform: return "linear_transform";
  }
  return "unknown";
}

MapKind map_kind_from_string(const std::string& name) {
  if (name == "identity" || name == "linear") return MapKind::identity;
  if (name == "square_sign_inverse") return MapKind::square_sign_inverse;
  if (name == "rff") return MapKind::rff;
  if (name == "rrf") return MapKind::rrf;
  if (name == "linear_transform") return MapKind::linear_transform;
  throw InvalidConfig("unknown feature map kind '" + name + "'");
}

FeatureMap FeatureMap::identity(int k) {
  if (k < 1) throw InvalidInput("identity map: k must be >= 1");
  FeatureMap m;
  m.kind_ = MapKind::identity;
  m.input_dim_ = m.output_dim_ = k;
  return m;
}

FeatureMap FeatureMap::square_sign_inverse(int d) {
  if (d < 1) throw InvalidInput("square_sign_inverse map: d must be >= 1");
  FeatureMap m;
  m.kind_ = MapKind::square_sign_inverse;
  m.input_dim_ = 2 * d;
  m.output_dim_ = d;
  return m;
}

FeatureMap FeatureMap::rff_from_parts(Matrix projection, Vector offsets, double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("rff: gamma must be positive");
  if (projection.cols() < 1 || offsets.size() != projection.cols())
    throw ShapeError("rff: projection/offset mismatch");
  FeatureMap m;
  m.kind_ = MapKind::rff;
  m.input_dim_ = static_cast<int>(projection.rows());
  m.output_dim_ = static_cast<int>(projection.cols());
  m.bandwidth_ = gamma;
  m.projection_ = std::move(projection);
  m.offsets_ = std::move(offsets);
  return m;
}

FeatureMap FeatureMap::rrf_from_parts(Matrix projection, double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("rrf: gamma must be positive");
  if (projection.rows() < 2 || projection.cols() < 1) throw ShapeError("rrf: projection needs k+1 rows");
  FeatureMap m;
  m.kind_ = MapKind::rrf;
  m.input_dim_ = static_cast<int>(projection.rows()) - 1;
  m.output_dim_ = static_cast<int>(projection.cols());
  m.bandwidth_ = gamma;
  m.projection_ = std::move(projection);
  return m;
}

FeatureMap FeatureMap::rff(int k, int width, double gamma, std::uint64_t seed) {
  if (width < 1 || k < 1) throw InvalidInput("rff: k and width must be >= 1");
  if (!(gamma > 0.0)) throw InvalidInput("rff: gamma must be positive");
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  Matrix w(k, width);
  for (int j = 0; j < width; ++j)
    for (int i = 0; i < k; ++i) w(i, j) = n(rng);
  Vector b(width);
  for (int j = 0; j < width; ++j) b(j) = u(rng);
  return rff_from_parts(std::move(w), std::move(b), gamma);
}

FeatureMap FeatureMap::rrf(int k, int width, double gamma, std::uint64_t seed) {
  if (width < 1 || k < 1) throw InvalidInput("rrf: k and width must be >= 1");
  if (!(gamma > 0.0)) throw InvalidInput("rrf: gamma must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix w(k + 1, width);
  for (int j = 0; j < width; ++j)
    for (int i = 0; i <= k; ++i) w(i, j) = u(rng);
  return rrf_from_parts(std::move(w), gamma);
}

FeatureMap FeatureMap::linear_transform(const FeatureMap& base, Matrix b) {
  if (b.cols() != base.output_dim())
    throw ShapeError("linear_transform: B has " + std::to_string(b.cols()) + " columns, base outputs " +
                     std::to_string(base.output_dim()));
  require_finite(b, "linear_transform");
  if (numerical_rank(b) < b.cols()) throw InvalidInput("linear_transform: B columns are linearly dependent");
  FeatureMap m;
  m.kind_ = MapKind::linear_transform;
  m.input_dim_ = base.input_dim();
  m.output_dim_ = static_cast<int>(b.rows());
  m.projection_ = std::move(b);
  m.base_ = std::make_shared<const FeatureMap>(base);
  return m;
}

FeatureMap FeatureMap::linear(Matrix b) {
  const int k = static_cast<int>(b.cols());
  return linear_transform(identity(k), std::move(b));
}

Vector FeatureMap::apply(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != input_dim_)
    throw ShapeError("feature map: input length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim_));
  switch (kind_) {
    case MapKind::identity:
      return x;
    case MapKind::square_sign_inverse: {
      Vector z(output_dim_);
      for (int j = 0; j < output_dim_; ++j) z(j) = x(2 * j + 1) * std::sqrt(std::max(0.0, x(2 * j)));
      return z;
    }
    case MapKind::rff: {
      const double scale = std::sqrt(2.0 / output_dim_);
      const Vector pre = std::sqrt(2.0 * bandwidth_) * (projection_.transpose() * x) + offsets_;
      return scale * pre.array().cos().matrix();
    }
    case MapKind::rrf: {
      const Vector pre = bandwidth_ * (projection_.topRows(input_dim_).transpose() * x +
                                       projection_.row(input_dim_).transpose());
      return pre.cwiseMax(0.0);
    }
    case MapKind::linear_transform:
      return projection_ * base_->apply(x);
  }
  return x;
}

namespace {

void check_width(const FeatureMap& map, const Matrix& x) {
  if (x.cols() != map.input_dim())
    throw ShapeError("apply_map: block width " + std::to_string(x.cols()) + ", map expects " +
                     std::to_string(map.input_dim()));
}

}  // namespace

Matrix apply_map(const FeatureMap& map, const Matrix& x) {
  check_width(map, x);
  Matrix out(x.rows(), map.output_dim());
  const Eigen::Index n = x.rows();
#pragma omp parallel for schedule(static) if (n * map.output_dim() > 20000)
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = map.apply(x.row(i).transpose()).transpose();
  return out;
}

Matrix apply_map_serial(const FeatureMap& map, const Matrix& x) {
  check_width(map, x);
  Matrix out(x.rows(), map.output_dim());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = map.apply(x.row(i).transpose()).transpose();
  return out;
}

std::vector<FeatureMap> per_step_maps(MapKind kind, int k, const std::vector<int>& widths, double gamma,
                                      std::uint64_t seed) {
  std::vector<FeatureMap> maps;
  maps.reserve(widths.size());
  for (std::size_t t = 0; t < widths.size(); ++t) {
    const auto s = derive_seed(seed, t);
    if (kind == MapKind::rff)
      maps.push_back(FeatureMap::rff(k, widths[t], gamma, s));
    else if (kind == MapKind::rrf)
      maps.push_back(FeatureMap::rrf(k, widths[t], gamma, s));
    else
      throw InvalidInput("per_step_maps: only random feature kinds are per-step");
  }
  return maps;
}

}  // namespace lupts
