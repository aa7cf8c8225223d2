#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lupts/linalg.hpp"

namespace lupts {

enum class MapKind {
  identity,             // x
  square_sign_inverse,  // exact left inverse of the Square-Sign observation map
  rff,                  // sqrt(2/D) cos(sqrt(2 gamma) W^T x + b)
  rrf,                  // max(0, gamma W^T [x; 1])
  linear_transform,     // B * base(x)
};

std::string to_string(MapKind kind);
MapKind map_kind_from_string(const std::string& name);

// A realized representation. Random parameters are fixed at construction and
// the object is immutable afterwards.
class FeatureMap {
 public:
  // Zero-width placeholder; use the factories below.
  FeatureMap() = default;

  static FeatureMap identity(int k);
  static FeatureMap square_sign_inverse(int d);
  static FeatureMap rff(int k, int width, double gamma, std::uint64_t seed);
  static FeatureMap rrf(int k, int width, double gamma, std::uint64_t seed);
  // Rejects b whose columns are numerically dependent.
  static FeatureMap linear_transform(const FeatureMap& base, Matrix b);
  static FeatureMap linear(Matrix b);

  // Explicit parameters (deserialization, forced degenerate maps in tests).
  static FeatureMap rff_from_parts(Matrix projection, Vector offsets, double gamma);
  static FeatureMap rrf_from_parts(Matrix projection, double gamma);

  MapKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  double bandwidth() const { return bandwidth_; }
  const Matrix& projection() const { return projection_; }
  const Vector& offsets() const { return offsets_; }
  const FeatureMap* base() const { return base_.get(); }

  Vector apply(const Eigen::Ref<const Vector>& x) const;

 private:
  MapKind kind_ = MapKind::identity;
  int input_dim_ = 0;
  int output_dim_ = 0;
  double bandwidth_ = 0.0;
  Matrix projection_;  // rff: k x D, rrf: (k+1) x D, linear_transform: B (D x base_out)
  Vector offsets_;     // rff only
  std::shared_ptr<const FeatureMap> base_;
};

// Row-wise application, parallel over rows. Each row goes through
// FeatureMap::apply, so the result is bit-identical to apply_map_serial.
Matrix apply_map(const FeatureMap& map, const Matrix& x);
Matrix apply_map_serial(const FeatureMap& map, const Matrix& x);

// One map per time step, each with its own derived seed.
std::vector<FeatureMap> per_step_maps(MapKind kind, int k, const std::vector<int>& widths, double gamma,
                                      std::uint64_t seed);

}  // namespace lupts
