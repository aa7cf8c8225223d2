#pragma once

#include <functional>
#include <memory>
#include <string>

#include "lupts/features.hpp"
#include "lupts/linalg.hpp"

namespace lupts {

// Pairwise similarity k(a, b).
struct Kernel {
  enum class Kind { linear, gaussian, feature_map, custom };

  Kind kind = Kind::linear;
  double gamma = 1.0;                       // gaussian: exp(-gamma ||a - b||^2)
  std::shared_ptr<const FeatureMap> map;    // feature_map: <phi(a), phi(b)>
  std::function<double(const Vector&, const Vector&)> fn;  // custom

  static Kernel linear() { return {}; }
  static Kernel gaussian(double gamma);
  static Kernel from_map(const FeatureMap& map);
  static Kernel custom(std::function<double(const Vector&, const Vector&)> fn);

  double operator()(const Vector& a, const Vector& b) const;
  std::string name() const;
};

// G(i, j) = k(a_i, b_j). Parallel over rows of a; each entry is evaluated by
// Kernel::operator(), so the result matches gram_serial exactly.
Matrix gram(const Kernel& kernel, const Matrix& a, const Matrix& b);
Matrix gram_serial(const Kernel& kernel, const Matrix& a, const Matrix& b);

}  // namespace lupts
