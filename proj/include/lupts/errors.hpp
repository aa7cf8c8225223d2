#pragma once

#include <stdexcept>

namespace lupts {

// Bad argument values: non-finite data, non-positive radii or bandwidths.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Incompatible matrix or dataset dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent training / tuning / experiment configuration.
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Kernel whose Gram matrix is not symmetric.
class InvalidKernel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Target column without variance (R^2 undefined).
class DegenerateTarget : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation needs ground truth that the data does not carry.
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace lupts
