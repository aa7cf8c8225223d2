#pragma once

#include <cstdint>
#include <vector>

#include "lupts/linalg.hpp"

namespace lupts {

// Fully connected network acting on rows: h_{l+1} = act(h_l W_l + b_l) with
// leaky ReLU on hidden layers and a linear output layer.
class Mlp {
 public:
  Mlp() = default;
  // widths = {input, hidden..., output}. Glorot-uniform weights, zero biases.
  Mlp(std::vector<int> widths, std::uint64_t seed, double leak = 0.01);

  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int layers() const { return static_cast<int>(weights.size()); }
  const std::vector<int>& widths() const { return widths_; }
  double leak() const { return leak_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Cache& cache) const;

  // Accumulates parameter gradients for d(loss)/d(output) = dout into
  // grad_w / grad_b (same shapes as weights / biases).
  void backward(const Cache& cache, const Matrix& dout, std::vector<Matrix>& grad_w,
                std::vector<Matrix>& grad_b) const;

  std::vector<Matrix> weights;  // in x out
  std::vector<Matrix> biases;   // 1 x out

 private:
  std::vector<int> widths_;
  double leak_ = 0.01;
};

}  // namespace lupts
