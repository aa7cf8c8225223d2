#include "lupts/mlp.hpp"

#include <cmath>
#include <random>

#include "lupts/errors.hpp"
#include "lupts/rng.hpp"

namespace lupts {

Mlp::Mlp(std::vector<int> widths, std::uint64_t seed, double leak) : widths_(std::move(widths)), leak_(leak) {
  if (widths_.size() < 2) throw InvalidConfig("mlp: need input and output widths");
  for (int w : widths_)
    if (w < 1) throw InvalidConfig("mlp: layer widths must be >= 1");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(in, out);
    for (int j = 0; j < out; ++j)
      for (int i = 0; i < in; ++i) w(i, j) = u(rng);
    weights.push_back(std::move(w));
    biases.push_back(Matrix::Zero(1, out));
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  Cache unused;
  return forward(x, unused);
}

Matrix Mlp::forward(const Matrix& x, Cache& cache) const {
  if (x.cols() != input_dim()) throw ShapeError("mlp: input width mismatch");
  const int L = layers();
  cache.inputs.resize(L);
  cache.pre.resize(L);
  Matrix h = x;
  for (int l = 0; l < L; ++l) {
    cache.inputs[l] = h;
    Matrix pre = h * weights[l];
    pre.rowwise() += biases[l].row(0);
    if (l + 1 < L) {
      h = pre.unaryExpr([a = leak_](double v) { return v > 0.0 ? v : a * v; });
    } else {
      h = pre;
    }
    cache.pre[l] = std::move(pre);
  }
  return h;
}

void Mlp::backward(const Cache& cache, const Matrix& dout, std::vector<Matrix>& grad_w,
                   std::vector<Matrix>& grad_b) const {
  const int L = layers();
  Matrix delta = dout;
  for (int l = L - 1; l >= 0; --l) {
    if (l + 1 < L)
      delta.array() *= cache.pre[l].array().unaryExpr([a = leak_](double v) { return v > 0.0 ? 1.0 : a; });
    grad_w[l].noalias() += cache.inputs[l].transpose() * delta;
    grad_b[l] += delta.colwise().sum();
    if (l > 0) delta = delta * weights[l].transpose();
  }
}

}  // namespace lupts
