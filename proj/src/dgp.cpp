#include "lupts/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "lupts/csv.hpp"
#include "lupts/errors.hpp"
#include "lupts/rng.hpp"

namespace lupts {

Matrix LatentSystem::rollout() const {
  Matrix theta = outcome_map;
  for (auto it = transitions.rbegin(); it != transitions.rend(); ++it) theta = (*it) * theta;
  return theta;
}

TimeSeriesDataset TimeSeriesDataset::subset(std::span<const int> rows) const {
  auto pick = [&](const Matrix& src) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    return out;
  };
  TimeSeriesDataset out;
  out.x.reserve(x.size());
  for (const auto& block : x) out.x.push_back(pick(block));
  out.y = pick(y);
  if (latents) {
    std::vector<Matrix> lat;
    for (const auto& block : *latents) lat.push_back(pick(block));
    out.latents = std::move(lat);
  }
  return out;
}

void TimeSeriesDataset::validate() const {
  if (x.empty()) throw ShapeError("dataset: no time steps");
  if (y.rows() < 1) throw ShapeError("dataset: no series");
  for (const auto& block : x) {
    if (block.rows() != y.rows()) throw ShapeError("dataset: block/outcome row mismatch");
    if (block.cols() != x.front().cols()) throw ShapeError("dataset: blocks differ in width");
    require_finite(block, "dataset");
  }
  require_finite(y, "dataset");
}

LatentSystem sample_system(int d, int q, int horizon, double spectral_radius, std::uint64_t seed) {
  if (d < 1 || q < 1 || horizon < 1) throw InvalidInput("sample_system: d, q, T must be >= 1");
  if (!(spectral_radius > 0.0)) throw InvalidInput("sample_system: spectral radius must be positive");
  Rng rng(seed);
  std::normal_distribution<double> coeff(0.0, std::sqrt(0.2));

  LatentSystem sys;
  sys.d = d;
  sys.q = q;
  sys.horizon = horizon;
  sys.spectral_radius = spectral_radius;
  for (int t = 0; t + 1 < horizon; ++t) {
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = (i == j) ? 1.0 : coeff(rng);
    a *= spectral_radius / lupts::spectral_radius(a);
    sys.transitions.push_back(std::move(a));
  }
  sys.outcome_map.resize(d, q);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < q; ++j) sys.outcome_map(i, j) = coeff(rng);
  return sys;
}

namespace {

Matrix gaussian(Rng& rng, int rows, int cols, double std) {
  Matrix out(rows, cols);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = std * n(rng);
  return out;
}

}  // namespace

TimeSeriesDataset simulate(const LatentSystem& sys, int m, std::uint64_t seed) {
  if (m < 1) throw InvalidInput("simulate: m must be >= 1");
  if (static_cast<int>(sys.transitions.size()) != sys.horizon - 1)
    throw ShapeError("simulate: system needs T-1 transition matrices");
  Rng rng(seed);
  std::vector<Matrix> z;
  z.reserve(sys.horizon);
  z.push_back(gaussian(rng, m, sys.d, sys.init_std));
  for (int t = 0; t + 1 < sys.horizon; ++t)
    z.push_back(z.back() * sys.transitions[t] + gaussian(rng, m, sys.d, sys.transition_noise_std));
  TimeSeriesDataset out;
  out.y = z.back() * sys.outcome_map + gaussian(rng, m, sys.q, sys.outcome_noise_std);
  out.x = z;
  out.latents = std::move(z);
  return out;
}

Vector square_sign(const Vector& z) {
  Vector x(2 * z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    x(2 * j) = z(j) * z(j);
    x(2 * j + 1) = static_cast<double>((z(j) > 0.0) - (z(j) < 0.0));
  }
  return x;
}

Vector square_sign_inverse(const Vector& x) {
  if (x.size() % 2 != 0) throw ShapeError("square_sign_inverse: odd input length");
  Vector z(x.size() / 2);
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double sq = x(2 * j);
    if (sq < 0.0) throw InvalidInput("square_sign_inverse: negative square component");
    z(j) = x(2 * j + 1) * std::sqrt(sq);
  }
  return z;
}

Matrix square_sign_rows(const Matrix& z) {
  Matrix out(z.rows(), 2 * z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) = square_sign(z.row(i).transpose()).transpose();
  return out;
}

TimeSeriesDataset generate_square_sign_dataset(const LatentSystem& sys, int m, std::uint64_t seed) {
  TimeSeriesDataset out = simulate(sys, m, seed);
  for (auto& block : out.x) block = square_sign_rows(block);
  return out;
}

TimeSeriesDataset generate(const LatentSystem& sys, Observation obs, int m, std::uint64_t seed) {
  return obs == Observation::square_sign ? generate_square_sign_dataset(sys, m, seed) : simulate(sys, m, seed);
}

void write_dataset_csv(std::ostream& out, const TimeSeriesDataset& data) {
  data.validate();
  const int T = data.horizon();
  const int k = data.width();
  bool first = true;
  auto sep = [&]() -> std::ostream& {
    if (!first) out << ',';
    first = false;
    return out;
  };
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < k; ++j) sep() << 't' << (t + 1) << "_f" << j;
  for (int l = 0; l < data.outcomes(); ++l) sep() << 'y' << l;
  out << '\n';
  for (int i = 0; i < data.size(); ++i) {
    first = true;
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < k; ++j) sep() << format_double(data.x[t](i, j));
    for (int l = 0; l < data.outcomes(); ++l) sep() << format_double(data.y(i, l));
    out << '\n';
  }
}

TimeSeriesDataset read_dataset_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  // column index -> (t, f) or outcome index
  std::map<std::pair<int, int>, int> feature_cols;
  std::map<int, int> outcome_cols;
  int T = 0;
  int k = 0;
  for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
    const std::string& name = table.header[c];
    int t = 0, f = 0, l = 0;
    char tail = 0;
    if (std::sscanf(name.c_str(), "t%d_f%d%c", &t, &f, &tail) == 2 && t >= 1 && f >= 0) {
      feature_cols[{t - 1, f}] = c;
      T = std::max(T, t);
      k = std::max(k, f + 1);
    } else if (std::sscanf(name.c_str(), "y%d%c", &l, &tail) == 1 && l >= 0) {
      outcome_cols[l] = c;
    } else {
      throw ShapeError("dataset csv: unexpected column '" + name + "'");
    }
  }
  const int q = static_cast<int>(outcome_cols.size());
  if (T == 0 || q == 0) throw ShapeError("dataset csv: needs t*_f* and y* columns");
  if (static_cast<int>(feature_cols.size()) != T * k) throw ShapeError("dataset csv: incomplete feature grid");
  for (int l = 0; l < q; ++l)
    if (!outcome_cols.count(l)) throw ShapeError("dataset csv: outcome columns must be y0..y{q-1}");
  const int m = static_cast<int>(table.rows.size());
  TimeSeriesDataset out;
  out.x.assign(T, Matrix(m, k));
  out.y.resize(m, q);
  for (int i = 0; i < m; ++i) {
    const auto& row = table.rows[i];
    for (const auto& [tf, c] : feature_cols) out.x[tf.first](i, tf.second) = row[c];
    for (const auto& [l, c] : outcome_cols) out.y(i, l) = row[c];
  }
  out.validate();
  return out;
}

}  // namespace lupts
