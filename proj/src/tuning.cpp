#include "lupts/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "lupts/csv.hpp"
#include "lupts/errors.hpp"

namespace lupts {

void HyperRange::validate() const {
  if (!(lower < upper)) throw InvalidConfig("hyperparameter '" + name + "': lower must be < upper");
  if (scale == Scale::log && !(lower > 0.0))
    throw InvalidConfig("hyperparameter '" + name + "': log scale needs a positive lower bound");
}

double HyperRange::draw(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double v = scale == Scale::log ? std::exp(std::log(lower) + r * (std::log(upper) - std::log(lower)))
                                 : lower + r * (upper - lower);
  if (integer) v = std::round(v);
  return std::clamp(v, lower, upper);
}

HyperRange n_random_features_range(int m) {
  const double lo = std::max(1.0, std::round(0.05 * m));
  const double hi = std::max(lo + 1.0, std::round(0.8 * m));
  return {"n_rf", lo, hi, Scale::linear, true};
}

HyperRange gamma_rrf_range() { return {"gamma", 0.01, 10.0, Scale::log, false}; }
HyperRange gamma_rff_range() { return {"gamma", 0.001, 0.1, Scale::log, false}; }
HyperRange lambda_range() { return {"lambda", 0.0, 1.0, Scale::linear, false}; }

std::vector<Fold> kfold_split(int m, int k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw InvalidConfig("kfold_split: need at least two folds");
  if (m < k_folds) throw InvalidConfig("kfold_split: fewer samples than folds");
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<Fold> folds(k_folds);
  int start = 0;
  for (int f = 0; f < k_folds; ++f) {
    const int size = m / k_folds + (f < m % k_folds ? 1 : 0);
    for (int i = 0; i < m; ++i) {
      if (i >= start && i < start + size)
        folds[f].validation.push_back(idx[i]);
      else
        folds[f].train.push_back(idx[i]);
    }
    start += size;
  }
  return folds;
}

SearchResult random_search(const Trainer& trainer, const TimeSeriesDataset& data,
                           const std::vector<HyperRange>& ranges, int n_draws, int k_folds, std::uint64_t seed,
                           int jobs) {
  if (n_draws < 1) throw InvalidConfig("random_search: n_draws must be >= 1");
  for (const auto& r : ranges) r.validate();
  const auto folds = kfold_split(data.size(), k_folds, derive_seed(seed, {0xf01d}));

  std::vector<CvRow> table(static_cast<std::size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, {0xd4a3, static_cast<std::uint64_t>(d)}));
    table[d].draw = d;
    for (const auto& r : ranges) table[d].params[r.name] = r.draw(rng);
  }

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (int d = 0; d < n_draws; ++d) {
    CvRow& row = table[d];
    try {
      for (int f = 0; f < k_folds; ++f) {
        const auto train = data.subset(folds[f].train);
        const auto val = data.subset(folds[f].validation);
        const double s = trainer(train, val, row.params,
                                 derive_seed(seed, {0x7a1e, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(f)}));
        row.fold_scores.push_back(std::isfinite(s) ? s : -std::numeric_limits<double>::infinity());
      }
      row.mean = std::accumulate(row.fold_scores.begin(), row.fold_scores.end(), 0.0) / k_folds;
      if (std::isnan(row.mean)) row.mean = -std::numeric_limits<double>::infinity();
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.mean = -std::numeric_limits<double>::infinity();
    }
  }

  SearchResult out;
  out.table = std::move(table);
  out.best_draw = 0;
  for (int d = 1; d < n_draws; ++d)
    if (out.table[d].mean > out.table[out.best_draw].mean) out.best_draw = d;
  out.best = out.table[out.best_draw].params;
  out.best_score = out.table[out.best_draw].mean;
  return out;
}

void write_cv_table(std::ostream& out, const SearchResult& result) {
  if (result.table.empty()) return;
  const auto& first = result.table.front();
  std::size_t n_folds = 0;
  for (const auto& row : result.table) n_folds = std::max(n_folds, row.fold_scores.size());
  out << "draw";
  for (const auto& [name, _] : first.params) out << ',' << name;
  for (std::size_t f = 0; f < n_folds; ++f) out << ",fold" << f;
  out << ",mean\n";
  for (const auto& row : result.table) {
    out << row.draw;
    for (const auto& [_, v] : row.params) out << ',' << format_double(v);
    for (std::size_t f = 0; f < n_folds; ++f)
      out << ',' << (f < row.fold_scores.size() ? format_double(row.fold_scores[f]) : std::string("nan"));
    out << ',' << format_double(row.mean) << '\n';
  }
}

}  // namespace lupts
