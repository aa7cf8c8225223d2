#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lupts/dgp.hpp"
#include "lupts/rng.hpp"

namespace lupts {

enum class Scale { linear, log };

struct HyperRange {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::linear;
  bool integer = false;

  // Throws InvalidConfig on lower >= upper or a non-positive log bound.
  void validate() const;
  double draw(Rng& rng) const;
};

using HyperParams = std::map<std::string, double>;

// Table ranges for a training set of size m.
HyperRange n_random_features_range(int m);  // [max(1, round(0.05 m)), round(0.8 m)], integer
HyperRange gamma_rrf_range();               // [0.01, 10], log
HyperRange gamma_rff_range();               // [0.001, 0.1], log
HyperRange lambda_range();                  // [0, 1], linear

struct Fold {
  std::vector<int> train;
  std::vector<int> validation;
};

// Seeded shuffle cut into k folds whose sizes differ by at most one.
std::vector<Fold> kfold_split(int m, int k_folds, std::uint64_t seed);

// Fits on `train`, returns a validation score (higher is better).
using Trainer = std::function<double(const TimeSeriesDataset& train, const TimeSeriesDataset& validation,
                                     const HyperParams& params, std::uint64_t seed)>;

struct CvRow {
  int draw = 0;
  HyperParams params;
  std::vector<double> fold_scores;
  double mean = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  HyperParams best;
  double best_score = 0.0;
  int best_draw = 0;
  std::vector<CvRow> table;
};

inline constexpr int kRandomFeatureDraws = 10;
inline constexpr int kRepresentationDraws = 5;
inline constexpr int kFolds = 5;

// Draws n_draws configurations, scores each by mean validation score over the
// folds and returns the first-drawn maximizer. A draw whose trainer throws
// scores -inf and the search continues. Draws run in parallel when jobs > 1.
SearchResult random_search(const Trainer& trainer, const TimeSeriesDataset& data,
                           const std::vector<HyperRange>& ranges, int n_draws, int k_folds, std::uint64_t seed,
                           int jobs = 1);

// draw, <param columns...>, fold0..fold{k-1}, mean
void write_cv_table(std::ostream& out, const SearchResult& result);

}  // namespace lupts
