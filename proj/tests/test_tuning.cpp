#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "lupts/dgp.hpp"
#include "lupts/errors.hpp"
#include "lupts/tuning.hpp"

using namespace lupts;

namespace {

std::vector<int> sizes(const std::vector<Fold>& folds) {
  std::vector<int> s;
  for (const auto& f : folds) s.push_back(static_cast<int>(f.validation.size()));
  return s;
}

TimeSeriesDataset small_data(int m) { return simulate(sample_system(2, 1, 2, 1.3, 5), m, 6); }

}  // namespace

TEST_CASE("kfold split partitions the indices") {
  const auto folds = kfold_split(10, 5, 1);
  REQUIRE(folds.size() == 5);
  std::set<int> all;
  for (const auto& f : folds) {
    CHECK(f.validation.size() == 2);
    CHECK(f.train.size() == 8);
    for (int i : f.validation) CHECK(all.insert(i).second);
    std::set<int> both(f.train.begin(), f.train.end());
    for (int i : f.validation) CHECK(both.count(i) == 0);
  }
  CHECK(all.size() == 10);
}

TEST_CASE("kfold split is seeded and balanced") {
  const auto a = kfold_split(23, 5, 7);
  const auto b = kfold_split(23, 5, 7);
  for (std::size_t f = 0; f < a.size(); ++f) CHECK(a[f].validation == b[f].validation);
  CHECK(sizes(kfold_split(7, 5, 3)) == std::vector<int>{2, 2, 1, 1, 1});
  CHECK(kfold_split(23, 5, 8)[0].validation != a[0].validation);
  CHECK_THROWS_AS(kfold_split(3, 5, 1), InvalidConfig);
  CHECK_THROWS_AS(kfold_split(10, 1, 1), InvalidConfig);
}

TEST_CASE("hyperparameter ranges") {
  const HyperRange n = n_random_features_range(100);
  CHECK(n.lower == 5.0);
  CHECK(n.upper == 80.0);
  CHECK(n.integer);
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double v = n.draw(rng);
    CHECK(v == std::round(v));
    CHECK(v >= 5.0);
    CHECK(v <= 80.0);
  }
  CHECK(n_random_features_range(10).lower == 1.0);
  CHECK(gamma_rrf_range().lower == 0.01);
  CHECK(gamma_rrf_range().upper == 10.0);
  CHECK(gamma_rff_range().lower == 0.001);
  CHECK(gamma_rff_range().upper == 0.1);
  CHECK(lambda_range().scale == Scale::linear);
  CHECK(gamma_rrf_range().scale == Scale::log);
}

TEST_CASE("log draws spread over decades") {
  const HyperRange g = gamma_rrf_range();
  Rng rng(12);
  int below_one_tenth = 0;
  for (int i = 0; i < 4000; ++i) {
    const double v = g.draw(rng);
    CHECK(v >= 0.01);
    CHECK(v <= 10.0);
    if (v < 0.1) ++below_one_tenth;
  }
  // log-uniform puts a third of the mass in [0.01, 0.1]
  CHECK(std::abs(below_one_tenth / 4000.0 - 1.0 / 3.0) < 0.03);
}

TEST_CASE("range validation") {
  CHECK_THROWS_AS((HyperRange{"x", 1.0, 1.0}.validate()), InvalidConfig);
  CHECK_THROWS_AS((HyperRange{"x", 0.0, 1.0, Scale::log}.validate()), InvalidConfig);
  CHECK_NOTHROW((HyperRange{"x", 0.1, 1.0, Scale::log}.validate()));
}

TEST_CASE("random search returns the best first-drawn configuration") {
  const TimeSeriesDataset d = small_data(30);
  // score peaks at x = 0.3
  Trainer t = [](const TimeSeriesDataset&, const TimeSeriesDataset&, const HyperParams& p, std::uint64_t) {
    return -std::abs(p.at("x") - 0.3);
  };
  const SearchResult r = random_search(t, d, {{"x", 0.0, 1.0}}, 10, 5, 42);
  REQUIRE(r.table.size() == 10);
  for (const auto& row : r.table) {
    CHECK(row.fold_scores.size() == 5);
    CHECK(r.best_score >= row.mean);
  }
  CHECK(r.best.at("x") == r.table[r.best_draw].params.at("x"));

  const SearchResult one = random_search(t, d, {{"x", 0.0, 1.0}}, 1, 5, 42);
  CHECK(one.best_draw == 0);
  CHECK(one.best.at("x") == one.table[0].params.at("x"));

  Trainer flat = [](const TimeSeriesDataset&, const TimeSeriesDataset&, const HyperParams&, std::uint64_t) {
    return 0.5;
  };
  CHECK(random_search(flat, d, {{"x", 0.0, 1.0}}, 6, 5, 1).best_draw == 0);
}

TEST_CASE("narrow ranges give near-identical draws") {
  const TimeSeriesDataset d = small_data(20);
  Trainer t = [](const TimeSeriesDataset&, const TimeSeriesDataset&, const HyperParams& p, std::uint64_t) {
    return p.at("x");
  };
  const SearchResult r = random_search(t, d, {{"x", 1.0 - 1e-9, 1.0}}, 5, 5, 3);
  for (const auto& row : r.table) CHECK(std::abs(row.mean - r.best_score) < 1e-8);
}

TEST_CASE("failing draws score minus infinity and the search continues") {
  const TimeSeriesDataset d = small_data(20);
  Trainer t = [](const TimeSeriesDataset&, const TimeSeriesDataset&, const HyperParams& p, std::uint64_t) {
    if (p.at("x") < 0.5) throw InvalidInput("boom");
    return p.at("x");
  };
  const SearchResult r = random_search(t, d, {{"x", 0.0, 1.0}}, 10, 5, 4);
  int failed = 0;
  for (const auto& row : r.table)
    if (row.failed) {
      ++failed;
      CHECK(std::isinf(row.mean));
      CHECK(row.error == "boom");
    }
  CHECK(failed > 0);
  CHECK(r.best.at("x") >= 0.5);
}

TEST_CASE("parallel search matches serial search") {
  const TimeSeriesDataset d = small_data(25);
  Trainer t = [](const TimeSeriesDataset& tr, const TimeSeriesDataset& va, const HyperParams& p, std::uint64_t s) {
    return p.at("x") * tr.y.sum() + va.y.sum() + static_cast<double>(s % 97);
  };
  const SearchResult a = random_search(t, d, {{"x", 0.0, 1.0}}, 8, 5, 9, 1);
  const SearchResult b = random_search(t, d, {{"x", 0.0, 1.0}}, 8, 5, 9, 4);
  for (std::size_t i = 0; i < a.table.size(); ++i) CHECK(a.table[i].fold_scores == b.table[i].fold_scores);
  CHECK(a.best_draw == b.best_draw);
}

TEST_CASE("cv table csv") {
  const TimeSeriesDataset d = small_data(10);
  Trainer t = [](const TimeSeriesDataset&, const TimeSeriesDataset&, const HyperParams& p, std::uint64_t) {
    return p.at("a");
  };
  const SearchResult r = random_search(t, d, {{"a", 0.0, 1.0}, {"b", 1.0, 2.0}}, 3, 2, 1);
  std::ostringstream os;
  write_cv_table(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "draw,a,b,fold0,fold1,mean");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
}
