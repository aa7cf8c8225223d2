#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "lupts/errors.hpp"
#include "lupts/harness.hpp"
#include "lupts/sequences.hpp"

using namespace lupts;
using lupts::testing::gaussian;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Noiseless linear data written to a CSV for the dataset path of the harness.
std::string noiseless_dataset(int n, std::uint64_t seed) {
  LatentSystem sys = sample_system(4, 2, 2, 1.3, seed);
  sys.transition_noise_std = 0.0;
  sys.outcome_noise_std = 0.0;
  const TimeSeriesDataset d = simulate(sys, n, seed + 1);
  const std::string path = temp_path("lupts_noiseless_" + std::to_string(seed) + ".csv");
  std::ofstream out(path);
  write_dataset_csv(out, d);
  return path;
}

ExperimentConfig small_synthetic() {
  ExperimentConfig c;
  c.dgp = DgpConfig{};
  c.dgp->d = 3;
  c.dgp->q = 2;
  c.dgp->horizon = 3;
  c.roster = {"ols", "lupts", "ols_rff", "lupts_rff"};
  c.sample_sizes = {20, 40};
  c.repetitions = 3;
  c.test_size = 100;
  c.models.tuning.rf_draws = 2;
  c.models.tuning.folds = 2;
  c.seed = 17;
  return c;
}

std::string results_text(const ExperimentResult& r) {
  std::ostringstream os;
  write_results_csv(os, r.records);
  return os.str();
}

RawCsvTable table_from(const std::vector<std::vector<std::string>>& rows) {
  RawCsvTable t;
  t.header = {"timestamp", "a", "y"};
  t.rows = rows;
  return t;
}

// All valid windows, then first-fit selection over them.
std::vector<int> brute_force_starts(const RawCsvTable& t, int L, double step, double gap) {
  const int n = static_cast<int>(t.rows.size());
  auto num = [](const std::string& s) { return !s.empty() && s != "nan"; };
  std::vector<int> valid;
  for (int s = 0; s + L <= n; ++s) {
    bool ok = true;
    const double t0 = std::stod(t.rows[s][0]);
    for (int j = 0; j < L; ++j) {
      const auto& row = t.rows[s + j];
      if (std::stod(row[0]) != t0 + j * step) ok = false;
      if (j < L - 1 && (!num(row[1]) || !num(row[2]))) ok = false;
      if (j == L - 1 && !num(row[2])) ok = false;
    }
    if (ok) valid.push_back(s);
  }
  std::vector<int> picked;
  for (int s : valid) {
    if (!picked.empty()) {
      const int last_end = picked.back() + L - 1;
      if (s <= last_end) continue;
      if (std::stod(t.rows[s][0]) - std::stod(t.rows[last_end][0]) < gap) continue;
    }
    picked.push_back(s);
  }
  return picked;
}

}  // namespace

TEST_CASE("standardizer two-column oracle") {
  TimeSeriesDataset d;
  Matrix x(4, 2);
  x << 1, 10, 2, 10, 3, 10, 6, 10;
  d.x = {x};
  d.y = Matrix(4, 1);
  d.y << 0, 2, 4, 6;
  const Standardizer s = Standardizer::fit(d);
  CHECK(s.x_mean[0](0) == doctest::Approx(3.0));
  CHECK(s.x_scale[0](0) == doctest::Approx(std::sqrt(3.5)));
  CHECK(s.x_constant[0][1]);
  CHECK_FALSE(s.x_constant[0][0]);
  CHECK(s.x_scale[0](1) == 1.0);
  CHECK(s.y_mean(0) == doctest::Approx(3.0));
  CHECK(s.y_scale(0) == doctest::Approx(std::sqrt(5.0)));

  const TimeSeriesDataset z = s.apply(d);
  CHECK(std::abs(z.x[0].col(0).mean()) < 1e-12);
  CHECK(z.x[0].col(0).squaredNorm() / 4 == doctest::Approx(1.0));
  CHECK(z.x[0].col(1).norm() == 0.0);
  const TimeSeriesDataset back = s.invert(z);
  CHECK((back.x[0] - d.x[0]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.y - d.y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardizer round trip on random data") {
  const TimeSeriesDataset d = simulate(sample_system(3, 2, 3, 1.3, 1), 50, 2);
  const Standardizer s = Standardizer::fit(d);
  const TimeSeriesDataset back = s.invert(s.apply(d));
  for (int t = 0; t < 3; ++t) CHECK((back.x[t] - d.x[t]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.invert_y(s.apply_y(d.y)) - d.y).cwiseAbs().maxCoeff() < 1e-10);
  const Standardizer r = standardizer_from_json(Json::parse(to_json(s).dump()));
  CHECK(r.apply_x(1, d.x[1]) == s.apply_x(1, d.x[1]));
}

TEST_CASE("timestamps") {
  CHECK(parse_timestamp("3600") == 3600.0);
  CHECK(parse_timestamp("1.5e3") == 1500.0);
  CHECK(parse_timestamp("1970-01-01T01:00:00") == 3600.0);
  CHECK(parse_timestamp("1970-01-02 00:00:00Z") == 86400.0);
  CHECK(parse_timestamp("2000-03-01T00:00") - parse_timestamp("2000-02-28T00:00") == 2 * 86400.0);
  CHECK_THROWS(parse_timestamp("yesterday"));
}

TEST_CASE("contiguous rows pack greedily") {
  for (int n : {2, 3, 7, 9, 10}) {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) rows.push_back({std::to_string(i), std::to_string(i * 0.5), std::to_string(i)});
    const RawCsvTable t = table_from(rows);
    SequenceSpec spec;
    spec.outcome_column = "y";
    spec.length = 3;
    spec.step = 1.0;
    const AssembledSequences a = assemble_sequences(t, spec);
    CHECK(a.data.size() == n / 3);
    CHECK(a.empty == (n < 3));
    if (n >= 3) {
      CHECK(a.data.horizon() == 2);
      CHECK(a.data.x[1](0, 0) == 0.5);
      CHECK(a.data.y(0, 0) == 2.0);
      CHECK(a.start_times[0] == 0.0);
    }
  }
}

TEST_CASE("sequence assembly matches a brute-force oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> rows;
    double t = 0.0;
    const int n = 5 + trial % 30;
    for (int i = 0; i < n; ++i) {
      t += (rng() % 5 == 0) ? 2.0 : 1.0;  // occasional missing hour
      std::string a = rng() % 9 == 0 ? "" : std::to_string(static_cast<int>(rng() % 100));
      std::string y = rng() % 11 == 0 ? "nan" : std::to_string(static_cast<int>(rng() % 100));
      rows.push_back({std::to_string(static_cast<int>(t)), a, y});
    }
    const RawCsvTable tab = table_from(rows);
    SequenceSpec spec;
    spec.outcome_column = "y";
    spec.length = 2 + trial % 3;
    spec.step = 1.0;
    spec.min_gap = static_cast<double>(trial % 4);
    const auto oracle = brute_force_starts(tab, spec.length, spec.step, spec.min_gap);
    const AssembledSequences a = assemble_sequences(tab, spec);
    REQUIRE(a.start_times.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(a.start_times[i] == std::stod(rows[oracle[i]][0]));
  }
}

TEST_CASE("sequence edge cases") {
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < 12; ++i) rows.push_back({std::to_string(i), "1", "2"});
  SequenceSpec spec;
  spec.outcome_column = "y";
  spec.step = 1.0;
  spec.min_gap = 1000.0;
  CHECK(assemble_sequences(table_from(rows), spec).data.size() == 1);

  rows.erase(rows.begin() + 1);  // hole at t = 1
  spec.min_gap = 0.0;
  const AssembledSequences a = assemble_sequences(table_from(rows), spec);
  CHECK(a.start_times.front() == 2.0);

  spec.outcome_column = "missing";
  CHECK_THROWS_AS(assemble_sequences(table_from(rows), spec), InvalidConfig);
  spec.outcome_column = "y";
  spec.length = 1;
  CHECK_THROWS_AS(assemble_sequences(table_from(rows), spec), InvalidConfig);
}

TEST_CASE("config json round trip and strictness") {
  ExperimentConfig c = small_synthetic();
  c.models.fixed["ols_rff"] = {{"n_rf", 5}, {"gamma", 0.1}};
  const ExperimentConfig back = experiment_config_from_json(Json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));

  Json j = to_json(c);
  j["bogus"] = 1;
  CHECK_THROWS_AS(experiment_config_from_json(j), InvalidConfig);
  j = to_json(c);
  j["schema_version"] = 2;
  CHECK_THROWS_AS(experiment_config_from_json(j), InvalidConfig);
  j = to_json(c);
  j["roster"] = {"ols", "nonsense"};
  CHECK_THROWS_AS(experiment_config_from_json(j), InvalidConfig);
  j = to_json(c);
  j["repetitions"] = 0;
  CHECK_THROWS_AS(experiment_config_from_json(j), InvalidConfig);
  CHECK(config_schema_help().find("schema_version") != std::string::npos);
}

TEST_CASE("tuning ranges and defaults") {
  TuningConfig t;
  CHECK(tuning_ranges("ols", 100, t).empty());
  CHECK(tuning_ranges("lupts_rff", 100, t).size() == 2);
  CHECK(tuning_ranges("crl", 100, t).size() == 1);
  CHECK(default_params("ols_rrf", 100).at("n_rf") == 40.0);
  CHECK(model_seed(5, "ols_rff") == model_seed(5, "lupts_rff"));
  CHECK(model_seed(5, "ols_rff") != model_seed(5, "ols_rrf"));
  for (const auto& name : known_models()) CHECK_NOTHROW(default_params(name, 50));
}

TEST_CASE("noiseless OLS scores near-perfect R2 on the raw scale") {
  ExperimentConfig c;
  c.dataset = noiseless_dataset(400, 3);
  c.roster = {"ols", "lupts"};
  c.sample_sizes = {100};
  c.repetitions = 3;
  const ExperimentResult r = run_experiment(c);
  for (const auto& rec : r.records) {
    CHECK_FALSE(rec.failed);
    if (rec.model == "ols") CHECK(rec.r2 >= 0.999);
  }
  // Unstandardized control.
  ExperimentConfig raw = c;
  raw.standardize = false;
  const ExperimentResult rr = run_experiment(raw);
  for (std::size_t i = 0; i < r.records.size(); ++i)
    if (r.records[i].model == "ols") CHECK(std::abs(r.records[i].r2 - rr.records[i].r2) < 1e-8);
}

TEST_CASE("experiments are deterministic and schedule independent") {
  const ExperimentConfig c = small_synthetic();
  const ExperimentResult a = run_experiment(c, 1);
  const ExperimentResult b = run_experiment(c, 1);
  const ExperimentResult p = run_experiment(c, 4);
  CHECK(results_text(a) == results_text(b));
  CHECK(results_text(a) == results_text(p));
  CHECK(a.records.size() == 2 * 3 * 4);
  for (const auto& rec : a.records) {
    CHECK_FALSE(rec.failed);
    CHECK(std::isfinite(rec.r2));
  }
  const auto summary = summarize(a.records);
  CHECK(summary.size() == 8);
  for (const auto& s : summary) CHECK(s.n == 3);
}

TEST_CASE("failures are recorded and excluded from summaries") {
  ExperimentConfig c = small_synthetic();
  c.roster = {"ols", "ols_rff"};
  c.sample_sizes = {20};
  c.models.tuning.enabled = false;
  c.models.fixed["ols_rff"] = {{"n_rf", 5}, {"gamma", -1.0}};
  const ExperimentResult r = run_experiment(c);
  int failed = 0;
  for (const auto& rec : r.records)
    if (rec.failed) {
      ++failed;
      CHECK(rec.model == "ols_rff");
      CHECK_FALSE(rec.error.empty());
    }
  CHECK(failed == 3);
  for (const auto& s : summarize(r.records))
    if (s.model == "ols_rff") {
      CHECK(s.n_failed == 3);
      CHECK(std::isnan(s.mean_r2));
    }
}

TEST_CASE("every roster model runs end to end") {
  ExperimentConfig c = small_synthetic();
  c.roster = known_models();
  c.sample_sizes = {30};
  c.repetitions = 1;
  c.svcca = true;
  c.models.tuning.enabled = false;
  c.models.train.max_epochs = 3;
  c.models.teacher.max_epochs = 3;
  c.dgp->observation = Observation::square_sign;
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.records.size() == known_models().size());
  for (const auto& rec : r.records) {
    CAPTURE(rec.model);
    CHECK_FALSE(rec.failed);
    CHECK(std::isfinite(rec.r2));
    if (is_representation_model(rec.model)) CHECK(rec.svcca.has_value());
  }
}

TEST_CASE("single-model documents predict like the fitted model") {
  const ExperimentConfig c = small_synthetic();
  const TimeSeriesDataset train = generate(sample_system(3, 2, 3, 1.3, 5), Observation::square_sign, 40, 6);
  const TimeSeriesDataset test = generate(sample_system(3, 2, 3, 1.3, 5), Observation::square_sign, 30, 7);
  for (const std::string name : {"lupts", "lupts_rrf", "consistent_rrf"}) {
    const Json doc = Json::parse(fit_document(name, train, c, 8).dump());
    const Matrix p = predict_document(doc, test.x[0]);
    CHECK(p.rows() == 30);
    CHECK(p.allFinite());
    const Evaluation ev = evaluate_model(name, train, test, c, 8);
    CHECK((ev.prediction - p).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("phase transition: equivalence above m and reproducibility") {
  PhaseTransitionConfig c;
  c.m = 20;
  c.q = 2;
  c.systems = 3;
  c.test_size = 50;
  c.dims = {4, 20, 30};
  c.seed = 3;
  const PhaseTransitionResult a = phase_transition_sweep(c);
  const PhaseTransitionResult b = phase_transition_sweep(c, 3);
  REQUIRE(a.rows.size() == 3);
  for (const auto& row : a.rows)
    if (row.d_hat >= c.m) CHECK(row.max_abs_gap <= 1e-6);
  for (std::size_t i = 0; i < a.systems.size(); ++i) {
    CHECK(a.systems[i].r2_ols == b.systems[i].r2_ols);
    CHECK(a.systems[i].r2_lupts == b.systems[i].r2_lupts);
  }
  std::ostringstream os;
  write_phase_transition_csv(os, a.rows);
  CHECK(os.str().rfind("d_hat,", 0) == 0);
}

TEST_CASE("bias compounding with one step has identical estimators") {
  BiasCompoundingConfig c;
  c.horizons = {1, 3};
  c.d = 3;
  c.m = 40;
  c.systems = 2;
  c.repetitions = 3;
  c.test_size = 50;
  const BiasCompoundingResult r = bias_compounding_study(c);
  const BiasVarianceRow* ols = nullptr;
  const BiasVarianceRow* lupts = nullptr;
  for (const auto& row : r.rows)
    if (row.horizon == 1) (row.model == "ols" ? ols : lupts) = &row;
  REQUIRE(ols != nullptr);
  REQUIRE(lupts != nullptr);
  CHECK(ols->squared_bias == lupts->squared_bias);
  CHECK(ols->variance == lupts->variance);
  CHECK(r.details.size() == 2 * 2 * 2);
}

TEST_CASE("bias-variance study on a fixed system") {
  ExperimentConfig c = small_synthetic();
  c.roster = {"ols", "lupts"};
  c.sample_sizes = {30};
  c.dgp->observation = Observation::identity;
  const BiasVarianceResult r = bias_variance_study(c);
  CHECK(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.repetitions == 3);
    CHECK(row.variance >= 0.0);
    CHECK(row.squared_bias >= 0.0);
  }
  std::ostringstream os;
  write_bias_variance_csv(os, r.rows);
  CHECK(os.str().find("squared_bias") != std::string::npos);
}
