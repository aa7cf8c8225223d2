#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lupts/dgp.hpp"
#include "lupts/metrics.hpp"
#include "lupts/model_io.hpp"
#include "lupts/replearn.hpp"
#include "lupts/standardizer.hpp"
#include "lupts/tuning.hpp"

namespace lupts {

inline constexpr int kConfigSchemaVersion = 1;

struct DgpConfig {
  Observation observation = Observation::square_sign;
  int d = 10;
  int q = 3;
  int horizon = 5;
  double spectral_radius = 1.3;
  bool resample_system = false;  // fresh dynamics in every repetition
};

struct TuningConfig {
  bool enabled = true;
  int rf_draws = kRandomFeatureDraws;
  int rep_draws = kRepresentationDraws;
  int folds = kFolds;
  // Overrides keyed gamma_rff, gamma_rrf, lambda, n_rf (fractions of m).
  std::map<std::string, std::pair<double, double>> bounds;
};

struct ModelSettings {
  int rep_dim = 10;
  double constraint_radius = 10.0;  // consistent_rrf
  TrainConfig train;
  TrainConfig teacher;
  TuningConfig tuning;
  std::map<std::string, HyperParams> fixed;  // per model; skips tuning
};

struct PhaseTransitionConfig {
  int m = 100;
  int horizon = 3;
  int q = 10;
  int systems = 50;
  int repetitions = 1;  // training sets per system; >= 2 adds bias/variance
  int test_size = 1000;
  std::vector<int> dims{10, 25, 50, 75, 100, 150, 200};
  double spectral_radius = 1.3;
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BiasCompoundingConfig {
  std::vector<int> horizons{2, 3, 5};
  std::vector<std::string> roster{"ols", "lupts"};
  Observation observation = Observation::square_sign;
  int d = 10;
  int q = 3;
  int m = 1000;
  int systems = 100;
  int repetitions = 10;  // training sets per system
  int test_size = 1000;
  double spectral_radius = 1.3;
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::optional<DgpConfig> dgp;
  std::string dataset;  // dataset CSV, used when dgp is absent
  std::vector<std::string> roster{"ols", "lupts"};
  std::vector<int> sample_sizes{100};
  int repetitions = 10;
  std::uint64_t seed = 0;
  int test_size = 1000;       // synthetic
  double test_fraction = 0.2;  // dataset
  bool standardize = true;
  bool svcca = false;
  ModelSettings models;

  // Single-model commands (fit / evaluate).
  std::string model;
  std::optional<HyperParams> params;
  std::string model_file;

  std::optional<PhaseTransitionConfig> phase_transition;
  std::optional<BiasCompoundingConfig> bias_compounding;

  void validate() const;
};

// Unknown keys and a wrong schema_version throw InvalidConfig.
ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);
Json to_json(const PhaseTransitionConfig& cfg);
Json to_json(const BiasCompoundingConfig& cfg);
PhaseTransitionConfig phase_transition_config_from_json(const Json& j);
BiasCompoundingConfig bias_compounding_config_from_json(const Json& j);
// Human-readable description of the config document for --help.
std::string config_schema_help();

struct ResultRecord {
  std::string model;
  int m = 0;
  int horizon = 0;
  int repetition = 0;
  double r2 = 0.0;
  bool failed = false;
  std::string error;
  double wall_seconds = 0.0;
  HyperParams params;
  std::optional<double> svcca;
  bool svcca_underdetermined = false;
};

// Model names accepted in rosters.
const std::vector<std::string>& known_models();
bool is_representation_model(const std::string& name);
// Search ranges for a training set of size m; empty when nothing is tuned.
std::vector<HyperRange> tuning_ranges(const std::string& name, int m, const TuningConfig& tuning);
HyperParams default_params(const std::string& name, int m);

struct FittedModel {
  std::string name;
  std::function<Matrix(const Matrix&)> predict;    // x_1 -> y, both in the fitted scale
  std::function<Matrix(const Matrix&)> represent;  // learned encoder; empty for closed-form models
  Json document;
};

// Fits one roster model with fixed hyperparameters. Paired models (ols_rff
// and lupts_rff, ...) given the same seed share their random features.
FittedModel fit_model(const std::string& name, const TimeSeriesDataset& train, const HyperParams& params,
                      const ModelSettings& settings, std::uint64_t seed);

// Fixed, default or tuned hyperparameters for `name` on (standardized) data.
HyperParams choose_params(const std::string& name, const TimeSeriesDataset& train, const ModelSettings& settings,
                          std::uint64_t seed, SearchResult* search = nullptr);

// Seed stream of a model inside a repetition; paired models share it.
std::uint64_t model_seed(std::uint64_t repetition_seed, const std::string& name);

struct Evaluation {
  ResultRecord record;
  Matrix prediction;  // raw outcome scale, test rows
  std::optional<SearchResult> search;
};

// Standardize on train, pick hyperparameters, refit, score R^2 on the raw
// test outcomes. Failures are recorded, not thrown.
Evaluation evaluate_model(const std::string& name, const TimeSeriesDataset& train, const TimeSeriesDataset& test,
                          const ExperimentConfig& cfg, std::uint64_t seed);

// Saved by `fit`: model document plus the standardizer and hyperparameters.
Json fit_document(const std::string& name, const TimeSeriesDataset& train, const ExperimentConfig& cfg,
                  std::uint64_t seed, SearchResult* search = nullptr);
Matrix predict_document(const Json& doc, const Matrix& x1);

Json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const Json& j);

using ProgressLog = std::function<void(const std::string&)>;

struct ExperimentResult {
  std::vector<ResultRecord> records;  // ordered by (m, repetition, roster position)
};

// Repetitions run in parallel with `jobs` workers; each (m, repetition) owns
// a derived seed so the records do not depend on the schedule.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1, const ProgressLog& log = {});

struct BiasVarianceRow {
  std::string model;
  int m = 0;
  int horizon = 0;
  int systems = 0;
  int repetitions = 0;
  int n_test_points = 0;
  double squared_bias = 0.0;
  double squared_bias_se = 0.0;  // across systems; NaN for a single system
  double variance = 0.0;
  double variance_se = 0.0;
  double mean_r2 = 0.0;
};

struct BiasVarianceResult {
  std::vector<ResultRecord> records;
  std::vector<BiasVarianceRow> rows;
};

// One fixed synthetic system, a shared test set per m and `repetitions`
// fresh training sets; every roster model is tuned and fitted per training set.
BiasVarianceResult bias_variance_study(const ExperimentConfig& cfg, int jobs = 1, const ProgressLog& log = {});

struct SystemBiasVariance {
  int horizon = 0;
  int system = 0;
  std::string model;
  double squared_bias = 0.0;
  double variance = 0.0;
  double r2 = 0.0;
};

struct BiasCompoundingResult {
  std::vector<SystemBiasVariance> details;
  std::vector<BiasVarianceRow> rows;  // one per (T, model)
};

// Per T: `systems` sampled systems, each with a shared test set and
// `repetitions` training sets; roster models use default hyperparameters.
BiasCompoundingResult bias_compounding_study(const BiasCompoundingConfig& cfg, int jobs = 1,
                                             const ProgressLog& log = {});

struct PhaseTransitionSystem {
  int d_hat = 0;
  int system = 0;
  double r2_ols = 0.0;
  double r2_lupts = 0.0;
  double variance_ols = 0.0;  // NaN with a single repetition
  double variance_lupts = 0.0;
};

struct PhaseTransitionRow {
  int d_hat = 0;
  int m = 0;
  int systems = 0;
  double mean_r2_ols = 0.0;
  double mean_r2_lupts = 0.0;
  double gap = 0.0;  // mean_r2_lupts - mean_r2_ols
  double max_abs_gap = 0.0;
  int wins = 0;      // systems with LuPTS strictly ahead
  int decided = 0;   // systems with a nonzero gap
  double sign_test_p = 1.0;
  double variance_ols = 0.0;
  double variance_lupts = 0.0;
  double variance_gap_se = 0.0;  // standard error of the paired variance difference
};

struct PhaseTransitionResult {
  std::vector<PhaseTransitionSystem> systems;
  std::vector<PhaseTransitionRow> rows;
};

// Fully observed linear systems with k = d = d_hat swept over cfg.dims.
PhaseTransitionResult phase_transition_sweep(const PhaseTransitionConfig& cfg, int jobs = 1,
                                             const ProgressLog& log = {});

struct SummaryRow {
  std::string model;
  int m = 0;
  int n = 0;
  int n_failed = 0;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;
  double mean_svcca = 0.0;  // NaN when not computed
};

// Mean and sample standard deviation per (model, m); failed fits are
// excluded from the mean and counted separately.
std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);

void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_timing_csv(std::ostream& out, const std::vector<ResultRecord>& records);
void write_bias_variance_csv(std::ostream& out, const std::vector<BiasVarianceRow>& rows);
void write_phase_transition_csv(std::ostream& out, const std::vector<PhaseTransitionRow>& rows);
void write_svcca_csv(std::ostream& out, const std::vector<ResultRecord>& records);

}  // namespace lupts
