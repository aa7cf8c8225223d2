#include "lupts/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "lupts/csv.hpp"
#include "lupts/errors.hpp"
#include "lupts/estimators.hpp"
#include "lupts/features.hpp"

namespace lupts {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidConfig(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw InvalidConfig(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InvalidConfig(std::string("config key '") + key + "': " + e.what());
  }
}

std::string observation_name(Observation o) { return o == Observation::identity ? "identity" : "square_sign"; }

Observation observation_from(const std::string& s) {
  if (s == "identity" || s == "linear") return Observation::identity;
  if (s == "square_sign") return Observation::square_sign;
  throw InvalidConfig("unknown observation '" + s + "'");
}

TrainConfig train_config_from_json(const Json& j, TrainConfig base) {
  reject_unknown(j, {"learning_rate", "batch_size", "max_epochs", "patience", "validation_fraction"}, "train");
  read(j, "learning_rate", base.learning_rate);
  read(j, "batch_size", base.batch_size);
  read(j, "max_epochs", base.max_epochs);
  read(j, "patience", base.patience);
  read(j, "validation_fraction", base.validation_fraction);
  base.validate();
  return base;
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"validation_fraction", c.validation_fraction}};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double param(const HyperParams& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) throw InvalidConfig(std::string("missing hyperparameter '") + key + "'");
  return it->second;
}

int width_param(const HyperParams& p) {
  const double v = param(p, "n_rf");
  if (!(v >= 1.0)) throw InvalidConfig("n_rf must be >= 1");
  return static_cast<int>(std::lround(v));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Standard error of the mean (n - 1 variance); NaN below two values.
double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Runs body(i) for i in [0, n) on `jobs` threads; the first exception is
// rethrown after the loop.
template <typename Body>
void parallel_tasks(int n, int jobs, Body body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(lupts_task_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

void emit(const ProgressLog& log, const std::string& msg) {
  if (!log) return;
#pragma omp critical(lupts_progress)
  log(msg);
}

std::string format_params(const HyperParams& p) {
  std::string out;
  for (const auto& [k, v] : p) {
    if (!out.empty()) out += ';';
    out += k + '=' + format_double(v);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- configs

void PhaseTransitionConfig::validate() const {
  if (m < 2) throw InvalidConfig("phase_transition: m must be >= 2");
  if (horizon < 1 || q < 1) throw InvalidConfig("phase_transition: horizon and q must be >= 1");
  if (systems < 1 || repetitions < 1) throw InvalidConfig("phase_transition: systems and repetitions must be >= 1");
  if (test_size < 2) throw InvalidConfig("phase_transition: test_size must be >= 2");
  if (dims.empty()) throw InvalidConfig("phase_transition: empty dims");
  for (int d : dims)
    if (d < 1) throw InvalidConfig("phase_transition: dims must be >= 1");
  if (!(spectral_radius > 0.0)) throw InvalidConfig("phase_transition: spectral_radius must be positive");
}

void BiasCompoundingConfig::validate() const {
  if (horizons.empty()) throw InvalidConfig("bias_compounding: empty horizons");
  for (int t : horizons)
    if (t < 1) throw InvalidConfig("bias_compounding: horizons must be >= 1");
  if (roster.empty()) throw InvalidConfig("bias_compounding: empty roster");
  for (const auto& name : roster) {
    if (std::find(known_models().begin(), known_models().end(), name) == known_models().end())
      throw InvalidConfig("bias_compounding: unknown model '" + name + "'");
    if (is_representation_model(name)) throw InvalidConfig("bias_compounding: closed-form models only");
  }
  if (d < 1 || q < 1 || m < 2) throw InvalidConfig("bias_compounding: need d, q >= 1 and m >= 2");
  if (systems < 1) throw InvalidConfig("bias_compounding: systems must be >= 1");
  if (repetitions < 2) throw InvalidConfig("bias_compounding: repetitions must be >= 2");
  if (test_size < 1) throw InvalidConfig("bias_compounding: test_size must be >= 1");
  if (!(spectral_radius > 0.0)) throw InvalidConfig("bias_compounding: spectral_radius must be positive");
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw InvalidConfig("unsupported schema_version " + std::to_string(schema_version));
  if (repetitions < 1) throw InvalidConfig("repetitions must be >= 1");
  for (int m : sample_sizes)
    if (m < 2) throw InvalidConfig("sample sizes must be >= 2");
  if (test_size < 2) throw InvalidConfig("test_size must be >= 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidConfig("test_fraction must lie in (0, 1)");
  for (const auto& name : roster)
    if (std::find(known_models().begin(), known_models().end(), name) == known_models().end())
      throw InvalidConfig("unknown model '" + name + "'");
  if (dgp) {
    if (dgp->d < 1 || dgp->q < 1 || dgp->horizon < 1) throw InvalidConfig("dgp: d, q and horizon must be >= 1");
    if (!(dgp->spectral_radius > 0.0)) throw InvalidConfig("dgp: spectral_radius must be positive");
  }
  if (models.rep_dim < 1) throw InvalidConfig("models.rep_dim must be >= 1");
  if (!(models.constraint_radius > 0.0)) throw InvalidConfig("models.constraint_radius must be positive");
  if (models.tuning.rf_draws < 1 || models.tuning.rep_draws < 1) throw InvalidConfig("tuning draws must be >= 1");
  if (models.tuning.folds < 2) throw InvalidConfig("tuning.folds must be >= 2");
  for (const auto& [key, b] : models.tuning.bounds) {
    if (key != "gamma_rff" && key != "gamma_rrf" && key != "lambda" && key != "n_rf")
      throw InvalidConfig("tuning.bounds: unknown key '" + key + "'");
    if (!(b.first < b.second)) throw InvalidConfig("tuning.bounds." + key + ": lower must be < upper");
  }
  models.train.validate();
  models.teacher.validate();
  if (phase_transition) phase_transition->validate();
  if (bias_compounding) bias_compounding->validate();
}

PhaseTransitionConfig phase_transition_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"m", "horizon", "q", "systems", "repetitions", "test_size", "dims", "spectral_radius",
                  "standardize", "seed"},
                 "phase_transition");
  PhaseTransitionConfig c;
  read(j, "m", c.m);
  read(j, "horizon", c.horizon);
  read(j, "q", c.q);
  read(j, "systems", c.systems);
  read(j, "repetitions", c.repetitions);
  read(j, "test_size", c.test_size);
  read(j, "dims", c.dims);
  read(j, "spectral_radius", c.spectral_radius);
  read(j, "standardize", c.standardize);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const PhaseTransitionConfig& c) {
  return Json{{"m", c.m},
              {"horizon", c.horizon},
              {"q", c.q},
              {"systems", c.systems},
              {"repetitions", c.repetitions},
              {"test_size", c.test_size},
              {"dims", c.dims},
              {"spectral_radius", c.spectral_radius},
              {"standardize", c.standardize},
              {"seed", c.seed}};
}

BiasCompoundingConfig bias_compounding_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"horizons", "roster", "observation", "d", "q", "m", "systems", "repetitions", "test_size",
                  "spectral_radius", "standardize", "seed"},
                 "bias_compounding");
  BiasCompoundingConfig c;
  read(j, "horizons", c.horizons);
  read(j, "roster", c.roster);
  if (j.contains("observation")) c.observation = observation_from(j.at("observation").get<std::string>());
  read(j, "d", c.d);
  read(j, "q", c.q);
  read(j, "m", c.m);
  read(j, "systems", c.systems);
  read(j, "repetitions", c.repetitions);
  read(j, "test_size", c.test_size);
  read(j, "spectral_radius", c.spectral_radius);
  read(j, "standardize", c.standardize);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const BiasCompoundingConfig& c) {
  return Json{{"horizons", c.horizons},
              {"roster", c.roster},
              {"observation", observation_name(c.observation)},
              {"d", c.d},
              {"q", c.q},
              {"m", c.m},
              {"systems", c.systems},
              {"repetitions", c.repetitions},
              {"test_size", c.test_size},
              {"spectral_radius", c.spectral_radius},
              {"standardize", c.standardize},
              {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"schema_version", "dgp", "dataset", "roster", "sample_sizes", "repetitions", "seed", "test_size",
                  "test_fraction", "standardize", "svcca", "models", "model", "params", "model_file",
                  "phase_transition", "bias_compounding"},
                 "config");
  ExperimentConfig c;
  read(j, "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    throw InvalidConfig("unsupported schema_version " + std::to_string(c.schema_version));
  if (j.contains("dgp")) {
    const Json& g = j.at("dgp");
    reject_unknown(g, {"observation", "d", "q", "horizon", "spectral_radius", "resample_system"}, "dgp");
    DgpConfig d;
    if (g.contains("observation")) d.observation = observation_from(g.at("observation").get<std::string>());
    read(g, "d", d.d);
    read(g, "q", d.q);
    read(g, "horizon", d.horizon);
    read(g, "spectral_radius", d.spectral_radius);
    read(g, "resample_system", d.resample_system);
    c.dgp = d;
  }
  read(j, "dataset", c.dataset);
  read(j, "roster", c.roster);
  read(j, "sample_sizes", c.sample_sizes);
  read(j, "repetitions", c.repetitions);
  read(j, "seed", c.seed);
  read(j, "test_size", c.test_size);
  read(j, "test_fraction", c.test_fraction);
  read(j, "standardize", c.standardize);
  read(j, "svcca", c.svcca);
  read(j, "model", c.model);
  if (j.contains("params")) {
    HyperParams p;
    read(j, "params", p);
    c.params = p;
  }
  read(j, "model_file", c.model_file);
  if (j.contains("models")) {
    const Json& mj = j.at("models");
    reject_unknown(mj, {"rep_dim", "constraint_radius", "train", "teacher", "tuning", "fixed"}, "models");
    read(mj, "rep_dim", c.models.rep_dim);
    read(mj, "constraint_radius", c.models.constraint_radius);
    if (mj.contains("train")) c.models.train = train_config_from_json(mj.at("train"), c.models.train);
    if (mj.contains("teacher")) c.models.teacher = train_config_from_json(mj.at("teacher"), c.models.teacher);
    if (mj.contains("tuning")) {
      const Json& tj = mj.at("tuning");
      reject_unknown(tj, {"enabled", "rf_draws", "rep_draws", "folds", "bounds"}, "tuning");
      read(tj, "enabled", c.models.tuning.enabled);
      read(tj, "rf_draws", c.models.tuning.rf_draws);
      read(tj, "rep_draws", c.models.tuning.rep_draws);
      read(tj, "folds", c.models.tuning.folds);
      read(tj, "bounds", c.models.tuning.bounds);
    }
    read(mj, "fixed", c.models.fixed);
  }
  if (j.contains("phase_transition")) c.phase_transition = phase_transition_config_from_json(j.at("phase_transition"));
  if (j.contains("bias_compounding")) c.bias_compounding = bias_compounding_config_from_json(j.at("bias_compounding"));
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j{{"schema_version", c.schema_version},
         {"roster", c.roster},
         {"sample_sizes", c.sample_sizes},
         {"repetitions", c.repetitions},
         {"seed", c.seed},
         {"test_size", c.test_size},
         {"test_fraction", c.test_fraction},
         {"standardize", c.standardize},
         {"svcca", c.svcca}};
  if (c.dgp)
    j["dgp"] = Json{{"observation", observation_name(c.dgp->observation)},
                    {"d", c.dgp->d},
                    {"q", c.dgp->q},
                    {"horizon", c.dgp->horizon},
                    {"spectral_radius", c.dgp->spectral_radius},
                    {"resample_system", c.dgp->resample_system}};
  if (!c.dataset.empty()) j["dataset"] = c.dataset;
  if (!c.model.empty()) j["model"] = c.model;
  if (c.params) j["params"] = *c.params;
  if (!c.model_file.empty()) j["model_file"] = c.model_file;
  j["models"] = Json{{"rep_dim", c.models.rep_dim},
                     {"constraint_radius", c.models.constraint_radius},
                     {"train", train_config_to_json(c.models.train)},
                     {"teacher", train_config_to_json(c.models.teacher)},
                     {"tuning",
                      {{"enabled", c.models.tuning.enabled},
                       {"rf_draws", c.models.tuning.rf_draws},
                       {"rep_draws", c.models.tuning.rep_draws},
                       {"folds", c.models.tuning.folds},
                       {"bounds", c.models.tuning.bounds}}},
                     {"fixed", c.models.fixed}};
  if (c.phase_transition) j["phase_transition"] = to_json(*c.phase_transition);
  if (c.bias_compounding) j["bias_compounding"] = to_json(*c.bias_compounding);
  return j;
}

std::string config_schema_help() {
  return R"(Config schema (schema_version 1), a single JSON object:
  schema_version   1
  dgp              {observation: "square_sign"|"identity", d, q, horizon,
                    spectral_radius (1.3), resample_system (false)}
  dataset          dataset CSV (t<step>_f<j> ..., y<l> columns), used without dgp
  roster           model names: ols lupts ols_latent lupts_latent ols_rff
                   lupts_rff ols_rrf lupts_rrf consistent_rrf classic_rep srl
                   crl grl distillation
  sample_sizes     training set sizes
  repetitions      repetitions per sample size
  seed             base seed
  test_size        synthetic test points (1000)
  test_fraction    held-out share of a dataset (0.2)
  standardize      standardize inputs and outcomes on the training set (true)
  svcca            score learned representations against true latents (false)
  models           {rep_dim (10), constraint_radius (10),
                    train / teacher: {learning_rate, batch_size, max_epochs,
                                      patience, validation_fraction},
                    tuning: {enabled, rf_draws (10), rep_draws (5), folds (5),
                             bounds: {gamma_rff|gamma_rrf|lambda|n_rf: [lo, hi]}},
                    fixed: {model: {param: value}}}
  model, params, model_file        single-model fit / evaluate
  phase_transition {m, horizon, q, systems, repetitions, test_size, dims,
                    spectral_radius, standardize, seed}
  bias_compounding {horizons, roster, observation, d, q, m, systems,
                    repetitions, test_size, spectral_radius, standardize, seed}
)";
}

// ---------------------------------------------------------------- models

const std::vector<std::string>& known_models() {
  static const std::vector<std::string> names{"ols",       "lupts",      "ols_latent",  "lupts_latent",
                                              "ols_rff",   "lupts_rff",  "ols_rrf",     "lupts_rrf",
                                              "consistent_rrf", "classic_rep", "srl", "crl", "grl",
                                              "distillation"};
  return names;
}

bool is_representation_model(const std::string& name) {
  return name == "classic_rep" || name == "srl" || name == "crl" || name == "grl" || name == "distillation";
}

namespace {

HyperRange with_bounds(HyperRange r, const TuningConfig& tuning, const std::string& key) {
  const auto it = tuning.bounds.find(key);
  if (it != tuning.bounds.end()) {
    r.lower = it->second.first;
    r.upper = it->second.second;
  }
  return r;
}

HyperRange width_range(int m, const TuningConfig& tuning) {
  HyperRange r = n_random_features_range(m);
  const auto it = tuning.bounds.find("n_rf");
  if (it != tuning.bounds.end()) {
    r.lower = std::max(1.0, std::round(it->second.first * m));
    r.upper = std::max(r.lower + 1.0, std::round(it->second.second * m));
  }
  return r;
}

bool uses_rff(const std::string& name) { return name == "ols_rff" || name == "lupts_rff"; }
bool uses_rrf(const std::string& name) {
  return name == "ols_rrf" || name == "lupts_rrf" || name == "consistent_rrf";
}

}  // namespace

std::vector<HyperRange> tuning_ranges(const std::string& name, int m, const TuningConfig& tuning) {
  if (uses_rff(name)) return {width_range(m, tuning), with_bounds(gamma_rff_range(), tuning, "gamma_rff")};
  if (uses_rrf(name)) return {width_range(m, tuning), with_bounds(gamma_rrf_range(), tuning, "gamma_rrf")};
  if (name == "crl" || name == "grl" || name == "distillation") return {with_bounds(lambda_range(), tuning, "lambda")};
  return {};
}

HyperParams default_params(const std::string& name, int m) {
  const double width = std::max(1.0, std::round(0.4 * m));
  if (uses_rff(name)) return {{"n_rf", width}, {"gamma", 0.01}};
  if (uses_rrf(name)) return {{"n_rf", width}, {"gamma", 0.3}};
  if (name == "crl" || name == "grl" || name == "distillation") return {{"lambda", 0.5}};
  return {};
}

std::uint64_t model_seed(std::uint64_t repetition_seed, const std::string& name) {
  // ols_x and lupts_x share a stream so they see the same random features.
  std::string key = name;
  if (key.rfind("ols_", 0) == 0) key = key.substr(4);
  else if (key.rfind("lupts_", 0) == 0) key = key.substr(6);
  return derive_seed(repetition_seed, {3, fnv1a(key)});
}

namespace {

FittedModel from_linear(const std::string& name, LinearPredictor lp) {
  FittedModel f;
  f.name = name;
  f.document = to_json(lp);
  auto shared = std::make_shared<const LinearPredictor>(std::move(lp));
  f.predict = [shared](const Matrix& x) { return shared->predict(x); };
  return f;
}

FittedModel from_rep(const std::string& name, RepModel rm) {
  FittedModel f;
  f.name = name;
  f.document = to_json(rm);
  auto shared = std::make_shared<const RepModel>(std::move(rm));
  f.predict = [shared](const Matrix& x) { return shared->predict(x); };
  f.represent = [shared](const Matrix& x) { return shared->represent(x); };
  return f;
}

}  // namespace

FittedModel fit_model(const std::string& name, const TimeSeriesDataset& data, const HyperParams& params,
                      const ModelSettings& settings, std::uint64_t seed) {
  const int k = data.width();
  if (name == "ols") return from_linear(name, fit_classical(data, FeatureMap::identity(k)));
  if (name == "lupts") return from_linear(name, fit_lupts(data, FeatureMap::identity(k)));
  if (name == "ols_latent" || name == "lupts_latent") {
    if (k % 2 != 0) throw InvalidConfig(name + ": needs Square-Sign observations (even width)");
    const FeatureMap map = FeatureMap::square_sign_inverse(k / 2);
    return from_linear(name, name == "ols_latent" ? fit_classical(data, map) : fit_lupts(data, map));
  }
  if (uses_rff(name) || name == "ols_rrf" || name == "lupts_rrf") {
    const int width = width_param(params);
    const double gamma = param(params, "gamma");
    const FeatureMap map = uses_rff(name) ? FeatureMap::rff(k, width, gamma, derive_seed(seed, 1))
                                          : FeatureMap::rrf(k, width, gamma, derive_seed(seed, 1));
    const bool privileged = name.rfind("lupts_", 0) == 0;
    return from_linear(name, privileged ? fit_lupts(data, map) : fit_classical(data, map));
  }
  if (name == "consistent_rrf") {
    const std::vector<int> widths(data.horizon(), width_param(params));
    return from_linear(name, fit_consistent_rrf_lupts(data, widths, param(params, "gamma"),
                                                      settings.constraint_radius, derive_seed(seed, 1)));
  }
  if (is_representation_model(name)) {
    const double lambda = params.count("lambda") ? params.at("lambda") : 1.0;
    TrainConfig student = settings.train;
    student.seed = derive_seed(seed, 2);
    if (name == "distillation") {
      TrainConfig teacher = settings.teacher;
      teacher.seed = derive_seed(seed, 3);
      auto result = fit_distillation(data, teacher, student, lambda, settings.rep_dim, derive_seed(seed, 4));
      return from_rep(name, std::move(result.student.model));
    }
    const Objective obj = objective_from_string(name);
    RepModel model =
        make_rep_model(obj, k, data.horizon(), data.outcomes(), settings.rep_dim, lambda, derive_seed(seed, 1));
    return from_rep(name, train(std::move(model), data, student).model);
  }
  throw InvalidConfig("unknown model '" + name + "'");
}

HyperParams choose_params(const std::string& name, const TimeSeriesDataset& data, const ModelSettings& settings,
                          std::uint64_t seed, SearchResult* search) {
  if (const auto it = settings.fixed.find(name); it != settings.fixed.end()) return it->second;
  const auto ranges = tuning_ranges(name, data.size(), settings.tuning);
  if (ranges.empty()) return {};
  if (!settings.tuning.enabled) return default_params(name, data.size());
  const int draws = is_representation_model(name) ? settings.tuning.rep_draws : settings.tuning.rf_draws;
  const Trainer trainer = [&](const TimeSeriesDataset& tr, const TimeSeriesDataset& val, const HyperParams& p,
                              std::uint64_t s) {
    const FittedModel f = fit_model(name, tr, p, settings, s);
    return r2(val.y, f.predict(val.x.front()));
  };
  SearchResult result = random_search(trainer, data, ranges, draws, settings.tuning.folds, seed, 1);
  if (!std::isfinite(result.best_score)) throw std::runtime_error(name + ": every tuning draw failed");
  HyperParams best = result.best;
  if (search) *search = std::move(result);
  return best;
}

Json to_json(const Standardizer& s) {
  Json xm = Json::array(), xs = Json::array();
  for (std::size_t t = 0; t < s.x_mean.size(); ++t) {
    xm.push_back(std::vector<double>(s.x_mean[t].data(), s.x_mean[t].data() + s.x_mean[t].size()));
    xs.push_back(std::vector<double>(s.x_scale[t].data(), s.x_scale[t].data() + s.x_scale[t].size()));
  }
  return Json{{"x_mean", xm},
              {"x_scale", xs},
              {"y_mean", std::vector<double>(s.y_mean.data(), s.y_mean.data() + s.y_mean.size())},
              {"y_scale", std::vector<double>(s.y_scale.data(), s.y_scale.data() + s.y_scale.size())},
              {"x_constant", s.x_constant},
              {"y_constant", s.y_constant}};
}

Standardizer standardizer_from_json(const Json& j) {
  auto vec = [](const Json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  Standardizer s;
  for (const auto& a : j.at("x_mean")) s.x_mean.push_back(vec(a));
  for (const auto& a : j.at("x_scale")) s.x_scale.push_back(vec(a));
  s.y_mean = vec(j.at("y_mean"));
  s.y_scale = vec(j.at("y_scale"));
  s.x_constant = j.at("x_constant").get<std::vector<std::vector<bool>>>();
  s.y_constant = j.at("y_constant").get<std::vector<bool>>();
  if (s.x_mean.size() != s.x_scale.size()) throw InvalidInput("standardizer: inconsistent document");
  return s;
}

Evaluation evaluate_model(const std::string& name, const TimeSeriesDataset& train_raw,
                          const TimeSeriesDataset& test, const ExperimentConfig& cfg, std::uint64_t seed) {
  Evaluation ev;
  ResultRecord& rec = ev.record;
  rec.model = name;
  rec.m = train_raw.size();
  rec.horizon = train_raw.horizon();
  rec.r2 = kNaN;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TimeSeriesDataset tr = train_raw;
    tr.latents.reset();
    Matrix x1 = test.x.front();
    Standardizer st;
    if (cfg.standardize) {
      st = Standardizer::fit(tr);
      tr = st.apply(tr);
      x1 = st.apply_x(0, x1);
    }
    SearchResult search;
    rec.params = choose_params(name, tr, cfg.models, derive_seed(seed, 0), &search);
    if (!search.table.empty()) ev.search = std::move(search);
    const FittedModel f = fit_model(name, tr, rec.params, cfg.models, derive_seed(seed, 1));
    Matrix pred = f.predict(x1);
    if (cfg.standardize) pred = st.invert_y(pred);
    rec.r2 = r2(test.y, pred);
    ev.prediction = std::move(pred);
    if (cfg.svcca && f.represent && test.latents) {
      const SvccaResult s = svcca(f.represent(x1), test.latents->front());
      rec.svcca = s.mean;
      rec.svcca_underdetermined = s.underdetermined;
    }
    if (!std::isfinite(rec.r2)) {
      rec.failed = true;
      rec.error = "non-finite R2";
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.r2 = kNaN;
  }
  rec.wall_seconds = seconds_since(t0);
  return ev;
}

Json fit_document(const std::string& name, const TimeSeriesDataset& train_raw, const ExperimentConfig& cfg,
                  std::uint64_t seed, SearchResult* search) {
  TimeSeriesDataset tr = train_raw;
  tr.latents.reset();
  Standardizer st;
  if (cfg.standardize) {
    st = Standardizer::fit(tr);
    tr = st.apply(tr);
  }
  ModelSettings settings = cfg.models;
  if (cfg.params) settings.fixed[name] = *cfg.params;
  const HyperParams params = choose_params(name, tr, settings, derive_seed(seed, 0), search);
  const FittedModel f = fit_model(name, tr, params, settings, derive_seed(seed, 1));
  Json doc{{"model_name", name}, {"params", params}, {"model", f.document}};
  doc["standardizer"] = cfg.standardize ? to_json(st) : Json(nullptr);
  return doc;
}

Matrix predict_document(const Json& doc, const Matrix& x1) {
  const Json& model = doc.at("model");
  const bool standardized = doc.contains("standardizer") && !doc.at("standardizer").is_null();
  Standardizer st;
  Matrix x = x1;
  if (standardized) {
    st = standardizer_from_json(doc.at("standardizer"));
    x = st.apply_x(0, x);
  }
  Matrix pred;
  const std::string type = model_type(model);
  if (type == "linear") pred = linear_predictor_from_json(model).predict(x);
  else if (type == "kernel") pred = kernel_predictor_from_json(model).predict(x);
  else if (type == "rep") pred = rep_model_from_json(model).predict(x);
  else throw InvalidInput("unknown model type '" + type + "'");
  return standardized ? st.invert_y(pred) : pred;
}

// ---------------------------------------------------------------- studies

namespace {

struct TaskData {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
};

TimeSeriesDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

LatentSystem fixed_system(const ExperimentConfig& cfg) {
  const DgpConfig& g = *cfg.dgp;
  return sample_system(g.d, g.q, g.horizon, g.spectral_radius, derive_seed(cfg.seed, {0x5157ULL}));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs, const ProgressLog& log) {
  cfg.validate();
  if (!cfg.dgp && cfg.dataset.empty()) throw InvalidConfig("config needs either dgp or dataset");
  if (cfg.roster.empty()) throw InvalidConfig("empty roster");

  std::optional<TimeSeriesDataset> pool;
  std::optional<LatentSystem> sys;
  if (cfg.dgp) {
    if (!cfg.dgp->resample_system) sys = fixed_system(cfg);
  } else {
    pool = load_dataset(cfg.dataset);
  }
  std::vector<int> sizes = cfg.sample_sizes;
  if (sizes.empty()) {
    if (!pool) throw InvalidConfig("sample_sizes must be given for synthetic data");
    const int n_test = std::max(1, static_cast<int>(std::lround(cfg.test_fraction * pool->size())));
    sizes.push_back(pool->size() - n_test);
  }

  const int reps = cfg.repetitions;
  const int n_tasks = static_cast<int>(sizes.size()) * reps;
  std::vector<std::vector<ResultRecord>> per_task(n_tasks);

  parallel_tasks(n_tasks, jobs, [&](int task) {
    const int m = sizes[task / reps];
    const int rep = task % reps;
    const std::uint64_t rep_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(rep)});
    const auto t0 = std::chrono::steady_clock::now();
    TaskData d;
    std::string data_error;
    try {
      if (cfg.dgp) {
        const LatentSystem s = sys ? *sys
                                   : sample_system(cfg.dgp->d, cfg.dgp->q, cfg.dgp->horizon,
                                                   cfg.dgp->spectral_radius, derive_seed(rep_seed, 0));
        d.train = generate(s, cfg.dgp->observation, m, derive_seed(rep_seed, 1));
        d.test = generate(s, cfg.dgp->observation, cfg.test_size, derive_seed(rep_seed, 2));
      } else {
        const int n = pool->size();
        const int n_test = std::max(1, static_cast<int>(std::lround(cfg.test_fraction * n)));
        if (m > n - n_test)
          throw InvalidConfig("sample size " + std::to_string(m) + " exceeds the " + std::to_string(n - n_test) +
                              " rows left after the test split");
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(rep_seed, 1));
        std::shuffle(perm.begin(), perm.end(), rng);
        d.test = pool->subset(std::span<const int>(perm.data(), n_test));
        d.train = pool->subset(std::span<const int>(perm.data() + n_test, m));
      }
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (const auto& name : cfg.roster) {
      if (!data_error.empty()) {
        ResultRecord rec;
        rec.model = name;
        rec.m = m;
        rec.horizon = cfg.dgp ? cfg.dgp->horizon : (pool ? pool->horizon() : 0);
        rec.repetition = rep;
        rec.r2 = kNaN;
        rec.failed = true;
        rec.error = data_error;
        per_task[task].push_back(rec);
        continue;
      }
      Evaluation ev = evaluate_model(name, d.train, d.test, cfg, model_seed(rep_seed, name));
      ev.record.repetition = rep;
      per_task[task].push_back(std::move(ev.record));
    }
    std::ostringstream msg;
    msg << "m=" << m << " repetition=" << rep << " done in " << seconds_since(t0) << " s";
    emit(log, msg.str());
  });

  ExperimentResult out;
  for (auto& v : per_task)
    for (auto& r : v) out.records.push_back(std::move(r));
  return out;
}

BiasVarianceResult bias_variance_study(const ExperimentConfig& cfg, int jobs, const ProgressLog& log) {
  cfg.validate();
  if (!cfg.dgp) throw Unsupported("bias/variance needs a synthetic dgp (true conditional mean)");
  if (cfg.repetitions < 2) throw InvalidConfig("bias/variance needs at least two repetitions");
  const LatentSystem sys = fixed_system(cfg);
  const int reps = cfg.repetitions;
  const int n_models = static_cast<int>(cfg.roster.size());

  BiasVarianceResult out;
  for (int m : cfg.sample_sizes) {
    const std::uint64_t m_seed = derive_seed(cfg.seed, {0xb1a5ULL, static_cast<std::uint64_t>(m)});
    const TimeSeriesDataset test = generate(sys, cfg.dgp->observation, cfg.test_size, derive_seed(m_seed, 0));
    const Matrix truth = true_conditional_mean(sys, test);
    std::vector<std::vector<Evaluation>> evals(reps);
    parallel_tasks(reps, jobs, [&](int rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t rep_seed = derive_seed(m_seed, {1, static_cast<std::uint64_t>(rep)});
      const TimeSeriesDataset train = generate(sys, cfg.dgp->observation, m, derive_seed(rep_seed, 1));
      for (const auto& name : cfg.roster) {
        evals[rep].push_back(evaluate_model(name, train, test, cfg, model_seed(rep_seed, name)));
        evals[rep].back().record.repetition = rep;
      }
      std::ostringstream msg;
      msg << "bias-variance m=" << m << " repetition=" << rep << " done in " << seconds_since(t0) << " s";
      emit(log, msg.str());
    });
    for (int i = 0; i < n_models; ++i) {
      std::vector<Matrix> preds;
      std::vector<double> r2s;
      for (int rep = 0; rep < reps; ++rep) {
        const Evaluation& ev = evals[rep][i];
        if (ev.record.failed) continue;
        preds.push_back(ev.prediction);
        r2s.push_back(ev.record.r2);
      }
      BiasVarianceRow row;
      row.model = cfg.roster[i];
      row.m = m;
      row.horizon = sys.horizon;
      row.systems = 1;
      row.repetitions = static_cast<int>(preds.size());
      row.n_test_points = cfg.test_size;
      row.squared_bias_se = kNaN;
      if (preds.size() >= 2) {
        const BiasVarianceReport rep = bias_variance(std::span<const Matrix>(preds), truth);
        row.squared_bias = rep.mean_squared_bias();
        row.variance = rep.mean_variance();
        row.variance_se = rep.variance_standard_error();
      } else {
        row.squared_bias = row.variance = row.variance_se = kNaN;
      }
      row.mean_r2 = mean_of(r2s);
      out.rows.push_back(row);
    }
    for (auto& v : evals)
      for (auto& ev : v) out.records.push_back(std::move(ev.record));
  }
  return out;
}

BiasCompoundingResult bias_compounding_study(const BiasCompoundingConfig& cfg, int jobs, const ProgressLog& log) {
  cfg.validate();
  const int n_models = static_cast<int>(cfg.roster.size());
  const int n_h = static_cast<int>(cfg.horizons.size());
  const int n_tasks = n_h * cfg.systems;
  std::vector<std::vector<SystemBiasVariance>> per_task(n_tasks);
  ModelSettings settings;

  parallel_tasks(n_tasks, jobs, [&](int task) {
    const int T = cfg.horizons[task / cfg.systems];
    const int s = task % cfg.systems;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t sys_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(s)});
    const LatentSystem sys = sample_system(cfg.d, cfg.q, T, cfg.spectral_radius, derive_seed(sys_seed, 0));
    const TimeSeriesDataset test = generate(sys, cfg.observation, cfg.test_size, derive_seed(sys_seed, 1));
    const Matrix truth = true_conditional_mean(sys, test);
    std::vector<std::vector<Matrix>> preds(n_models);
    std::vector<std::vector<double>> r2s(n_models);
    for (int r = 0; r < cfg.repetitions; ++r) {
      const std::uint64_t rep_seed = derive_seed(sys_seed, {2, static_cast<std::uint64_t>(r)});
      TimeSeriesDataset train = generate(sys, cfg.observation, cfg.m, derive_seed(rep_seed, 0));
      train.latents.reset();
      Matrix x1 = test.x.front();
      Standardizer st;
      if (cfg.standardize) {
        st = Standardizer::fit(train);
        train = st.apply(train);
        x1 = st.apply_x(0, x1);
      }
      for (int i = 0; i < n_models; ++i) {
        const std::string& name = cfg.roster[i];
        const FittedModel f =
            fit_model(name, train, default_params(name, cfg.m), settings, model_seed(rep_seed, name));
        Matrix p = f.predict(x1);
        if (cfg.standardize) p = st.invert_y(p);
        r2s[i].push_back(r2(test.y, p));
        preds[i].push_back(std::move(p));
      }
    }
    for (int i = 0; i < n_models; ++i) {
      const BiasVarianceReport rep = bias_variance(std::span<const Matrix>(preds[i]), truth);
      per_task[task].push_back({T, s, cfg.roster[i], rep.mean_squared_bias(), rep.mean_variance(), mean_of(r2s[i])});
    }
    std::ostringstream msg;
    msg << "bias-compounding T=" << T << " system=" << s << " done in " << seconds_since(t0) << " s";
    emit(log, msg.str());
  });

  BiasCompoundingResult out;
  for (auto& v : per_task)
    for (auto& d : v) out.details.push_back(std::move(d));
  for (int h = 0; h < n_h; ++h) {
    for (int i = 0; i < n_models; ++i) {
      std::vector<double> bias, var, r2v;
      for (const auto& d : out.details)
        if (d.horizon == cfg.horizons[h] && d.model == cfg.roster[i]) {
          bias.push_back(d.squared_bias);
          var.push_back(d.variance);
          r2v.push_back(d.r2);
        }
      BiasVarianceRow row;
      row.model = cfg.roster[i];
      row.m = cfg.m;
      row.horizon = cfg.horizons[h];
      row.systems = cfg.systems;
      row.repetitions = cfg.repetitions;
      row.n_test_points = cfg.test_size;
      row.squared_bias = mean_of(bias);
      row.squared_bias_se = standard_error(bias);
      row.variance = mean_of(var);
      row.variance_se = standard_error(var);
      row.mean_r2 = mean_of(r2v);
      out.rows.push_back(row);
    }
  }
  return out;
}

PhaseTransitionResult phase_transition_sweep(const PhaseTransitionConfig& cfg, int jobs, const ProgressLog& log) {
  cfg.validate();
  const int n_dims = static_cast<int>(cfg.dims.size());
  const int n_tasks = n_dims * cfg.systems;
  std::vector<PhaseTransitionSystem> systems(n_tasks);

  parallel_tasks(n_tasks, jobs, [&](int task) {
    const int d = cfg.dims[task / cfg.systems];
    const int s = task % cfg.systems;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t sys_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(s)});
    const LatentSystem sys = sample_system(d, cfg.q, cfg.horizon, cfg.spectral_radius, derive_seed(sys_seed, 0));
    const TimeSeriesDataset test = simulate(sys, cfg.test_size, derive_seed(sys_seed, 1));
    std::vector<Matrix> p_ols, p_lupts;
    std::vector<double> r_ols, r_lupts;
    for (int r = 0; r < cfg.repetitions; ++r) {
      TimeSeriesDataset train = simulate(sys, cfg.m, derive_seed(sys_seed, {2, static_cast<std::uint64_t>(r)}));
      train.latents.reset();
      Matrix x1 = test.x.front();
      Standardizer st;
      if (cfg.standardize) {
        st = Standardizer::fit(train);
        train = st.apply(train);
        x1 = st.apply_x(0, x1);
      }
      const FeatureMap id = FeatureMap::identity(d);
      Matrix a = fit_classical(train, id).predict(x1);
      Matrix b = fit_lupts(train, id).predict(x1);
      if (cfg.standardize) {
        a = st.invert_y(a);
        b = st.invert_y(b);
      }
      r_ols.push_back(r2(test.y, a));
      r_lupts.push_back(r2(test.y, b));
      p_ols.push_back(std::move(a));
      p_lupts.push_back(std::move(b));
    }
    PhaseTransitionSystem& out = systems[task];
    out.d_hat = d;
    out.system = s;
    out.r2_ols = mean_of(r_ols);
    out.r2_lupts = mean_of(r_lupts);
    out.variance_ols = out.variance_lupts = kNaN;
    if (cfg.repetitions >= 2) {
      const Matrix truth = true_conditional_mean(sys, test);
      out.variance_ols = bias_variance(std::span<const Matrix>(p_ols), truth).mean_variance();
      out.variance_lupts = bias_variance(std::span<const Matrix>(p_lupts), truth).mean_variance();
    }
    std::ostringstream msg;
    msg << "phase-transition d=" << d << " system=" << s << " done in " << seconds_since(t0) << " s";
    emit(log, msg.str());
  });

  PhaseTransitionResult out;
  out.systems = systems;
  for (int i = 0; i < n_dims; ++i) {
    PhaseTransitionRow row;
    row.d_hat = cfg.dims[i];
    row.m = cfg.m;
    row.systems = cfg.systems;
    std::vector<double> ro, rl, vo, vl, vdiff;
    for (int s = 0; s < cfg.systems; ++s) {
      const auto& x = systems[i * cfg.systems + s];
      ro.push_back(x.r2_ols);
      rl.push_back(x.r2_lupts);
      const double g = x.r2_lupts - x.r2_ols;
      row.max_abs_gap = std::max(row.max_abs_gap, std::abs(g));
      if (g > 0.0) ++row.wins;
      if (g != 0.0) ++row.decided;
      vo.push_back(x.variance_ols);
      vl.push_back(x.variance_lupts);
      vdiff.push_back(x.variance_ols - x.variance_lupts);
    }
    row.mean_r2_ols = mean_of(ro);
    row.mean_r2_lupts = mean_of(rl);
    row.gap = row.mean_r2_lupts - row.mean_r2_ols;
    row.sign_test_p = sign_test_pvalue(row.wins, row.decided);
    row.variance_ols = mean_of(vo);
    row.variance_lupts = mean_of(vl);
    row.variance_gap_se = standard_error(vdiff);
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------- output

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  std::vector<std::pair<std::string, int>> keys;
  for (const auto& r : records) {
    const std::pair<std::string, int> key{r.model, r.m};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [model, m] : keys) {
    SummaryRow row;
    row.model = model;
    row.m = m;
    std::vector<double> vals, sv;
    for (const auto& r : records) {
      if (r.model != model || r.m != m) continue;
      if (r.failed) {
        ++row.n_failed;
        continue;
      }
      vals.push_back(r.r2);
      if (r.svcca) sv.push_back(*r.svcca);
    }
    row.n = static_cast<int>(vals.size());
    row.mean_r2 = mean_of(vals);
    row.std_r2 = vals.size() >= 2 ? standard_error(vals) * std::sqrt(static_cast<double>(vals.size())) : kNaN;
    row.mean_svcca = mean_of(sv);
    rows.push_back(row);
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << "model,m,T,repetition,r2,failed,params,svcca,error\n";
  for (const auto& r : records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.model << ',' << r.m << ',' << r.horizon << ',' << r.repetition << ',' << format_double(r.r2) << ','
        << (r.failed ? 1 : 0) << ',' << format_params(r.params) << ','
        << (r.svcca ? format_double(*r.svcca) : std::string()) << ',' << err << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "model,m,n,n_failed,mean_r2,std_r2,mean_svcca\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.m << ',' << r.n << ',' << r.n_failed << ',' << format_double(r.mean_r2) << ','
        << format_double(r.std_r2) << ',' << format_double(r.mean_svcca) << '\n';
}

void write_timing_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << "model,m,T,repetition,wall_seconds\n";
  for (const auto& r : records)
    out << r.model << ',' << r.m << ',' << r.horizon << ',' << r.repetition << ',' << format_double(r.wall_seconds)
        << '\n';
}

void write_bias_variance_csv(std::ostream& out, const std::vector<BiasVarianceRow>& rows) {
  out << "model,m,T,systems,repetitions,n_test_points,squared_bias,squared_bias_se,variance,variance_se,mean_r2\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.m << ',' << r.horizon << ',' << r.systems << ',' << r.repetitions << ','
        << r.n_test_points << ',' << format_double(r.squared_bias) << ',' << format_double(r.squared_bias_se) << ','
        << format_double(r.variance) << ',' << format_double(r.variance_se) << ',' << format_double(r.mean_r2)
        << '\n';
}

void write_phase_transition_csv(std::ostream& out, const std::vector<PhaseTransitionRow>& rows) {
  out << "d_hat,m,systems,mean_r2_ols,mean_r2_lupts,gap,max_abs_gap,wins,decided,sign_test_p,variance_ols,"
         "variance_lupts,variance_gap_se\n";
  for (const auto& r : rows)
    out << r.d_hat << ',' << r.m << ',' << r.systems << ',' << format_double(r.mean_r2_ols) << ','
        << format_double(r.mean_r2_lupts) << ',' << format_double(r.gap) << ',' << format_double(r.max_abs_gap)
        << ',' << r.wins << ',' << r.decided << ',' << format_double(r.sign_test_p) << ','
        << format_double(r.variance_ols) << ',' << format_double(r.variance_lupts) << ','
        << format_double(r.variance_gap_se) << '\n';
}

void write_svcca_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << "model,m,T,repetition,r2,svcca,underdetermined\n";
  for (const auto& r : records) {
    if (!r.svcca) continue;
    out << r.model << ',' << r.m << ',' << r.horizon << ',' << r.repetition << ',' << format_double(r.r2) << ','
        << format_double(*r.svcca) << ',' << (r.svcca_underdetermined ? 1 : 0) << '\n';
  }
}

}  // namespace lupts
