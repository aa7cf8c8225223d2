// lupts: command-line front end for the experiment harness.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lupts/errors.hpp"
#include "lupts/harness.hpp"
#include "lupts/model_io.hpp"
#include "lupts/sequences.hpp"
#include "lupts/version.hpp"

namespace fs = std::filesystem;
using namespace lupts;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

// Config errors exit with 1, everything else with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string resolve(const std::string& path, const Options& opt) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(opt.config).parent_path() / p).string();
}

Json load_config_json(const Options& opt) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  try {
    return read_json_file(opt.config);
  } catch (const InvalidConfig& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const Options& opt) {
  const Json j = load_config_json(opt);
  try {
    ExperimentConfig cfg = experiment_config_from_json(j);
    if (opt.seed) {
      cfg.seed = *opt.seed;
      if (cfg.phase_transition) cfg.phase_transition->seed = *opt.seed;
      if (cfg.bias_compounding) cfg.bias_compounding->seed = *opt.seed;
    }
    cfg.dataset = resolve(cfg.dataset, opt);
    cfg.model_file = resolve(cfg.model_file, opt);
    return cfg;
  } catch (const InvalidConfig& e) {
    throw ConfigError(e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }
}

void write_manifest(const Options& opt, const std::string& command, const Json& config,
                    const std::vector<std::string>& outputs) {
  Json m{{"command", command},
         {"version", kVersion},
         {"config_schema_version", kConfigSchemaVersion},
         {"config_path", opt.config},
         {"config", config},
         {"outputs", outputs}};
  write_json_file((fs::path(opt.out) / "manifest.json").string(), m);
}

ProgressLog stderr_log() {
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

TimeSeriesDataset load_dataset(const std::string& path) {
  if (path.empty()) throw ConfigError("config needs a dataset path");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

Json system_to_json(const LatentSystem& sys) {
  Json transitions = Json::array();
  for (const auto& a : sys.transitions) transitions.push_back(matrix_to_json(a));
  return Json{{"d", sys.d},
              {"q", sys.q},
              {"horizon", sys.horizon},
              {"spectral_radius", sys.spectral_radius},
              {"transitions", transitions},
              {"outcome_map", matrix_to_json(sys.outcome_map)}};
}

int cmd_generate(const Options& opt) {
  const ExperimentConfig cfg = load_config(opt);
  if (!cfg.dgp) throw ConfigError("generate needs a dgp section");
  if (cfg.sample_sizes.empty()) throw ConfigError("generate needs sample_sizes (the first entry is used)");
  const DgpConfig& g = *cfg.dgp;
  const LatentSystem sys = sample_system(g.d, g.q, g.horizon, g.spectral_radius, derive_seed(cfg.seed, {0x5157ULL}));
  const TimeSeriesDataset train = generate(sys, g.observation, cfg.sample_sizes.front(), derive_seed(cfg.seed, 1));
  const TimeSeriesDataset test = generate(sys, g.observation, cfg.test_size, derive_seed(cfg.seed, 2));
  auto tr = open_out(fs::path(opt.out) / "train.csv");
  write_dataset_csv(tr, train);
  auto te = open_out(fs::path(opt.out) / "test.csv");
  write_dataset_csv(te, test);
  write_json_file((fs::path(opt.out) / "system.json").string(), system_to_json(sys));
  write_manifest(opt, "generate", to_json(cfg), {"train.csv", "test.csv", "system.json"});
  std::cerr << "wrote " << train.size() << " training and " << test.size() << " test series\n";
  return 0;
}

int cmd_fit(const Options& opt) {
  const ExperimentConfig cfg = load_config(opt);
  if (cfg.model.empty()) throw ConfigError("fit needs a model name");
  if (std::find(known_models().begin(), known_models().end(), cfg.model) == known_models().end())
    throw ConfigError("unknown model '" + cfg.model + "'");
  const TimeSeriesDataset data = load_dataset(cfg.dataset);
  SearchResult search;
  const Json doc = fit_document(cfg.model, data, cfg, derive_seed(cfg.seed, 3), &search);
  write_json_file((fs::path(opt.out) / "model.json").string(), doc);
  std::vector<std::string> outputs{"model.json"};
  if (!search.table.empty()) {
    auto cv = open_out(fs::path(opt.out) / "cv.csv");
    write_cv_table(cv, search);
    outputs.push_back("cv.csv");
  }
  write_manifest(opt, "fit", to_json(cfg), outputs);
  return 0;
}

int cmd_evaluate(const Options& opt) {
  const ExperimentConfig cfg = load_config(opt);
  if (cfg.model_file.empty()) throw ConfigError("evaluate needs model_file");
  const TimeSeriesDataset data = load_dataset(cfg.dataset);
  const Json doc = read_json_file(cfg.model_file);
  const Matrix pred = predict_document(doc, data.x.front());
  const double score = r2(data.y, pred);
  auto p = open_out(fs::path(opt.out) / "predictions.csv");
  for (Eigen::Index j = 0; j < pred.cols(); ++j) p << (j ? "," : "") << "pred" << j;
  p << '\n';
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) p << (j ? "," : "") << format_double(pred(i, j));
    p << '\n';
  }
  write_json_file((fs::path(opt.out) / "metrics.json").string(),
                  Json{{"r2", score}, {"n", data.size()}, {"model_name", doc.value("model_name", "")}});
  write_manifest(opt, "evaluate", to_json(cfg), {"predictions.csv", "metrics.json"});
  std::cout << "r2 " << format_double(score) << '\n';
  return 0;
}

void write_experiment_outputs(const Options& opt, const std::vector<ResultRecord>& records,
                              std::vector<std::string>& outputs, bool with_svcca) {
  auto r = open_out(fs::path(opt.out) / "results.csv");
  write_results_csv(r, records);
  auto s = open_out(fs::path(opt.out) / "summary.csv");
  write_summary_csv(s, summarize(records));
  auto t = open_out(fs::path(opt.out) / "timing.csv");
  write_timing_csv(t, records);
  outputs.insert(outputs.end(), {"results.csv", "summary.csv", "timing.csv"});
  if (with_svcca) {
    auto v = open_out(fs::path(opt.out) / "svcca.csv");
    write_svcca_csv(v, records);
    outputs.push_back("svcca.csv");
  }
}

int cmd_experiment(const Options& opt, bool force_svcca) {
  ExperimentConfig cfg = load_config(opt);
  if (force_svcca) {
    if (!cfg.dgp) throw ConfigError("svcca needs a synthetic dgp (true latents)");
    cfg.svcca = true;
  }
  const ExperimentResult res = run_experiment(cfg, opt.jobs, stderr_log());
  std::vector<std::string> outputs;
  write_experiment_outputs(opt, res.records, outputs, cfg.svcca);
  write_manifest(opt, force_svcca ? "svcca" : "experiment", to_json(cfg), outputs);
  return 0;
}

int cmd_phase_transition(const Options& opt) {
  const ExperimentConfig cfg = load_config(opt);
  PhaseTransitionConfig pt = cfg.phase_transition.value_or(PhaseTransitionConfig{});
  if (!cfg.phase_transition) pt.seed = cfg.seed;
  const PhaseTransitionResult res = phase_transition_sweep(pt, opt.jobs, stderr_log());
  auto out = open_out(fs::path(opt.out) / "phase_transition.csv");
  write_phase_transition_csv(out, res.rows);
  Json resolved = to_json(cfg);
  resolved["phase_transition"] = to_json(pt);
  write_manifest(opt, "phase-transition", resolved, {"phase_transition.csv"});
  return 0;
}

int cmd_bias_variance(const Options& opt) {
  const ExperimentConfig cfg = load_config(opt);
  std::vector<std::string> outputs{"bias_variance.csv"};
  if (cfg.bias_compounding) {
    const BiasCompoundingResult res = bias_compounding_study(*cfg.bias_compounding, opt.jobs, stderr_log());
    auto out = open_out(fs::path(opt.out) / "bias_variance.csv");
    write_bias_variance_csv(out, res.rows);
  } else {
    const BiasVarianceResult res = bias_variance_study(cfg, opt.jobs, stderr_log());
    auto out = open_out(fs::path(opt.out) / "bias_variance.csv");
    write_bias_variance_csv(out, res.rows);
    write_experiment_outputs(opt, res.records, outputs, false);
  }
  write_manifest(opt, "bias-variance", to_json(cfg), outputs);
  return 0;
}

// {"schema_version": 1, "assemble": {input, timestamp_column, outcome_column,
//   feature_columns, length, step, min_gap}}
int cmd_assemble(const Options& opt) {
  const Json j = load_config_json(opt);
  SequenceSpec spec;
  std::string input;
  try {
    if (j.value("schema_version", 0) != kConfigSchemaVersion) throw ConfigError("unsupported schema_version");
    for (const auto& item : j.items())
      if (item.key() != "schema_version" && item.key() != "assemble")
        throw ConfigError("unknown key '" + item.key() + "'");
    const Json& a = j.at("assemble");
    for (const auto& item : a.items()) {
      const auto& k = item.key();
      if (k != "input" && k != "timestamp_column" && k != "outcome_column" && k != "feature_columns" &&
          k != "length" && k != "step" && k != "min_gap")
        throw ConfigError("assemble: unknown key '" + k + "'");
    }
    input = resolve(a.at("input").get<std::string>(), opt);
    spec.timestamp_column = a.value("timestamp_column", spec.timestamp_column);
    spec.outcome_column = a.at("outcome_column").get<std::string>();
    spec.feature_columns = a.value("feature_columns", spec.feature_columns);
    spec.length = a.value("length", spec.length);
    spec.step = a.value("step", spec.step);
    spec.min_gap = a.value("min_gap", spec.min_gap);
    spec.validate();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("assemble: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw ConfigError(e.what());
  }
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open '" + input + "'");
  const AssembledSequences res = assemble_sequences(read_raw_csv(in), spec);
  if (res.empty) std::cerr << "warning: no complete sequence found\n";
  auto out = open_out(fs::path(opt.out) / "dataset.csv");
  write_dataset_csv(out, res.data);
  write_manifest(opt, "assemble", j, {"dataset.csv"});
  std::cerr << "assembled " << res.data.size() << " sequences\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning from privileged time series: estimators, studies and experiment runner.\n\n" +
               config_schema_help()};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "Sample a synthetic system and write train/test dataset CSVs"},
      {"fit", "Tune and fit one model on a dataset CSV, write model.json"},
      {"evaluate", "Score a saved model on a dataset CSV"},
      {"experiment", "Run the repetition loop over sample sizes and the roster"},
      {"phase-transition", "LuPTS vs OLS R2 gap over a feature-dimension sweep"},
      {"bias-variance", "Squared bias and variance over repeated training sets"},
      {"svcca", "Experiment with SVCCA latent recovery for representation learners"},
      {"assemble", "Cut a timestamped CSV into fixed-step sequences"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory (created if missing)");
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--jobs", opt.jobs, "Worker threads for repetitions")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  const std::string command = sub->get_name();
  if (opt.config.empty()) {
    std::cerr << "error: --config is required\n\n" << sub->help();
    return 1;
  }
  try {
    fs::create_directories(opt.out);
    if (command == "generate") return cmd_generate(opt);
    if (command == "fit") return cmd_fit(opt);
    if (command == "evaluate") return cmd_evaluate(opt);
    if (command == "experiment") return cmd_experiment(opt, false);
    if (command == "svcca") return cmd_experiment(opt, true);
    if (command == "phase-transition") return cmd_phase_transition(opt);
    if (command == "bias-variance") return cmd_bias_variance(opt);
    if (command == "assemble") return cmd_assemble(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
