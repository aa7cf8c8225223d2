#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lupts/dgp.hpp"
#include "lupts/mlp.hpp"

namespace lupts {

enum class Objective {
  srl,           // stepwise: transitions A_t plus final head beta
  crl,           // lambda-weighted outcome heads at every step + transitions
  grl,           // outcome heads at every step, weights lambda / 1-lambda
  classic,       // single head on x_1
  distillation,  // classic-shaped student with teacher soft targets
  teacher,       // MLP on the concatenation of all time steps
};

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

inline const std::vector<int> kEncoderHidden = {25, 25, 25};
inline const std::vector<int> kTeacherHidden = {100, 100, 100, 100, 100};

// Shared encoder plus linear heads. Predictions read x_1 only (teacher: all
// steps).
struct RepModel {
  Objective objective = Objective::classic;
  double lambda = 1.0;
  int horizon = 1;
  Mlp encoder;                      // teacher: the whole network
  std::vector<Matrix> transitions;  // T-1 matrices D x D (srl, crl)
  std::vector<Matrix> heads;        // srl: {beta}; crl/grl: T heads; classic/distillation: 1

  int rep_dim() const { return encoder.output_dim(); }

  // encoder(x) for a block of rows.
  Matrix represent(const Matrix& x) const;
  // srl: phi(x1) A_1 ... A_{T-1} beta; crl/grl/classic/distillation: phi(x1) theta_1.
  Matrix predict(const Matrix& x1) const;
  // Any objective; teacher concatenates the time steps.
  Matrix predict(const TimeSeriesDataset& data) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

RepModel make_rep_model(Objective objective, int k, int horizon, int q, int rep_dim, double lambda,
                        std::uint64_t seed);
RepModel make_teacher(int k, int horizon, int q, std::uint64_t seed);

// Aligned with RepModel::parameters().
struct Gradients {
  std::vector<Matrix> g;
};

// Objective value on a batch and, when grad != nullptr, its exact gradient.
// `soft_targets` (N x q) is required for distillation only.
double evaluate_objective(const RepModel& model, const TimeSeriesDataset& batch, const Matrix* soft_targets,
                          Gradients* grad);

double loss_srl(const RepModel& model, const TimeSeriesDataset& batch);
double loss_crl(const RepModel& model, const TimeSeriesDataset& batch, double lambda);
double loss_grl(const RepModel& model, const TimeSeriesDataset& batch, double lambda);
double loss_classic_rep(const RepModel& model, const TimeSeriesDataset& batch);
double loss_distillation(const RepModel& model, const TimeSeriesDataset& batch, const Matrix& soft_targets,
                         double lambda);

Gradients backward(const RepModel& model, const TimeSeriesDataset& batch, const Matrix* soft_targets = nullptr);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 30;
  int max_epochs = 1500;
  int patience = 200;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  RepModel model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Adam (0.9, 0.999, 1e-8) on shuffled minibatches; the last
// validation_fraction of a seeded shuffle is held out, the best validation
// checkpoint is restored, and training stops after `patience` epochs without
// improvement.
TrainResult train(RepModel model, const TimeSeriesDataset& data, const TrainConfig& config,
                  const Matrix* soft_targets = nullptr);

struct DistillationResult {
  TrainResult teacher;
  TrainResult student;
};

// Trains a teacher on all steps, then a classic-shaped student on x_1 with
// lambda * MSE(y) + (1 - lambda) * MSE(teacher).
DistillationResult fit_distillation(const TimeSeriesDataset& data, const TrainConfig& teacher_config,
                                    const TrainConfig& student_config, double lambda, int rep_dim,
                                    std::uint64_t seed);

// epoch,train_loss,val_loss
void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace lupts
