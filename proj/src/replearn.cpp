#include "lupts/replearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "lupts/csv.hpp"
#include "lupts/errors.hpp"
#include "lupts/rng.hpp"

namespace lupts {

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::srl: return "srl";
    case Objective::crl: return "crl";
    case Objective::grl: return "grl";
    case Objective::classic: return "classic_rep";
    case Objective::distillation: return "distillation";
    case Objective::teacher: return "teacher";
  }
  return "unknown";
}

Objective objective_from_string(const std::string& name) {
  if (name == "srl") return Objective::srl;
  if (name == "crl") return Objective::crl;
  if (name == "grl") return Objective::grl;
  if (name == "classic_rep" || name == "classic") return Objective::classic;
  if (name == "distillation") return Objective::distillation;
  if (name == "teacher") return Objective::teacher;
  throw InvalidConfig("unknown objective '" + name + "'");
}

namespace {

Matrix glorot(int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(in, out);
  for (int j = 0; j < out; ++j)
    for (int i = 0; i < in; ++i) w(i, j) = u(rng);
  return w;
}

Matrix concat_steps(const TimeSeriesDataset& data) {
  const int T = data.horizon();
  const int k = data.width();
  Matrix out(data.size(), static_cast<Eigen::Index>(T) * k);
  for (int t = 0; t < T; ++t) out.middleCols(static_cast<Eigen::Index>(t) * k, k) = data.x[t];
  return out;
}

Matrix stack_steps(const TimeSeriesDataset& data, int steps) {
  const Eigen::Index n = data.size();
  Matrix out(n * steps, data.width());
  for (int t = 0; t < steps; ++t) out.middleRows(t * n, n) = data.x[t];
  return out;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0, 1]");
}

}  // namespace

RepModel make_rep_model(Objective objective, int k, int horizon, int q, int rep_dim, double lambda,
                        std::uint64_t seed) {
  if (objective == Objective::teacher) return make_teacher(k, horizon, q, seed);
  if (horizon < 1 || q < 1 || rep_dim < 1 || k < 1) throw InvalidConfig("rep model: dimensions must be >= 1");
  check_lambda(lambda);
  std::vector<int> widths{k};
  widths.insert(widths.end(), kEncoderHidden.begin(), kEncoderHidden.end());
  widths.push_back(rep_dim);

  RepModel m;
  m.objective = objective;
  m.lambda = lambda;
  m.horizon = horizon;
  m.encoder = Mlp(widths, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  switch (objective) {
    case Objective::srl:
      for (int t = 0; t + 1 < horizon; ++t) m.transitions.push_back(glorot(rep_dim, rep_dim, rng));
      m.heads.push_back(glorot(rep_dim, q, rng));
      break;
    case Objective::crl:
      for (int t = 0; t + 1 < horizon; ++t) m.transitions.push_back(glorot(rep_dim, rep_dim, rng));
      for (int t = 0; t < horizon; ++t) m.heads.push_back(glorot(rep_dim, q, rng));
      break;
    case Objective::grl:
      for (int t = 0; t < horizon; ++t) m.heads.push_back(glorot(rep_dim, q, rng));
      break;
    case Objective::classic:
    case Objective::distillation:
      m.heads.push_back(glorot(rep_dim, q, rng));
      break;
    case Objective::teacher:
      break;
  }
  return m;
}

RepModel make_teacher(int k, int horizon, int q, std::uint64_t seed) {
  std::vector<int> widths{k * horizon};
  widths.insert(widths.end(), kTeacherHidden.begin(), kTeacherHidden.end());
  widths.push_back(q);
  RepModel m;
  m.objective = Objective::teacher;
  m.horizon = horizon;
  m.encoder = Mlp(widths, derive_seed(seed, 0));
  return m;
}

Matrix RepModel::represent(const Matrix& x) const { return encoder.forward(x); }

Matrix RepModel::predict(const Matrix& x1) const {
  if (objective == Objective::teacher) throw InvalidConfig("teacher predictions need every time step");
  const Matrix phi = encoder.forward(x1);
  if (objective == Objective::srl) {
    Matrix theta = heads.front();
    for (auto it = transitions.rbegin(); it != transitions.rend(); ++it) theta = (*it) * theta;
    return phi * theta;
  }
  return phi * heads.front();
}

Matrix RepModel::predict(const TimeSeriesDataset& data) const {
  if (objective == Objective::teacher) return encoder.forward(concat_steps(data));
  return predict(data.x.front());
}

std::vector<Matrix*> RepModel::parameters() {
  std::vector<Matrix*> out;
  for (int l = 0; l < encoder.layers(); ++l) {
    out.push_back(&encoder.weights[l]);
    out.push_back(&encoder.biases[l]);
  }
  for (auto& a : transitions) out.push_back(&a);
  for (auto& h : heads) out.push_back(&h);
  return out;
}

std::vector<const Matrix*> RepModel::parameters() const {
  std::vector<const Matrix*> out;
  for (auto* p : const_cast<RepModel*>(this)->parameters()) out.push_back(p);
  return out;
}

double evaluate_objective(const RepModel& model, const TimeSeriesDataset& batch, const Matrix* soft_targets,
                          Gradients* grad) {
  const Objective obj = model.objective;
  const int T = model.horizon;
  const Eigen::Index N = batch.size();
  const Eigen::Index q = batch.outcomes();
  const double D = model.rep_dim();
  const double lambda = model.lambda;
  if (N < 1) throw InvalidConfig("objective: empty batch");
  if (batch.horizon() < T) throw ShapeError("objective: batch has fewer time steps than the model");

  Matrix input;
  switch (obj) {
    case Objective::teacher:
      input = concat_steps(batch);
      break;
    case Objective::classic:
    case Objective::distillation:
      input = batch.x[0];
      break;
    default:
      input = stack_steps(batch, T);
      break;
  }
  if (obj == Objective::crl && T == 1 && lambda < 1.0)
    throw InvalidConfig("crl: the transition term needs T >= 2 unless lambda = 1");
  if (obj == Objective::distillation && (soft_targets == nullptr || soft_targets->rows() != N))
    throw InvalidConfig("distillation: soft targets missing or misaligned");
  check_lambda(lambda);

  Mlp::Cache cache;
  const Matrix phi = model.encoder.forward(input, cache);
  auto block = [&](int t) { return phi.middleRows(t * N, N); };

  const bool want_grad = grad != nullptr;
  Matrix dphi;
  std::vector<Matrix> g_trans;
  std::vector<Matrix> g_heads;
  if (want_grad) {
    dphi = Matrix::Zero(phi.rows(), phi.cols());
    for (const auto& a : model.transitions) g_trans.push_back(Matrix::Zero(a.rows(), a.cols()));
    for (const auto& h : model.heads) g_heads.push_back(Matrix::Zero(h.rows(), h.cols()));
  }

  double loss = 0.0;
  // c * || phi_t H - target ||^2
  auto head_term = [&](int t, int h, const Matrix& target, double c) {
    if (c == 0.0) return;
    const Matrix r = block(t) * model.heads[h] - target;
    loss += c * r.squaredNorm();
    if (want_grad) {
      g_heads[h].noalias() += 2.0 * c * block(t).transpose() * r;
      dphi.middleRows(t * N, N).noalias() += 2.0 * c * r * model.heads[h].transpose();
    }
  };
  // c * || phi_t A_t - phi_{t+1} ||^2
  auto transition_term = [&](int t, double c) {
    if (c == 0.0) return;
    const Matrix r = block(t) * model.transitions[t] - block(t + 1);
    loss += c * r.squaredNorm();
    if (want_grad) {
      g_trans[t].noalias() += 2.0 * c * block(t).transpose() * r;
      dphi.middleRows(t * N, N).noalias() += 2.0 * c * r * model.transitions[t].transpose();
      dphi.middleRows((t + 1) * N, N) -= 2.0 * c * r;
    }
  };

  switch (obj) {
    case Objective::srl:
      for (int t = 0; t + 1 < T; ++t) transition_term(t, 1.0 / (N * T * D));
      head_term(T - 1, 0, batch.y, 1.0 / (N * T * static_cast<double>(q)));
      break;
    case Objective::crl:
      for (int t = 0; t < T; ++t) head_term(t, t, batch.y, lambda / (N * T * static_cast<double>(q)));
      for (int t = 0; t + 1 < T; ++t) transition_term(t, (1.0 - lambda) / (N * (T - 1) * D));
      break;
    case Objective::grl:
      for (int t = 0; t < T; ++t) head_term(t, t, batch.y, (t == 0 ? lambda : 1.0 - lambda) / (N * T));
      break;
    case Objective::classic:
      head_term(0, 0, batch.y, 1.0 / N);
      break;
    case Objective::distillation:
      head_term(0, 0, batch.y, lambda / N);
      head_term(0, 0, *soft_targets, (1.0 - lambda) / N);
      break;
    case Objective::teacher: {
      const Matrix r = phi - batch.y;
      loss = r.squaredNorm() / N;
      if (want_grad) dphi = (2.0 / N) * r;
      break;
    }
  }

  if (want_grad) {
    const int L = model.encoder.layers();
    std::vector<Matrix> gw;
    std::vector<Matrix> gb;
    for (int l = 0; l < L; ++l) {
      gw.push_back(Matrix::Zero(model.encoder.weights[l].rows(), model.encoder.weights[l].cols()));
      gb.push_back(Matrix::Zero(1, model.encoder.biases[l].cols()));
    }
    model.encoder.backward(cache, dphi, gw, gb);
    grad->g.clear();
    for (int l = 0; l < L; ++l) {
      grad->g.push_back(std::move(gw[l]));
      grad->g.push_back(std::move(gb[l]));
    }
    for (auto& a : g_trans) grad->g.push_back(std::move(a));
    for (auto& h : g_heads) grad->g.push_back(std::move(h));
  }
  return loss;
}

namespace {

template <Objective Kind>
void require_kind(const RepModel& model, const char* what) {
  if (model.objective != Kind) throw InvalidConfig(std::string(what) + ": model has objective " + to_string(model.objective));
}

}  // namespace

double loss_srl(const RepModel& model, const TimeSeriesDataset& batch) {
  require_kind<Objective::srl>(model, "loss_srl");
  return evaluate_objective(model, batch, nullptr, nullptr);
}

double loss_crl(const RepModel& model, const TimeSeriesDataset& batch, double lambda) {
  require_kind<Objective::crl>(model, "loss_crl");
  RepModel m = model;
  m.lambda = lambda;
  return evaluate_objective(m, batch, nullptr, nullptr);
}

double loss_grl(const RepModel& model, const TimeSeriesDataset& batch, double lambda) {
  require_kind<Objective::grl>(model, "loss_grl");
  RepModel m = model;
  m.lambda = lambda;
  return evaluate_objective(m, batch, nullptr, nullptr);
}

double loss_classic_rep(const RepModel& model, const TimeSeriesDataset& batch) {
  require_kind<Objective::classic>(model, "loss_classic_rep");
  return evaluate_objective(model, batch, nullptr, nullptr);
}

double loss_distillation(const RepModel& model, const TimeSeriesDataset& batch, const Matrix& soft_targets,
                         double lambda) {
  require_kind<Objective::distillation>(model, "loss_distillation");
  RepModel m = model;
  m.lambda = lambda;
  return evaluate_objective(m, batch, &soft_targets, nullptr);
}

Gradients backward(const RepModel& model, const TimeSeriesDataset& batch, const Matrix* soft_targets) {
  Gradients g;
  evaluate_objective(model, batch, soft_targets, &g);
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("train: learning_rate must be positive");
  if (batch_size < 1) throw InvalidConfig("train: batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidConfig("train: max_epochs must be >= 1");
  if (patience < 0) throw InvalidConfig("train: patience must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InvalidConfig("train: validation_fraction must lie in (0, 1)");
}

namespace {

Matrix pick_rows(const Matrix& src, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
  return out;
}

std::vector<Matrix> snapshot(const RepModel& model) {
  std::vector<Matrix> out;
  for (const auto* p : model.parameters()) out.push_back(*p);
  return out;
}

void restore(RepModel& model, const std::vector<Matrix>& saved) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

}  // namespace

TrainResult train(RepModel model, const TimeSeriesDataset& data, const TrainConfig& config,
                  const Matrix* soft_targets) {
  config.validate();
  data.validate();
  const int m = data.size();
  const int n_val = m >= 2 ? std::max(1, static_cast<int>(std::lround(m * config.validation_fraction))) : 0;
  const int n_train = m - n_val;
  if (n_train < 1) throw InvalidConfig("train: empty training split");
  if (model.objective == Objective::distillation && (soft_targets == nullptr || soft_targets->rows() != m))
    throw InvalidConfig("train: distillation needs one soft target row per series");

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  Rng split_rng(derive_seed(config.seed, 1));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const std::span<const int> train_idx(perm.data(), n_train);
  const std::span<const int> val_idx(perm.data() + n_train, n_val);

  TimeSeriesDataset base = data;
  base.latents.reset();
  const TimeSeriesDataset train_set = base.subset(train_idx);
  const TimeSeriesDataset val_set = n_val > 0 ? base.subset(val_idx) : train_set;
  Matrix soft_train, soft_val;
  if (soft_targets) {
    soft_train = pick_rows(*soft_targets, train_idx);
    soft_val = n_val > 0 ? pick_rows(*soft_targets, val_idx) : soft_train;
  }
  const Matrix* soft_train_ptr = soft_targets ? &soft_train : nullptr;
  const Matrix* soft_val_ptr = soft_targets ? &soft_val : nullptr;

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  auto params = model.parameters();
  std::vector<Matrix> first, second;
  for (auto* p : params) {
    first.push_back(Matrix::Zero(p->rows(), p->cols()));
    second.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  long step = 0;

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best = snapshot(model);
  Rng shuffle_rng(derive_seed(config.seed, 2));
  std::vector<int> order(n_train);
  int since_best = 0;
  Gradients grad;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_loss = 0.0;
    for (int start = 0; start < n_train; start += config.batch_size) {
      const int len = std::min(config.batch_size, n_train - start);
      const std::span<const int> rows(order.data() + start, len);
      const TimeSeriesDataset batch = train_set.subset(rows);
      Matrix soft_batch;
      if (soft_train_ptr) soft_batch = pick_rows(soft_train, rows);
      const double loss = evaluate_objective(model, batch, soft_train_ptr ? &soft_batch : nullptr, &grad);
      train_loss += loss * len;

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        first[i] = beta1 * first[i] + (1.0 - beta1) * grad.g[i];
        second[i] = beta2 * second[i] + (1.0 - beta2) * grad.g[i].cwiseAbs2();
        params[i]->array() -= config.learning_rate * (first[i].array() / c1) /
                              ((second[i].array() / c2).sqrt() + eps);
      }
    }
    train_loss /= n_train;
    const double val_loss = evaluate_objective(model, val_set, soft_val_ptr, nullptr);
    result.log.push_back({epoch, train_loss, val_loss});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  restore(model, best);
  result.model = std::move(model);
  return result;
}

DistillationResult fit_distillation(const TimeSeriesDataset& data, const TrainConfig& teacher_config,
                                    const TrainConfig& student_config, double lambda, int rep_dim,
                                    std::uint64_t seed) {
  check_lambda(lambda);
  DistillationResult out;
  out.teacher = train(make_teacher(data.width(), data.horizon(), data.outcomes(), derive_seed(seed, 1)), data,
                      teacher_config);
  const Matrix soft = out.teacher.model.predict(data);
  RepModel student =
      make_rep_model(Objective::distillation, data.width(), data.horizon(), data.outcomes(), rep_dim, lambda,
                     derive_seed(seed, 2));
  out.student = train(std::move(student), data, student_config, &soft);
  return out;
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : log)
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
}

}  // namespace lupts
