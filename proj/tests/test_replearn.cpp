#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "lupts/dgp.hpp"
#include "lupts/errors.hpp"
#include "lupts/metrics.hpp"
#include "lupts/replearn.hpp"

using namespace lupts;
using lupts::testing::gaussian;

namespace {

TimeSeriesDataset random_batch(int n, int k, int T, int q, std::uint64_t seed) {
  TimeSeriesDataset d;
  for (int t = 0; t < T; ++t) d.x.push_back(gaussian(n, k, seed + t));
  d.y = gaussian(n, q, seed + 100);
  return d;
}

// Scramble heads and transitions so no term is trivially zero.
void randomize_linear_parts(RepModel& m, std::uint64_t seed) {
  for (auto& a : m.transitions) a = gaussian(a.rows(), a.cols(), seed++, 0.5);
  for (auto& h : m.heads) h = gaussian(h.rows(), h.cols(), seed++, 0.5);
}

double sq(const Eigen::RowVectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i) * v(i);
  return s;
}

// Per-sample loops straight from the written-out sums.
double oracle_loss(const RepModel& m, const TimeSeriesDataset& b, const Matrix* soft = nullptr) {
  const int N = b.size(), T = m.horizon, q = b.outcomes();
  const double D = m.rep_dim();
  std::vector<Matrix> phi;
  for (int t = 0; t < T; ++t) phi.push_back(m.represent(b.x[t]));
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    auto p = [&](int t) { return Eigen::RowVectorXd(phi[t].row(i)); };
    const Eigen::RowVectorXd y = b.y.row(i);
    switch (m.objective) {
      case Objective::srl: {
        double s = 0.0;
        for (int t = 0; t + 1 < T; ++t) s += sq(p(t) * m.transitions[t] - p(t + 1)) / D;
        s += sq(p(T - 1) * m.heads[0] - y) / q;
        total += s / (N * T);
        break;
      }
      case Objective::crl:
        for (int t = 0; t < T; ++t) total += m.lambda / (N * T * q) * sq(p(t) * m.heads[t] - y);
        for (int t = 0; t + 1 < T; ++t)
          total += (1.0 - m.lambda) / (N * (T - 1) * D) * sq(p(t) * m.transitions[t] - p(t + 1));
        break;
      case Objective::grl:
        for (int t = 0; t < T; ++t) total += (t == 0 ? m.lambda : 1.0 - m.lambda) / (N * T) * sq(p(t) * m.heads[t] - y);
        break;
      case Objective::classic:
        total += sq(p(0) * m.heads[0] - y) / N;
        break;
      case Objective::distillation:
        total += m.lambda / N * sq(p(0) * m.heads[0] - y);
        total += (1.0 - m.lambda) / N * sq(p(0) * m.heads[0] - Eigen::RowVectorXd(soft->row(i)));
        break;
      default:
        break;
    }
  }
  return total;
}

double max_fd_error(RepModel model, const TimeSeriesDataset& b, const Matrix* soft, int probes, std::uint64_t seed) {
  const Gradients g = backward(model, b, soft);
  auto params = model.parameters();
  REQUIRE(g.g.size() == params.size());
  Rng rng(seed);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t which = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
    Matrix& w = *params[which];
    const Eigen::Index r = std::uniform_int_distribution<Eigen::Index>(0, w.rows() - 1)(rng);
    const Eigen::Index c = std::uniform_int_distribution<Eigen::Index>(0, w.cols() - 1)(rng);
    const double h = 1e-5;
    const double keep = w(r, c);
    w(r, c) = keep + h;
    const double up = evaluate_objective(model, b, soft, nullptr);
    w(r, c) = keep - h;
    const double down = evaluate_objective(model, b, soft, nullptr);
    w(r, c) = keep;
    const double fd = (up - down) / (2 * h);
    const double an = g.g[which](r, c);
    worst = std::max(worst, std::abs(fd - an) / (std::max(std::abs(fd), std::abs(an)) + 1e-6));
  }
  return worst;
}

}  // namespace

TEST_CASE("objective names round trip") {
  for (auto o : {Objective::srl, Objective::crl, Objective::grl, Objective::classic, Objective::distillation,
                 Objective::teacher})
    CHECK(objective_from_string(to_string(o)) == o);
  CHECK(objective_from_string("classic_rep") == Objective::classic);
  CHECK_THROWS_AS(objective_from_string("nope"), InvalidConfig);
}

TEST_CASE("model shapes") {
  const RepModel srl = make_rep_model(Objective::srl, 4, 3, 2, 5, 1.0, 1);
  CHECK(srl.encoder.widths() == std::vector<int>{4, 25, 25, 25, 5});
  CHECK(srl.transitions.size() == 2);
  CHECK(srl.heads.size() == 1);
  const RepModel crl = make_rep_model(Objective::crl, 4, 3, 2, 5, 0.5, 1);
  CHECK(crl.transitions.size() == 2);
  CHECK(crl.heads.size() == 3);
  const RepModel grl = make_rep_model(Objective::grl, 4, 3, 2, 5, 0.5, 1);
  CHECK(grl.transitions.empty());
  CHECK(grl.heads.size() == 3);
  const RepModel teacher = make_teacher(4, 3, 2, 1);
  CHECK(teacher.encoder.widths() == std::vector<int>{12, 100, 100, 100, 100, 100, 2});
  CHECK(srl.predict(gaussian(7, 4, 2)).rows() == 7);
  CHECK(srl.predict(gaussian(7, 4, 2)).cols() == 2);
  CHECK_THROWS_AS(make_rep_model(Objective::crl, 4, 3, 2, 5, 1.5, 1), InvalidConfig);
}

TEST_CASE("zero model on zero targets has zero loss and gradient") {
  for (auto o : {Objective::srl, Objective::crl, Objective::grl, Objective::classic}) {
    RepModel m = make_rep_model(o, 2, 2, 1, 2, 0.5, 3);
    for (auto* p : m.parameters()) p->setZero();
    TimeSeriesDataset b = random_batch(4, 2, 2, 1, 4);
    b.y.setZero();
    CHECK(evaluate_objective(m, b, nullptr, nullptr) == 0.0);
    for (const auto& g : backward(m, b).g) CHECK(g.norm() == 0.0);
  }
}

TEST_CASE("losses match summation oracles") {
  const TimeSeriesDataset b = random_batch(2, 3, 2, 2, 10);
  RepModel srl = make_rep_model(Objective::srl, 3, 2, 2, 2, 1.0, 11);
  randomize_linear_parts(srl, 12);
  CHECK(std::abs(loss_srl(srl, b) - oracle_loss(srl, b)) < 1e-10);

  for (double lam : {0.0, 0.3, 1.0}) {
    RepModel crl = make_rep_model(Objective::crl, 3, 2, 2, 2, lam, 13);
    randomize_linear_parts(crl, 14);
    CHECK(std::abs(loss_crl(crl, b, lam) - oracle_loss(crl, b)) < 1e-10);
  }
  RepModel grl = make_rep_model(Objective::grl, 3, 2, 2, 2, 0.3, 15);
  randomize_linear_parts(grl, 16);
  CHECK(std::abs(loss_grl(grl, b, 0.3) - oracle_loss(grl, b)) < 1e-10);

  RepModel cl = make_rep_model(Objective::classic, 3, 1, 2, 2, 1.0, 17);
  randomize_linear_parts(cl, 18);
  CHECK(std::abs(loss_classic_rep(cl, b) - oracle_loss(cl, b)) < 1e-10);

  RepModel gd = make_rep_model(Objective::distillation, 3, 1, 2, 2, 0.4, 19);
  randomize_linear_parts(gd, 20);
  const Matrix soft = gaussian(2, 2, 21);
  CHECK(std::abs(loss_distillation(gd, b, soft, 0.4) - oracle_loss(gd, b, &soft)) < 1e-10);
}

TEST_CASE("loss special cases") {
  const TimeSeriesDataset b1 = random_batch(5, 3, 1, 2, 30);
  RepModel srl = make_rep_model(Objective::srl, 3, 1, 2, 4, 1.0, 31);
  randomize_linear_parts(srl, 32);
  const Matrix r = srl.represent(b1.x[0]) * srl.heads[0] - b1.y;
  CHECK(loss_srl(srl, b1) == doctest::Approx(r.squaredNorm() / (5.0 * 2.0)).epsilon(1e-12));

  // GRL with T = 1: only the first head, weight lambda.
  RepModel grl = make_rep_model(Objective::grl, 3, 1, 2, 4, 0.3, 33);
  randomize_linear_parts(grl, 34);
  RepModel cl = make_rep_model(Objective::classic, 3, 1, 2, 4, 1.0, 33);
  cl.encoder = grl.encoder;
  cl.heads = {grl.heads[0]};
  CHECK(loss_grl(grl, b1, 0.3) == doctest::Approx(0.3 * loss_classic_rep(cl, b1)).epsilon(1e-12));

  // GRL at lambda = 0.5, T = 2: both heads at weight 0.5.
  const TimeSeriesDataset b2 = random_batch(5, 3, 2, 2, 35);
  RepModel g2 = make_rep_model(Objective::grl, 3, 2, 2, 4, 0.5, 36);
  randomize_linear_parts(g2, 37);
  double manual = 0.0;
  for (int t = 0; t < 2; ++t) manual += 0.5 * (g2.represent(b2.x[t]) * g2.heads[t] - b2.y).squaredNorm() / (5 * 2);
  CHECK(loss_grl(g2, b2, 0.5) == doctest::Approx(manual).epsilon(1e-12));

  // CRL at lambda = 1 is the multi-head outcome loss; lambda = 0 ignores y.
  RepModel crl = make_rep_model(Objective::crl, 3, 2, 2, 4, 0.5, 38);
  randomize_linear_parts(crl, 39);
  double heads = 0.0;
  for (int t = 0; t < 2; ++t) heads += (crl.represent(b2.x[t]) * crl.heads[t] - b2.y).squaredNorm();
  CHECK(loss_crl(crl, b2, 1.0) == doctest::Approx(heads / (5 * 2 * 2)).epsilon(1e-12));
  TimeSeriesDataset other = b2;
  other.y = gaussian(5, 2, 40);
  CHECK(loss_crl(crl, b2, 0.0) == loss_crl(crl, other, 0.0));

  CHECK_THROWS_AS(loss_crl(make_rep_model(Objective::crl, 3, 1, 2, 4, 0.5, 41), b1, 0.5), InvalidConfig);
  CHECK_NOTHROW(loss_crl(make_rep_model(Objective::crl, 3, 1, 2, 4, 1.0, 41), b1, 1.0));
  CHECK_THROWS_AS(loss_srl(crl, b2), InvalidConfig);
}

TEST_CASE("crl loss is affine in lambda") {
  const TimeSeriesDataset b = random_batch(6, 3, 3, 2, 50);
  RepModel crl = make_rep_model(Objective::crl, 3, 3, 2, 4, 0.5, 51);
  randomize_linear_parts(crl, 52);
  const double l0 = loss_crl(crl, b, 0.0);
  const double l1 = loss_crl(crl, b, 1.0);
  for (double lam : {0.25, 0.5, 0.8}) CHECK(loss_crl(crl, b, lam) == doctest::Approx((1 - lam) * l0 + lam * l1).epsilon(1e-12));
}

TEST_CASE("crl gradient is linear in lambda") {
  const TimeSeriesDataset b = random_batch(6, 3, 3, 2, 55);
  RepModel crl = make_rep_model(Objective::crl, 3, 3, 2, 4, 0.0, 56);
  randomize_linear_parts(crl, 57);
  const Gradients g0 = backward(crl, b);
  crl.lambda = 1.0;
  const Gradients g1 = backward(crl, b);
  crl.lambda = 0.5;
  const Gradients gh = backward(crl, b);
  for (std::size_t i = 0; i < gh.g.size(); ++i)
    CHECK((gh.g[i] - 0.5 * g0.g[i] - 0.5 * g1.g[i]).cwiseAbs().maxCoeff() < 1e-12 * (1 + gh.g[i].norm()));
}

TEST_CASE("analytic gradients match central differences") {
  const TimeSeriesDataset b = random_batch(5, 3, 3, 2, 60);
  const Matrix soft = gaussian(5, 2, 61);
  struct Case {
    Objective o;
    int T;
    double lam;
  };
  for (const Case c : {Case{Objective::srl, 3, 1.0}, Case{Objective::crl, 3, 0.4}, Case{Objective::grl, 3, 0.7},
                       Case{Objective::classic, 1, 1.0}, Case{Objective::distillation, 1, 0.6}}) {
    RepModel m = make_rep_model(c.o, 3, c.T, 2, 4, c.lam, 62);
    randomize_linear_parts(m, 63);
    CAPTURE(to_string(c.o));
    CHECK(max_fd_error(m, b, c.o == Objective::distillation ? &soft : nullptr, 50, 64) <= 1e-4);
  }
  RepModel teacher = make_teacher(3, 3, 2, 65);
  CHECK(max_fd_error(teacher, b, nullptr, 50, 66) <= 1e-4);
}

TEST_CASE("srl prediction composes the transitions") {
  RepModel m = make_rep_model(Objective::srl, 2, 3, 1, 3, 1.0, 70);
  randomize_linear_parts(m, 71);
  const Matrix x = gaussian(4, 2, 72);
  const Matrix oracle = m.represent(x) * m.transitions[0] * m.transitions[1] * m.heads[0];
  CHECK((m.predict(x) - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("crl and grl predictions ignore later heads") {
  const TimeSeriesDataset d = simulate(sample_system(3, 1, 3, 1.3, 80), 60, 81);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.learning_rate = 1e-3;
  for (auto o : {Objective::crl, Objective::grl}) {
    TrainResult r = train(make_rep_model(o, 3, 3, 1, 4, 0.5, 82), d, cfg);
    const Matrix before = r.model.predict(d.x[0]);
    for (std::size_t t = 1; t < r.model.heads.size(); ++t) r.model.heads[t].setRandom();
    for (auto& a : r.model.transitions) a.setRandom();
    CHECK((r.model.predict(d.x[0]) - before).norm() == 0.0);
  }
}

TEST_CASE("training: patience zero, determinism, checkpoint restore") {
  const TimeSeriesDataset d = simulate(sample_system(3, 1, 2, 1.3, 90), 80, 91);
  TrainConfig cfg;
  cfg.patience = 0;
  cfg.seed = 5;
  CHECK(train(make_rep_model(Objective::srl, 3, 2, 1, 4, 1.0, 92), d, cfg).log.size() == 1);

  cfg.patience = 5;
  cfg.max_epochs = 40;
  cfg.learning_rate = 3e-3;
  const TrainResult a = train(make_rep_model(Objective::crl, 3, 2, 1, 4, 0.5, 93), d, cfg);
  const TrainResult b = train(make_rep_model(Objective::crl, 3, 2, 1, 4, 0.5, 93), d, cfg);
  std::ostringstream la, lb;
  write_training_log(la, a.log);
  write_training_log(lb, b.log);
  CHECK(la.str() == lb.str());
  CHECK(la.str().rfind("epoch,train_loss,val_loss\n", 0) == 0);

  double lowest = a.log.front().val_loss;
  for (const auto& e : a.log) lowest = std::min(lowest, e.val_loss);
  CHECK(a.best_val_loss == lowest);
  CHECK(a.log[a.best_epoch - 1].val_loss == lowest);

  // Recompute the validation loss of the restored model on the same split.
  std::vector<int> perm(80);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(cfg.seed, 1));
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::vector<int> val(perm.begin() + 64, perm.end());
  CHECK(evaluate_objective(a.model, d.subset(val), nullptr, nullptr) == doctest::Approx(lowest).epsilon(1e-12));
}

TEST_CASE("training config validation") {
  const TimeSeriesDataset d = simulate(sample_system(2, 1, 2, 1.3, 95), 2, 96);
  TrainConfig cfg;
  cfg.validation_fraction = 0.9;  // both rows land in validation
  CHECK_THROWS_AS(train(make_rep_model(Objective::classic, 2, 1, 1, 2, 1.0, 1), d, cfg), InvalidConfig);
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg.validation_fraction = 0.2;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("classic representation learner fits a linear task") {
  TimeSeriesDataset d;
  d.x = {gaussian(300, 3, 100)};
  Matrix w(3, 1);
  w << 1.0, -2.0, 0.5;
  d.y = d.x[0] * w;
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.patience = 1500;
  cfg.seed = 7;
  const TrainResult r = train(make_rep_model(Objective::classic, 3, 1, 1, 5, 1.0, 101), d, cfg);
  CHECK(r2(d.y, r.model.predict(d.x[0])) >= 0.99);
}

TEST_CASE("distillation lambda extremes") {
  const TimeSeriesDataset b = random_batch(6, 3, 1, 1, 110);
  RepModel gd = make_rep_model(Objective::distillation, 3, 1, 1, 3, 1.0, 111);
  randomize_linear_parts(gd, 112);
  RepModel cl = make_rep_model(Objective::classic, 3, 1, 1, 3, 1.0, 111);
  cl.encoder = gd.encoder;
  cl.heads = gd.heads;
  const Matrix soft = gaussian(6, 1, 113);
  CHECK(loss_distillation(gd, b, soft, 1.0) == doctest::Approx(loss_classic_rep(cl, b)).epsilon(1e-14));
  gd.lambda = 1.0;
  const Gradients g1 = backward(gd, b, &soft);
  const Matrix zero = Matrix::Zero(6, 1);
  const Gradients g2 = backward(gd, b, &zero);
  for (std::size_t i = 0; i < g1.g.size(); ++i) CHECK((g1.g[i] - g2.g[i]).norm() == 0.0);

  TimeSeriesDataset noisy = b;
  noisy.y = gaussian(6, 1, 114);
  CHECK(loss_distillation(gd, b, soft, 0.0) == loss_distillation(gd, noisy, soft, 0.0));

  TrainConfig fast;
  fast.max_epochs = 3;
  CHECK_THROWS_AS(fit_distillation(simulate(sample_system(2, 1, 2, 1.3, 1), 20, 2), fast, fast, 1.5, 3, 1),
                  InvalidConfig);
}

TEST_CASE("distillation trains a teacher then a student") {
  const TimeSeriesDataset d = simulate(sample_system(3, 1, 2, 1.3, 120), 60, 121);
  TrainConfig fast;
  fast.max_epochs = 4;
  fast.learning_rate = 1e-3;
  const DistillationResult r = fit_distillation(d, fast, fast, 0.5, 4, 122);
  CHECK(r.teacher.model.objective == Objective::teacher);
  CHECK(r.student.model.objective == Objective::distillation);
  CHECK(r.student.model.predict(d.x[0]).rows() == 60);
  CHECK(r.teacher.model.predict(d).rows() == 60);
}
