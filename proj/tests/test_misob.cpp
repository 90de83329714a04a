#include <doctest.h>

#include <cmath>

#include "recfair/misob.hpp"
#include "recfair/rng.hpp"

using namespace recfair;

namespace {

ModelSpec logistic_spec() {
  ModelSpec s;
  s.kind = ModelKind::Logistic;
  s.hidden.clear();
  return s;
}

Model linear_model(const Vector& w, double b) {
  Model m = init_model(logistic_spec(), static_cast<int>(w.size()), 0);
  m.weights[0] = w.transpose();
  m.biases[0][0] = b;
  return m;
}

RecourseSpec wt_spec() {
  RecourseSpec spec;
  spec.method = MethodKind::Wachter;
  return spec;
}

// Two positive clusters and one negative cluster in 2D. The small positive
// cluster sits between the negatives and the big positive mass, so a model
// trained on plain BCE starts out misclassifying it.
void two_cluster_toy(Matrix& X, Vector& y) {
  Rng rng(77);
  const Index n_neg = 120, n_pos_far = 60, n_pos_near = 30;
  X.resize(n_neg + n_pos_far + n_pos_near, 2);
  y.resize(X.rows());
  Index r = 0;
  for (Index i = 0; i < n_neg; ++i, ++r) {
    X(r, 0) = 0.05 + 0.35 * rng.uniform();
    X(r, 1) = rng.uniform();
    y[r] = 0.0;
  }
  for (Index i = 0; i < n_pos_far; ++i, ++r) {
    X(r, 0) = 0.8 + 0.2 * rng.uniform();
    X(r, 1) = rng.uniform();
    y[r] = 1.0;
  }
  for (Index i = 0; i < n_pos_near; ++i, ++r) {
    X(r, 0) = 0.48 + 0.08 * rng.uniform();
    X(r, 1) = rng.uniform();
    y[r] = 1.0;
  }
}

}  // namespace

TEST_CASE("compute_burdens") {
  SUBCASE("perfect classifier leaves an all-zero ledger") {
    Vector w(2);
    w << 50.0, 0.0;
    const Model m = linear_model(w, -25.0);  // boundary at x0 = 0.5
    Matrix X(4, 2);
    X << 0.1, 0.5, 0.2, 0.5, 0.8, 0.5, 0.9, 0.5;
    Vector y(4);
    y << 0, 0, 1, 1;
    const BurdenLedger ledger = compute_burdens(m, X, y, wt_spec(), {});
    CHECK(ledger.total == 0.0);
    CHECK(ledger.burdens.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("a single false negative carries its recourse cost") {
    Vector w(2);
    w << 50.0, 0.0;
    const Model m = linear_model(w, -25.0);
    Matrix X(3, 2);
    X << 0.1, 0.5,   // true negative
        0.4, 0.5,    // false negative
        0.9, 0.5;    // true positive
    Vector y(3);
    y << 0, 1, 1;
    const BurdenLedger ledger = compute_burdens(m, X, y, wt_spec(), {});
    CHECK(ledger.burdens[0] == 0.0);
    CHECK(ledger.burdens[1] > 0.0);
    CHECK(ledger.burdens[2] == 0.0);
    CHECK(ledger.total == doctest::Approx(ledger.burdens[1]));
  }
  SUBCASE("label-0 rows contribute nothing regardless of prediction") {
    Vector w(2);
    w << 50.0, 0.0;
    const Model m = linear_model(w, -25.0);
    Matrix X(1, 2);
    X << 0.1, 0.5;  // predicted negative, label 0
    Vector y(1);
    y << 0;
    const BurdenLedger ledger = compute_burdens(m, X, y, wt_spec(), {});
    CHECK(ledger.total == 0.0);
  }
  SUBCASE("burden support: nonzero entries are exactly the false negatives") {
    Vector w(2);
    w << 50.0, 0.0;
    const Model m = linear_model(w, -25.0);
    Rng rng(13);
    Matrix X(50, 2);
    Vector y(50);
    for (Index i = 0; i < 50; ++i) {
      X(i, 0) = rng.uniform();
      X(i, 1) = rng.uniform();
      y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    const BurdenLedger ledger = compute_burdens(m, X, y, wt_spec(), {});
    const Eigen::VectorXi preds = predict(m, X);
    for (Index i = 0; i < 50; ++i) {
      if (ledger.burdens[i] > 0.0) {
        CHECK(y[i] == 1.0);
        CHECK(preds[i] == 0);
      }
    }
  }
}

TEST_CASE("phi_weights algebra") {
  SUBCASE("zero total burden gives all ones") {
    BurdenLedger ledger;
    ledger.burdens = Vector::Zero(5);
    ledger.total = 0.0;
    CHECK(phi_weights(ledger, 0.3, 5) == Vector::Ones(5));
  }
  SUBCASE("plugging in N=4, C=0.3, b=(2,0,0,2)") {
    BurdenLedger ledger;
    ledger.burdens.resize(4);
    ledger.burdens << 2, 0, 0, 2;
    ledger.total = 4.0;
    const Vector w = phi_weights(ledger, 0.3, 4);
    CHECK(w[0] == doctest::Approx(1.6));
    CHECK(w[1] == doctest::Approx(1.0));
    CHECK(w[2] == doctest::Approx(1.0));
    CHECK(w[3] == doctest::Approx(1.6));
    CHECK(w.sum() == doctest::Approx(5.2));  // N (1 + C)
  }
  SUBCASE("C = 0 degenerates to unweighted training") {
    BurdenLedger ledger;
    ledger.burdens.resize(3);
    ledger.burdens << 5, 1, 0;
    ledger.total = 6.0;
    CHECK(phi_weights(ledger, 0.0, 3) == Vector::Ones(3));
  }
  SUBCASE("mean weight is 1 + C and every weight is at least 1") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      const Index n = 2 + static_cast<Index>(rng.bounded(100));
      BurdenLedger ledger;
      ledger.burdens = Vector::Zero(n);
      for (Index i = 0; i < n; ++i) {
        if (rng.uniform() < 0.4) ledger.burdens[i] = 50.0 * rng.uniform();
      }
      ledger.total = ledger.burdens.sum();
      if (ledger.total <= 0.0) continue;
      const double C = 2.0 * rng.uniform();
      const Vector w = phi_weights(ledger, C, n);
      CHECK(w.minCoeff() >= 1.0);
      CHECK(std::abs(w.mean() - (1.0 + C)) < 1e-12);
    }
  }
}

TEST_CASE("misob_train") {
  Matrix X;
  Vector y;
  two_cluster_toy(X, y);

  MisobConfig cfg;
  cfg.C = 2.0;
  cfg.warmup_epochs = 30;
  cfg.rounds = 3;
  cfg.train.learning_rate = 0.05;
  cfg.train.batch_size = 64;
  cfg.train.seed = 9;
  cfg.recourse = wt_spec();

  SUBCASE("zero rounds returns the warm-up model") {
    MisobConfig zero = cfg;
    zero.rounds = 0;
    const MisobOutcome out = misob_train(X, y, logistic_spec(), zero, {});

    Model expect = init_model(logistic_spec(), 2, zero.train.seed);
    TrainConfig warm = zero.train;
    warm.epochs = zero.warmup_epochs;
    expect = train_weighted(expect, X, y, Vector::Ones(X.rows()), warm);
    CHECK(out.model.weights[0] == expect.weights[0]);
    CHECK(out.model.biases[0] == expect.biases[0]);
    CHECK(out.rounds.empty());
  }
  SUBCASE("C = 0 equals continuing uniform training with the same per-round seeds") {
    MisobConfig zero_c = cfg;
    zero_c.C = 0.0;
    const MisobOutcome out = misob_train(X, y, logistic_spec(), zero_c, {});

    Model expect = init_model(logistic_spec(), 2, cfg.train.seed);
    AdamState optimizer;
    TrainConfig warm = cfg.train;
    warm.epochs = cfg.warmup_epochs;
    expect = train_weighted(expect, X, y, Vector::Ones(X.rows()), warm, nullptr, &optimizer);
    for (int t = 1; t <= cfg.rounds; ++t) {
      TrainConfig round = cfg.train;
      round.epochs = 1;
      round.seed = derive_seed(cfg.train.seed, static_cast<seed_t>(t));
      expect = train_weighted(expect, X, y, Vector::Ones(X.rows()), round, nullptr, &optimizer);
    }
    CHECK(out.model.weights[0] == expect.weights[0]);
    CHECK(out.model.biases[0] == expect.biases[0]);
  }
  SUBCASE("the misclassified positive cluster's burden shrinks across rounds") {
    MisobConfig heavy = cfg;
    heavy.rounds = 6;
    const MisobOutcome out = misob_train(X, y, logistic_spec(), heavy, {});
    REQUIRE(out.rounds.size() == 6);
    CHECK(out.rounds.front().total_burden > 0.0);
    CHECK(out.rounds.back().total_burden < out.rounds.front().total_burden);
  }
  SUBCASE("per-batch burden recomputation is reproducible and converges too") {
    MisobConfig batched = cfg;
    batched.per_batch_burdens = true;
    batched.train.batch_size = 64;
    batched.rounds = 5;
    const MisobOutcome a = misob_train(X, y, logistic_spec(), batched, {});
    const MisobOutcome b = misob_train(X, y, logistic_spec(), batched, {});
    CHECK(a.model.weights[0] == b.model.weights[0]);
    REQUIRE(a.rounds.size() == 5);
    CHECK(a.rounds.front().total_burden > 0.0);
    CHECK(a.rounds.back().total_burden < a.rounds.front().total_burden);
    for (const auto& r : a.rounds) {
      CHECK(r.mean_weight >= 1.0);
      CHECK(r.mean_weight <= 1.0 + batched.C + 1e-9);
    }
  }
  SUBCASE("identical inputs reproduce the model bit for bit") {
    const MisobOutcome a = misob_train(X, y, logistic_spec(), cfg, {});
    const MisobOutcome b = misob_train(X, y, logistic_spec(), cfg, {});
    CHECK(a.model.weights[0] == b.model.weights[0]);
    CHECK(a.model.biases[0] == b.model.biases[0]);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t t = 0; t < a.rounds.size(); ++t)
      CHECK(a.rounds[t].total_burden == b.rounds[t].total_burden);
  }
}
