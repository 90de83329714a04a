#include "recfair/misob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recfair/parallel.hpp"
#include "recfair/rng.hpp"

namespace recfair {

void MisobConfig::validate() const {
  if (C < 0.0) throw std::invalid_argument("misob config: C must be >= 0");
  if (warmup_epochs < 0 || rounds < 0)
    throw std::invalid_argument("misob config: epochs and rounds must be >= 0");
  if (round_learning_rate < 0.0 || round_batch_size < 0)
    throw std::invalid_argument("misob config: round overrides must be >= 0");
  train.validate();
}

BurdenLedger compute_burdens(const Model& m, const Matrix& X, const Vector& y,
                             const RecourseSpec& recourse, const std::vector<bool>& mask,
                             int round) {
  const Index n = X.rows();
  if (y.size() != n) throw std::invalid_argument("compute_burdens: X and y misaligned");

  BurdenLedger ledger;
  ledger.burdens = Vector::Zero(n);
  ledger.round = round;

  const Eigen::VectorXi preds = predict(m, X);
  std::vector<std::uint8_t> is_burden_row(static_cast<std::size_t>(n), 0);
  std::vector<std::uint8_t> failed(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    if (y[i] == 1.0 && preds[i] == 0) is_burden_row[static_cast<std::size_t>(i)] = 1;
  }

  parallel_for(n, [&](Index i) {
    if (!is_burden_row[static_cast<std::size_t>(i)]) return;
    const RecourseResult r =
        run_recourse(m, X.row(i).transpose(), recourse, mask, static_cast<seed_t>(i));
    ledger.burdens[i] = r.cost;
    if (!r.success) failed[static_cast<std::size_t>(i)] = 1;
  });

  // Failed rows take the configured penalty relative to this batch.
  double max_success = 0.0;
  bool any_success = false;
  for (Index i = 0; i < n; ++i) {
    if (is_burden_row[static_cast<std::size_t>(i)] && !failed[static_cast<std::size_t>(i)]) {
      max_success = std::max(max_success, ledger.burdens[i]);
      any_success = true;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!failed[static_cast<std::size_t>(i)]) continue;
    ++ledger.failures;
    switch (recourse.on_failure) {
      case FailurePolicy::MaxObserved:
        ledger.burdens[i] =
            any_success ? max_success : 100.0 * std::sqrt(static_cast<double>(X.cols()));
        break;
      case FailurePolicy::BoxDiameter:
        ledger.burdens[i] = 100.0 * std::sqrt(static_cast<double>(X.cols()));
        break;
      case FailurePolicy::Zero:
        ledger.burdens[i] = 0.0;
        break;
    }
  }

  ledger.total = ledger.burdens.sum();
  return ledger;
}

Vector phi_weights(const BurdenLedger& ledger, double C, Index n) {
  if (ledger.burdens.size() != n)
    throw std::invalid_argument("phi_weights: ledger length does not match N");
  if (ledger.total > 0.0) {
    return (1.0 + C * static_cast<double>(n) * ledger.burdens.array() / ledger.total).matrix();
  }
  return Vector::Ones(n);
}

MisobOutcome misob_train(const Matrix& X, const Vector& y, const ModelSpec& spec,
                         const MisobConfig& cfg, const std::vector<bool>& mask) {
  cfg.validate();
  const Index n = X.rows();

  Model model = init_model(spec, static_cast<int>(X.cols()), cfg.train.seed);

  // One optimizer state spans the warm-up and every round: restarting the
  // moment accumulators per round turns each round's first steps into
  // full-size updates on the reweighted objective, which destabilizes the
  // procedure at small dataset sizes.
  AdamState optimizer;
  TrainConfig warmup_cfg = cfg.train;
  warmup_cfg.epochs = cfg.warmup_epochs;
  model = train_weighted(model, X, y, Vector::Ones(n), warmup_cfg, nullptr, &optimizer);

  MisobOutcome out;
  for (int t = 1; t <= cfg.rounds; ++t) {
    TrainConfig round_cfg = cfg.train;
    round_cfg.epochs = 1;
    if (cfg.round_learning_rate > 0.0) round_cfg.learning_rate = cfg.round_learning_rate;
    if (cfg.round_batch_size > 0) round_cfg.batch_size = cfg.round_batch_size;
    round_cfg.seed = derive_seed(cfg.train.seed, static_cast<seed_t>(t));

    MisobRound log;
    log.round = t;

    if (!cfg.per_batch_burdens) {
      RecourseSpec burden_recourse = cfg.recourse;
      burden_recourse.seed = derive_seed(cfg.recourse.seed, static_cast<seed_t>(t));
      const BurdenLedger ledger = compute_burdens(model, X, y, burden_recourse, mask, t);
      const Vector weights = phi_weights(ledger, cfg.C, n);

      TrainStats stats;
      model = train_weighted(model, X, y, weights, round_cfg, &stats, &optimizer);
      log.total_burden = ledger.total;
      log.failures = ledger.failures;
      log.mean_weight = weights.mean();
      log.train_loss = stats.final_epoch_loss;
    } else {
      // Footnote-style batching: burdens and weights are recomputed against
      // the current model for each minibatch, with N the batch size.
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
      Rng shuffle_rng(derive_seed(round_cfg.seed, 0));
      shuffle(order, shuffle_rng);

      double weight_sum = 0.0, loss_sum = 0.0;
      Index batch_index = 0;
      for (Index start = 0; start < n; start += round_cfg.batch_size, ++batch_index) {
        const Index bsz = std::min<Index>(round_cfg.batch_size, n - start);
        Matrix Xb(bsz, X.cols());
        Vector yb(bsz);
        for (Index i = 0; i < bsz; ++i) {
          const Index r = order[static_cast<std::size_t>(start + i)];
          Xb.row(i) = X.row(r);
          yb[i] = y[r];
        }

        RecourseSpec burden_recourse = cfg.recourse;
        burden_recourse.seed = derive_seed(derive_seed(cfg.recourse.seed, static_cast<seed_t>(t)),
                                           static_cast<seed_t>(batch_index));
        const BurdenLedger ledger = compute_burdens(model, Xb, yb, burden_recourse, mask, t);
        const Vector weights = phi_weights(ledger, cfg.C, bsz);

        TrainConfig step_cfg = round_cfg;
        step_cfg.batch_size = static_cast<int>(bsz);
        step_cfg.seed = derive_seed(round_cfg.seed, static_cast<seed_t>(batch_index + 1));
        TrainStats stats;
        model = train_weighted(model, Xb, yb, weights, step_cfg, &stats, &optimizer);

        log.total_burden += ledger.total;
        log.failures += ledger.failures;
        weight_sum += weights.sum();
        loss_sum += stats.final_epoch_loss * static_cast<double>(bsz);
      }
      log.mean_weight = weight_sum / static_cast<double>(n);
      log.train_loss = loss_sum / static_cast<double>(n);
    }
    out.rounds.push_back(log);
  }

  out.model = std::move(model);
  return out;
}

}  // namespace recfair
