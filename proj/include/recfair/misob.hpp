#pragma once

#include <vector>

#include "recfair/model.hpp"
#include "recfair/recourse.hpp"
#include "recfair/types.hpp"

namespace recfair {

// Burden-reweighted iterative training. The procedure sees only the feature
// matrix and labels; sensitive attributes are not part of its interface.
struct MisobConfig {
  double C = 0.3;
  int warmup_epochs = 3;
  int rounds = 3;     // T; one training epoch per round
  TrainConfig train;  // warm-up settings; rounds inherit unless overridden
  // Optional overrides for the weighted rounds (0 = inherit). A batch size
  // larger than the dataset gives one exact-gradient step per round.
  double round_learning_rate = 0.0;
  int round_batch_size = 0;
  // Recompute burdens per minibatch instead of once per round over the full
  // training set (weights then use the batch size as N).
  bool per_batch_burdens = false;
  RecourseSpec recourse;  // method used for burden estimation

  void validate() const;
};

// Per-row burdens b_i at one round: nonzero only for rows with label 1 that
// the current model predicts 0, where b_i is the recourse evaluation cost.
struct BurdenLedger {
  Vector burdens;
  double total = 0.0;  // B = sum of burdens
  int round = 0;
  Index failures = 0;  // recourse failures among the burden rows
};

BurdenLedger compute_burdens(const Model& m, const Matrix& X, const Vector& y,
                             const RecourseSpec& recourse, const std::vector<bool>& mask,
                             int round = 0);

// Eq-4 weights: w_i = 1 + C * N * b_i / B when B > 0, all ones when B = 0.
Vector phi_weights(const BurdenLedger& ledger, double C, Index n);

struct MisobRound {
  int round = 0;
  double total_burden = 0.0;
  Index failures = 0;
  double mean_weight = 0.0;
  double train_loss = 0.0;
};

struct MisobOutcome {
  Model model;
  std::vector<MisobRound> rounds;
};

// Warm-up training with uniform weights, then `rounds` iterations of burden
// estimation and one phi-weighted epoch each, warm-starting from the previous
// model with fresh Adam state per round.
MisobOutcome misob_train(const Matrix& X, const Vector& y, const ModelSpec& spec,
                         const MisobConfig& cfg, const std::vector<bool>& mask);

}  // namespace recfair
