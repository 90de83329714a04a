#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recfair/dataset.hpp"
#include "recfair/metrics.hpp"
#include "recfair/misob.hpp"
#include "recfair/model.hpp"
#include "recfair/recourse.hpp"
#include "recfair/types.hpp"

namespace recfair {

enum class Strategy { None, Postpro, Misob };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ExperimentConfig {
  std::string dataset_path;
  std::string schema_path;
  std::vector<std::vector<std::string>> sensitive_sets = {{}};
  ModelSpec model;
  Strategy strategy = Strategy::None;
  double misob_c = 0.3;
  int misob_warmup_epochs = 3;
  int misob_rounds = 3;
  double misob_round_learning_rate = 0.0;  // 0 = inherit train.learning_rate
  int misob_round_batch_size = 0;          // 0 = inherit train.batch_size
  bool misob_per_batch_burdens = false;
  std::string misob_burden_method;         // "" = paired with the evaluated method
  std::vector<MethodKind> recourse_methods = {MethodKind::GrowingSpheres, MethodKind::Wachter};
  GsConfig gs;
  WtConfig wt;
  FailurePolicy on_failure = FailurePolicy::MaxObserved;
  TrainConfig train;
  int splits = 10;
  double test_fraction = 0.3;
  seed_t seed = 1;
  std::string output_dir = "out";
  bool balance = false;      // downsample the majority class before splitting
  bool flip_labels = false;  // y' = 1 - y before anything else

  void validate() const;
};

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 for a single observation
};

MeanStd mean_std(const std::vector<double>& values);

struct AggregateRow {
  std::string method;
  std::string strategy;
  std::string attrs;  // attribute set joined with '+'
  MeanStd accuracy;
  MeanStd burden_worst, burden_gap;
  MeanStd tpr_worst, tpr_gap;
  MeanStd cost_worst, cost_gap;
  MeanStd ar_worst, ar_gap;
  MeanStd failure_rate;
};

struct AggregateTable {
  std::vector<AggregateRow> rows;
};

void save_aggregate_csv(const AggregateTable& table, const std::string& path);
std::string aggregate_to_json(const AggregateTable& table);

struct SplitOutcome {
  // Reports keyed in (method, attrs) config order.
  std::vector<FairnessReport> reports;
  std::vector<MisobRound> training_log;  // empty unless strategy == misob
};

struct ExperimentResult {
  AggregateTable table;
  std::vector<SplitOutcome> splits;
};

// Runs the full protocol: per split, train the base model (with the
// strategy-specific step), generate recourse on the test split, and compute
// a fairness report per (recourse method, attribute set). Persists per-split
// reports, the config snapshot and the aggregate table under
// cfg.output_dir. A burden-reweighted model is trained once per (split,
// method) and evaluated against every attribute set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// run_experiment per C value (strategy forced to the reweighted trainer);
// emits a long-format CSV (c, method, attrs, metric, mean, std) at
// cfg.output_dir/sweep.csv. Duplicate C values are a config error.
std::vector<std::pair<double, AggregateTable>> sweep_c(const ExperimentConfig& cfg,
                                                       const std::vector<double>& c_values);

}  // namespace recfair
