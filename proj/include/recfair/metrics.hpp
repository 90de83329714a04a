#pragma once

#include <string>
#include <vector>

#include "recfair/schema.hpp"
#include "recfair/types.hpp"

namespace recfair {

// Per-group fairness quantities over the whole pipeline. `cost` is the
// acceptance-rate-weighted expected recourse cost of the group; `burden` is
// the expected cost borne by its true positives. Both are computed two ways
// (factored and plain mean) and cross-checked at runtime; the factored form
// only matches when positively predicted rows carry zero cost.
struct GroupMetrics {
  GroupKey group;
  Index n = 0;
  double cost = 0.0;
  double burden = 0.0;
  double tpr = 0.0;
  double ar = 0.0;
  double accuracy = 0.0;
  double mean_cost_given_negative = 0.0;
  double mean_cost_given_fn = 0.0;  // conditioned on label 1 and prediction 0
  bool has_negatives = false;       // cost is degenerate (0) when false
  bool has_positive_labels = false;  // burden degenerate and tpr undefined when false
};

struct MetricAggregate {
  double worst = 0.0;
  double gap = 0.0;
};

struct FairnessReport {
  double overall_accuracy = 0.0;
  double failure_rate = 0.0;
  std::vector<GroupMetrics> groups;
  MetricAggregate burden;  // worst = max
  MetricAggregate tpr;     // worst = min, over groups where tpr is defined
  MetricAggregate cost;    // worst = max
  MetricAggregate ar;      // worst = min
};

// Mean cost over the group's negatively predicted rows times (1 - AR); equal
// to the plain group mean when accepted rows cost 0. Throws std::logic_error
// if the two routes disagree beyond 1e-9, and std::invalid_argument on an
// empty group.
double group_cost(const Vector& costs, const Eigen::VectorXi& preds,
                  const std::vector<Index>& rows);

// Mean cost over the group's false negatives times (1 - TPR); equal to the
// plain mean over its label-1 rows. Groups without positive labels return 0.
double group_burden(const Vector& costs, const Eigen::VectorXi& preds,
                    const Eigen::VectorXi& labels, const std::vector<Index>& rows);

struct GroupRates {
  double tpr = 0.0;
  double ar = 0.0;
  double accuracy = 0.0;
  bool tpr_defined = false;
};

GroupRates group_rates(const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                       const std::vector<Index>& rows);

GroupMetrics compute_group_metrics(const GroupKey& key, const Vector& costs,
                                   const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                                   const std::vector<Index>& rows);

// Worst = max for cost/burden (lower is better), min for tpr/ar; gap is the
// max pairwise absolute difference (= max - min).
FairnessReport aggregate_report(std::vector<GroupMetrics> groups, double overall_accuracy,
                                double failure_rate);

std::string report_to_json(const FairnessReport& report);
FairnessReport report_from_json(const std::string& text);
void save_report(const FairnessReport& report, const std::string& path);
FairnessReport load_report(const std::string& path);

// One row per group plus an aggregate row, mirroring the experiment tables.
void save_report_csv(const FairnessReport& report, const std::string& path);

}  // namespace recfair
