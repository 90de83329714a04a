#pragma once

#include <string>
#include <vector>

#include "recfair/dataset.hpp"
#include "recfair/types.hpp"

namespace recfair {

// Synthetic population showing how equal per-negative recourse costs can
// hide a large holistic disparity once acceptance rates differ. Predictions
// are planted (no classifier), so the effect is exact and fast.
struct ParadoxSpec {
  std::vector<Index> group_sizes = {1000, 1000};
  std::vector<double> acceptance_rates = {0.0, 0.9};
  double mean_negative_cost = 0.1;  // equal across groups
  std::vector<double> label_rates = {0.5, 0.5};
  double noise_scale = 0.01;  // stddev of the cost noise
  seed_t seed = 7;

  void validate() const;
};

struct ParadoxData {
  Dataset dataset;                 // sensitive attribute "group"
  Eigen::VectorXi planted_preds;   // realizes each group's AR exactly
  Vector planted_costs;            // 0 for accepted rows
};

ParadoxData generate_paradox(const ParadoxSpec& spec);

struct ParadoxSummary {
  struct PerGroup {
    std::string group;
    double conventional = 0.0;  // mean cost over negatively predicted rows
    double holistic = 0.0;      // acceptance-rate-weighted group cost
  };
  std::vector<PerGroup> groups;
  double conventional_gap_rel = 0.0;  // (max-min)/min of the conventional metric
  double holistic_gap_rel = 0.0;
};

ParadoxSummary summarize_paradox(const ParadoxData& data);

// Two-bar comparison data, one row per group.
void save_paradox_csv(const ParadoxSummary& summary, const std::string& path);

ParadoxSpec paradox_spec_from_json(const std::string& text);

}  // namespace recfair
