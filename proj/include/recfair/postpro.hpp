#pragma once

#include <map>
#include <string>
#include <vector>

#include "recfair/schema.hpp"
#include "recfair/types.hpp"

namespace recfair {

// Group-dependent randomized decision flipping that equalizes TPR across
// sensitive groups. Unlike the burden-reweighted trainer, this baseline
// requires group membership at both fit and apply time.
struct GroupFlip {
  double p1 = 1.0;  // P(output 1 | base prediction 1)
  double p0 = 0.0;  // P(output 1 | base prediction 0)
  double base_tpr = 0.0;
};

struct FlipPolicy {
  double target_tpr = 0.0;
  std::map<std::string, GroupFlip> per_group;  // keyed by GroupKey::to_string()
};

// Closed-form (p1, p0) for one group: the expected post-flip TPR
// p1 * tpr + p0 * (1 - tpr) equals the target, staying on the accuracy-
// friendly frontier (p0 = 0 while the target is reachable by damping p1).
GroupFlip solve_flip_for_target(double tpr, double target);

// Chooses the common target TPR over a candidate grid (plus each group's own
// TPR) maximizing expected fit-set accuracy, then solves (p1, p0) per group
// in closed form so every group's expected post-flip TPR equals the target.
// Ties prefer the policy closest to identity. Throws if a group has no
// positive labels.
FlipPolicy fit_postpro(const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                       const std::vector<std::pair<GroupKey, std::vector<Index>>>& groups);

// Per-row randomized flip with counter-based randomness: deterministic per
// (seed, row) and independent of evaluation order. Throws on a row whose
// group the policy has not seen.
Eigen::VectorXi apply_postpro(const FlipPolicy& policy, const Eigen::VectorXi& preds,
                              const std::vector<std::pair<GroupKey, std::vector<Index>>>& groups,
                              seed_t seed);

std::string policy_to_json(const FlipPolicy& policy);
FlipPolicy policy_from_json(const std::string& text);

}  // namespace recfair
