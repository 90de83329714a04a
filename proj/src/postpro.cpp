#include "recfair/postpro.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "recfair/rng.hpp"

namespace recfair {

namespace {

struct GroupCounts {
  Index n11 = 0;  // pred 1, label 1
  Index n10 = 0;  // pred 1, label 0
  Index n01 = 0;  // pred 0, label 1
  Index n00 = 0;  // pred 0, label 0

  Index positives() const { return n11 + n01; }
  double tpr() const { return static_cast<double>(n11) / static_cast<double>(positives()); }
};

double expected_correct(const GroupCounts& c, const GroupFlip& f) {
  return f.p1 * static_cast<double>(c.n11) + (1.0 - f.p1) * static_cast<double>(c.n10) +
         f.p0 * static_cast<double>(c.n01) + (1.0 - f.p0) * static_cast<double>(c.n00);
}

double identity_distance(const GroupFlip& f) { return (1.0 - f.p1) + f.p0; }

}  // namespace

GroupFlip solve_flip_for_target(double tpr, double target) {
  GroupFlip f;
  f.base_tpr = tpr;
  if (target <= tpr) {
    f.p1 = tpr > 0.0 ? target / tpr : 1.0;
    f.p0 = 0.0;
  } else {
    f.p1 = 1.0;
    f.p0 = tpr < 1.0 ? (target - tpr) / (1.0 - tpr) : 0.0;
  }
  f.p1 = std::clamp(f.p1, 0.0, 1.0);
  f.p0 = std::clamp(f.p0, 0.0, 1.0);
  return f;
}

FlipPolicy fit_postpro(const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                       const std::vector<std::pair<GroupKey, std::vector<Index>>>& groups) {
  if (preds.size() != labels.size()) throw std::invalid_argument("fit_postpro: vectors misaligned");
  if (groups.empty()) throw std::invalid_argument("fit_postpro: no groups");

  std::vector<GroupCounts> counts(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (Index i : groups[g].second) {
      if (i < 0 || i >= preds.size())
        throw std::invalid_argument("fit_postpro: row index out of range");
      GroupCounts& c = counts[g];
      if (preds[i] == 1) (labels[i] == 1 ? c.n11 : c.n10)++;
      else (labels[i] == 1 ? c.n01 : c.n00)++;
    }
    if (counts[g].positives() == 0)
      throw std::invalid_argument("fit_postpro: group '" + groups[g].first.to_string() +
                                  "' has no positive labels");
  }

  // Candidate targets: a fixed grid plus each group's own TPR and the
  // minimum TPR, so the natural kink points are always considered.
  std::set<double> targets;
  for (int t = 0; t <= 100; ++t) targets.insert(static_cast<double>(t) / 100.0);
  double min_tpr = 1.0;
  for (const auto& c : counts) {
    targets.insert(c.tpr());
    min_tpr = std::min(min_tpr, c.tpr());
  }
  targets.insert(min_tpr);

  double best_correct = -1.0;
  double best_identity = 0.0;
  FlipPolicy best;
  for (double target : targets) {
    double total_correct = 0.0;
    double total_identity = 0.0;
    FlipPolicy policy;
    policy.target_tpr = target;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const GroupFlip f = solve_flip_for_target(counts[g].tpr(), target);
      total_correct += expected_correct(counts[g], f);
      total_identity += identity_distance(f);
      policy.per_group[groups[g].first.to_string()] = f;
    }
    const bool better = total_correct > best_correct + 1e-12 ||
                        (total_correct > best_correct - 1e-12 && total_identity < best_identity);
    if (better) {
      best_correct = total_correct;
      best_identity = total_identity;
      best = std::move(policy);
    }
  }
  return best;
}

Eigen::VectorXi apply_postpro(const FlipPolicy& policy, const Eigen::VectorXi& preds,
                              const std::vector<std::pair<GroupKey, std::vector<Index>>>& groups,
                              seed_t seed) {
  std::vector<const GroupFlip*> row_flip(static_cast<std::size_t>(preds.size()), nullptr);
  for (const auto& [key, rows] : groups) {
    const auto it = policy.per_group.find(key.to_string());
    if (it == policy.per_group.end())
      throw std::invalid_argument("apply_postpro: group '" + key.to_string() +
                                  "' not covered by policy");
    for (Index i : rows) {
      if (i < 0 || i >= preds.size())
        throw std::invalid_argument("apply_postpro: row index out of range");
      row_flip[static_cast<std::size_t>(i)] = &it->second;
    }
  }

  Eigen::VectorXi out(preds.size());
  for (Index i = 0; i < preds.size(); ++i) {
    const GroupFlip* f = row_flip[static_cast<std::size_t>(i)];
    if (!f) throw std::invalid_argument("apply_postpro: row " + std::to_string(i) +
                                        " belongs to no group");
    const double p = preds[i] == 1 ? f->p1 : f->p0;
    out[i] = counter_uniform(seed, static_cast<std::uint64_t>(i)) < p ? 1 : 0;
  }
  return out;
}

std::string policy_to_json(const FlipPolicy& policy) {
  nlohmann::ordered_json j;
  j["target_tpr"] = policy.target_tpr;
  j["groups"] = nlohmann::ordered_json::object();
  for (const auto& [name, f] : policy.per_group) {
    j["groups"][name] = {{"p1", f.p1}, {"p0", f.p0}, {"base_tpr", f.base_tpr}};
  }
  return j.dump(2);
}

FlipPolicy policy_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FlipPolicy policy;
  policy.target_tpr = j.at("target_tpr").get<double>();
  for (const auto& [name, jf] : j.at("groups").items()) {
    GroupFlip f;
    f.p1 = jf.at("p1").get<double>();
    f.p0 = jf.at("p0").get<double>();
    f.base_tpr = jf.at("base_tpr").get<double>();
    policy.per_group[name] = f;
  }
  return policy;
}

}  // namespace recfair
