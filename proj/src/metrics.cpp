#include "recfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "recfair/csv.hpp"

namespace recfair {

namespace {

constexpr double kIdentityTol = 1e-9;

void check_rows(Index n, const std::vector<Index>& rows, const char* what) {
  if (rows.empty()) throw std::invalid_argument(std::string(what) + ": empty group");
  for (Index i : rows) {
    if (i < 0 || i >= n) throw std::invalid_argument(std::string(what) + ": row index out of range");
  }
}

}  // namespace

double group_cost(const Vector& costs, const Eigen::VectorXi& preds,
                  const std::vector<Index>& rows) {
  if (costs.size() != preds.size()) throw std::invalid_argument("group_cost: vectors misaligned");
  check_rows(costs.size(), rows, "group_cost");

  double neg_sum = 0.0, all_sum = 0.0;
  Index neg = 0;
  for (Index i : rows) {
    all_sum += costs[i];
    if (preds[i] == 0) {
      neg_sum += costs[i];
      ++neg;
    }
  }
  const auto n = static_cast<double>(rows.size());
  const double plain = all_sum / n;
  if (neg == 0) {
    // No negatively predicted members: the conditional mean is empty and the
    // group cost is 0 by convention.
    if (std::abs(plain) > kIdentityTol)
      throw std::logic_error("group_cost: accepted rows carry nonzero cost");
    return 0.0;
  }
  const double ar = (n - static_cast<double>(neg)) / n;
  const double factored = (neg_sum / static_cast<double>(neg)) * (1.0 - ar);
  if (std::abs(factored - plain) > kIdentityTol)
    throw std::logic_error("group_cost: factored and plain forms disagree; "
                           "an accepted row carries nonzero cost");
  return factored;
}

double group_burden(const Vector& costs, const Eigen::VectorXi& preds,
                    const Eigen::VectorXi& labels, const std::vector<Index>& rows) {
  if (costs.size() != preds.size() || costs.size() != labels.size())
    throw std::invalid_argument("group_burden: vectors misaligned");
  check_rows(costs.size(), rows, "group_burden");

  double fn_sum = 0.0, pos_sum = 0.0;
  Index pos = 0, fn = 0;
  for (Index i : rows) {
    if (labels[i] != 1) continue;
    ++pos;
    pos_sum += costs[i];
    if (preds[i] == 0) {
      ++fn;
      fn_sum += costs[i];
    }
  }
  if (pos == 0) return 0.0;  // degenerate: no positive labels in the group

  const double plain = pos_sum / static_cast<double>(pos);
  if (fn == 0) {
    if (std::abs(plain) > kIdentityTol)
      throw std::logic_error("group_burden: accepted positives carry nonzero cost");
    return 0.0;
  }
  const double tpr = static_cast<double>(pos - fn) / static_cast<double>(pos);
  const double factored = (fn_sum / static_cast<double>(fn)) * (1.0 - tpr);
  if (std::abs(factored - plain) > kIdentityTol)
    throw std::logic_error("group_burden: factored and plain forms disagree; "
                           "an accepted row carries nonzero cost");
  return factored;
}

GroupRates group_rates(const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                       const std::vector<Index>& rows) {
  if (preds.size() != labels.size()) throw std::invalid_argument("group_rates: vectors misaligned");
  check_rows(preds.size(), rows, "group_rates");

  Index pos = 0, tp = 0, accepted = 0, correct = 0;
  for (Index i : rows) {
    if (preds[i] == 1) ++accepted;
    if (labels[i] == 1) {
      ++pos;
      if (preds[i] == 1) ++tp;
    }
    if (preds[i] == labels[i]) ++correct;
  }
  GroupRates r;
  const auto n = static_cast<double>(rows.size());
  r.ar = static_cast<double>(accepted) / n;
  r.accuracy = static_cast<double>(correct) / n;
  r.tpr_defined = pos > 0;
  r.tpr = pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
  return r;
}

GroupMetrics compute_group_metrics(const GroupKey& key, const Vector& costs,
                                   const Eigen::VectorXi& preds, const Eigen::VectorXi& labels,
                                   const std::vector<Index>& rows) {
  GroupMetrics g;
  g.group = key;
  g.n = static_cast<Index>(rows.size());
  g.cost = group_cost(costs, preds, rows);
  g.burden = group_burden(costs, preds, labels, rows);
  const GroupRates rates = group_rates(preds, labels, rows);
  g.tpr = rates.tpr;
  g.ar = rates.ar;
  g.accuracy = rates.accuracy;
  g.has_positive_labels = rates.tpr_defined;

  Index neg = 0, fn = 0;
  double neg_sum = 0.0, fn_sum = 0.0;
  for (Index i : rows) {
    if (preds[i] == 0) {
      ++neg;
      neg_sum += costs[i];
      if (labels[i] == 1) {
        ++fn;
        fn_sum += costs[i];
      }
    }
  }
  g.has_negatives = neg > 0;
  g.mean_cost_given_negative = neg > 0 ? neg_sum / static_cast<double>(neg) : 0.0;
  g.mean_cost_given_fn = fn > 0 ? fn_sum / static_cast<double>(fn) : 0.0;
  return g;
}

FairnessReport aggregate_report(std::vector<GroupMetrics> groups, double overall_accuracy,
                                double failure_rate) {
  if (groups.empty()) throw std::invalid_argument("aggregate_report: need at least one group");

  FairnessReport report;
  report.overall_accuracy = overall_accuracy;
  report.failure_rate = failure_rate;

  auto span = [](double lo, double hi) { return hi - lo; };

  double cost_lo = groups[0].cost, cost_hi = groups[0].cost;
  double burden_lo = groups[0].burden, burden_hi = groups[0].burden;
  double ar_lo = groups[0].ar, ar_hi = groups[0].ar;
  bool tpr_any = false;
  double tpr_lo = 0.0, tpr_hi = 0.0;
  for (const auto& g : groups) {
    cost_lo = std::min(cost_lo, g.cost);
    cost_hi = std::max(cost_hi, g.cost);
    burden_lo = std::min(burden_lo, g.burden);
    burden_hi = std::max(burden_hi, g.burden);
    ar_lo = std::min(ar_lo, g.ar);
    ar_hi = std::max(ar_hi, g.ar);
    if (g.has_positive_labels) {
      if (!tpr_any) {
        tpr_lo = tpr_hi = g.tpr;
        tpr_any = true;
      } else {
        tpr_lo = std::min(tpr_lo, g.tpr);
        tpr_hi = std::max(tpr_hi, g.tpr);
      }
    }
  }

  report.cost = {cost_hi, span(cost_lo, cost_hi)};
  report.burden = {burden_hi, span(burden_lo, burden_hi)};
  report.ar = {ar_lo, span(ar_lo, ar_hi)};
  report.tpr = tpr_any ? MetricAggregate{tpr_lo, span(tpr_lo, tpr_hi)} : MetricAggregate{0.0, 0.0};
  report.groups = std::move(groups);
  return report;
}

namespace {

nlohmann::ordered_json aggregate_json(const MetricAggregate& a) {
  return {{"worst", a.worst}, {"gap", a.gap}};
}

MetricAggregate aggregate_from(const nlohmann::json& j) {
  return {j.at("worst").get<double>(), j.at("gap").get<double>()};
}

}  // namespace

std::string report_to_json(const FairnessReport& report) {
  nlohmann::ordered_json j;
  j["overall_accuracy"] = report.overall_accuracy;
  j["failure_rate"] = report.failure_rate;
  j["aggregate"] = {{"burden", aggregate_json(report.burden)},
                    {"tpr", aggregate_json(report.tpr)},
                    {"cost", aggregate_json(report.cost)},
                    {"ar", aggregate_json(report.ar)}};
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : report.groups) {
    nlohmann::ordered_json jg;
    jg["group"] = g.group.to_string();
    jg["n"] = g.n;
    jg["cost"] = g.cost;
    jg["burden"] = g.burden;
    jg["tpr"] = g.tpr;
    jg["ar"] = g.ar;
    jg["accuracy"] = g.accuracy;
    jg["mean_cost_given_negative"] = g.mean_cost_given_negative;
    jg["mean_cost_given_fn"] = g.mean_cost_given_fn;
    jg["has_negatives"] = g.has_negatives;
    jg["has_positive_labels"] = g.has_positive_labels;
    j["groups"].push_back(jg);
  }
  return j.dump(2);
}

namespace {

GroupKey parse_group_key(const std::string& text) {
  GroupKey key;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto amp = text.find('&', start);
    const std::string part =
        text.substr(start, amp == std::string::npos ? std::string::npos : amp - start);
    const auto eq = part.find('=');
    if (eq != std::string::npos) key.parts.emplace_back(part.substr(0, eq), part.substr(eq + 1));
    if (amp == std::string::npos) break;
    start = amp + 1;
  }
  return key;
}

}  // namespace

FairnessReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FairnessReport report;
  report.overall_accuracy = j.at("overall_accuracy").get<double>();
  report.failure_rate = j.at("failure_rate").get<double>();
  report.burden = aggregate_from(j.at("aggregate").at("burden"));
  report.tpr = aggregate_from(j.at("aggregate").at("tpr"));
  report.cost = aggregate_from(j.at("aggregate").at("cost"));
  report.ar = aggregate_from(j.at("aggregate").at("ar"));
  for (const auto& jg : j.at("groups")) {
    GroupMetrics g;
    g.group = parse_group_key(jg.at("group").get<std::string>());
    g.n = jg.at("n").get<Index>();
    g.cost = jg.at("cost").get<double>();
    g.burden = jg.at("burden").get<double>();
    g.tpr = jg.at("tpr").get<double>();
    g.ar = jg.at("ar").get<double>();
    g.accuracy = jg.at("accuracy").get<double>();
    g.mean_cost_given_negative = jg.at("mean_cost_given_negative").get<double>();
    g.mean_cost_given_fn = jg.at("mean_cost_given_fn").get<double>();
    g.has_negatives = jg.at("has_negatives").get<bool>();
    g.has_positive_labels = jg.at("has_positive_labels").get<bool>();
    report.groups.push_back(std::move(g));
  }
  return report;
}

void save_report(const FairnessReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << report_to_json(report) << '\n';
}

FairnessReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

void save_report_csv(const FairnessReport& report, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  for (const auto& g : report.groups) {
    rows.push_back({g.group.to_string(), std::to_string(g.n), fmt(g.cost), fmt(g.burden),
                    fmt(g.tpr), fmt(g.ar), fmt(g.accuracy), fmt(g.mean_cost_given_negative)});
  }
  rows.push_back({"<worst>", "", fmt(report.cost.worst), fmt(report.burden.worst),
                  fmt(report.tpr.worst), fmt(report.ar.worst), fmt(report.overall_accuracy), ""});
  rows.push_back({"<gap>", "", fmt(report.cost.gap), fmt(report.burden.gap), fmt(report.tpr.gap),
                  fmt(report.ar.gap), "", ""});
  write_csv(path, {"group", "n", "cost", "burden", "tpr", "ar", "accuracy",
                   "mean_cost_given_negative"},
            rows);
}

}  // namespace recfair
