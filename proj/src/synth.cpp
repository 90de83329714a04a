#include "recfair/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "recfair/metrics.hpp"
#include "recfair/rng.hpp"

namespace recfair {

void ParadoxSpec::validate() const {
  if (group_sizes.empty()) throw std::invalid_argument("paradox spec: no groups");
  if (acceptance_rates.size() != group_sizes.size() || label_rates.size() != group_sizes.size())
    throw std::invalid_argument("paradox spec: per-group lists must align");
  for (Index s : group_sizes) {
    if (s < 1) throw std::invalid_argument("paradox spec: group sizes must be >= 1");
  }
  for (double r : acceptance_rates) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("paradox spec: rates must be in [0,1]");
  }
  for (double r : label_rates) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("paradox spec: rates must be in [0,1]");
  }
  if (mean_negative_cost < 0.0 || noise_scale < 0.0)
    throw std::invalid_argument("paradox spec: cost and noise must be >= 0");
}

ParadoxData generate_paradox(const ParadoxSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  Index n = 0;
  for (Index s : spec.group_sizes) n += s;

  Matrix X(n, 1);
  Vector y(n);
  Eigen::VectorXi preds(n);
  Vector costs = Vector::Zero(n);
  std::vector<std::string> group_col(static_cast<std::size_t>(n));

  Index row = 0;
  for (std::size_t g = 0; g < spec.group_sizes.size(); ++g) {
    const Index size = spec.group_sizes[g];
    const auto accepted =
        static_cast<Index>(std::llround(static_cast<double>(size) * spec.acceptance_rates[g]));
    const auto positives =
        static_cast<Index>(std::llround(static_cast<double>(size) * spec.label_rates[g]));

    // Exact planted counts; which rows get them is shuffled per seed.
    std::vector<Index> order(static_cast<std::size_t>(size));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    shuffle(order, rng);
    std::vector<std::uint8_t> is_accepted(static_cast<std::size_t>(size), 0);
    for (Index i = 0; i < accepted; ++i) is_accepted[static_cast<std::size_t>(order[i])] = 1;
    shuffle(order, rng);
    std::vector<std::uint8_t> is_positive(static_cast<std::size_t>(size), 0);
    for (Index i = 0; i < positives; ++i) is_positive[static_cast<std::size_t>(order[i])] = 1;

    for (Index i = 0; i < size; ++i, ++row) {
      group_col[static_cast<std::size_t>(row)] = "g" + std::to_string(g);
      X(row, 0) = rng.uniform();
      y[row] = is_positive[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      preds[row] = is_accepted[static_cast<std::size_t>(i)] ? 1 : 0;
      if (preds[row] == 0) {
        costs[row] = std::max(0.0, spec.mean_negative_cost + spec.noise_scale * rng.normal());
      }
    }
  }

  FeatureSchema schema;
  schema.label = "y";
  FeatureSpec x_spec;
  x_spec.name = "x";
  x_spec.kind = FeatureKind::Numeric;
  x_spec.min = 0.0;
  x_spec.max = 1.0;
  schema.features.push_back(x_spec);
  FeatureSpec g_spec;
  g_spec.name = "group";
  g_spec.kind = FeatureKind::Categorical;
  g_spec.sensitive = true;
  g_spec.is_mutable = false;
  for (std::size_t g = 0; g < spec.group_sizes.size(); ++g)
    g_spec.categories.push_back("g" + std::to_string(g));
  schema.features.push_back(g_spec);

  ParadoxData data{Dataset(std::move(X), std::move(y), {std::move(group_col)}, std::move(schema),
                           "paradox"),
                   std::move(preds), std::move(costs)};
  return data;
}

ParadoxSummary summarize_paradox(const ParadoxData& data) {
  ParadoxSummary summary;
  const auto groups = enumerate_groups(data.dataset, {"group"});

  for (const auto& [key, rows] : groups) {
    ParadoxSummary::PerGroup pg;
    pg.group = key.to_string();

    double neg_sum = 0.0;
    Index neg = 0;
    for (Index i : rows) {
      if (data.planted_preds[i] == 0) {
        neg_sum += data.planted_costs[i];
        ++neg;
      }
    }
    pg.conventional = neg > 0 ? neg_sum / static_cast<double>(neg) : 0.0;
    pg.holistic = group_cost(data.planted_costs, data.planted_preds, rows);
    summary.groups.push_back(pg);
  }

  auto rel_gap = [](double lo, double hi) {
    if (lo <= 0.0) return hi > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return (hi - lo) / lo;
  };
  double conv_lo = summary.groups[0].conventional, conv_hi = conv_lo;
  double hol_lo = summary.groups[0].holistic, hol_hi = hol_lo;
  for (const auto& pg : summary.groups) {
    conv_lo = std::min(conv_lo, pg.conventional);
    conv_hi = std::max(conv_hi, pg.conventional);
    hol_lo = std::min(hol_lo, pg.holistic);
    hol_hi = std::max(hol_hi, pg.holistic);
  }
  summary.conventional_gap_rel = rel_gap(conv_lo, conv_hi);
  summary.holistic_gap_rel = rel_gap(hol_lo, hol_hi);
  return summary;
}

void save_paradox_csv(const ParadoxSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  out << "group,mean_cost_over_negatives,holistic_group_cost\n";
  for (const auto& pg : summary.groups)
    out << pg.group << ',' << pg.conventional << ',' << pg.holistic << '\n';
}

ParadoxSpec paradox_spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ParadoxSpec spec;
  if (j.contains("group_sizes")) spec.group_sizes = j.at("group_sizes").get<std::vector<Index>>();
  if (j.contains("acceptance_rates"))
    spec.acceptance_rates = j.at("acceptance_rates").get<std::vector<double>>();
  if (j.contains("label_rates")) spec.label_rates = j.at("label_rates").get<std::vector<double>>();
  if (j.contains("mean_negative_cost"))
    spec.mean_negative_cost = j.at("mean_negative_cost").get<double>();
  if (j.contains("noise_scale")) spec.noise_scale = j.at("noise_scale").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<seed_t>();
  spec.validate();
  return spec;
}

}  // namespace recfair
