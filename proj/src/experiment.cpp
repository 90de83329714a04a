#include "recfair/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "recfair/csv.hpp"
#include "recfair/postpro.hpp"
#include "recfair/rng.hpp"

namespace recfair {

namespace {

// Salts for deriving independent seed streams from the per-split seed.
constexpr seed_t kSaltSplit = 0x01;
constexpr seed_t kSaltTrain = 0x02;
constexpr seed_t kSaltRecourse = 0x03;
constexpr seed_t kSaltBurden = 0x04;
constexpr seed_t kSaltPostpro = 0x05;
constexpr seed_t kSaltBalance = 0x06;

std::string attrs_name(const std::vector<std::string>& attrs) {
  std::string s;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (i) s += "+";
    s += attrs[i];
  }
  return s;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Human-scale values (C grid points, directory names): default precision.
std::string format_short(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

Eigen::VectorXi to_int_labels(const Vector& y) {
  Eigen::VectorXi out(y.size());
  for (Index i = 0; i < y.size(); ++i) out[i] = y[i] == 1.0 ? 1 : 0;
  return out;
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::Postpro: return "postpro";
    case Strategy::Misob: return "misob";
  }
  return "none";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "none") return Strategy::None;
  if (name == "postpro") return Strategy::Postpro;
  if (name == "misob") return Strategy::Misob;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected none|postpro|misob)");
}

void ExperimentConfig::validate() const {
  if (splits < 1) throw std::invalid_argument("config: splits must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("config: test_fraction must be in (0,1)");
  if (recourse_methods.empty()) throw std::invalid_argument("config: no recourse methods");
  if (sensitive_sets.empty()) throw std::invalid_argument("config: no sensitive attribute sets");
  for (const auto& attrs : sensitive_sets) {
    if (attrs.empty()) throw std::invalid_argument("config: empty sensitive attribute set");
  }
  if (misob_c < 0.0) throw std::invalid_argument("config: misob C must be >= 0");
  model.validate();
  train.validate();
  gs.validate();
  wt.validate();
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["dataset"] = cfg.dataset_path;
  j["schema"] = cfg.schema_path;
  j["sensitive_sets"] = cfg.sensitive_sets;
  j["model"]["kind"] = cfg.model.kind == ModelKind::Logistic ? "logistic" : "mlp";
  if (cfg.model.kind == ModelKind::Mlp) j["model"]["hidden"] = cfg.model.hidden;
  j["strategy"] = strategy_name(cfg.strategy);
  j["misob"] = {{"C", cfg.misob_c},
                {"warmup_epochs", cfg.misob_warmup_epochs},
                {"rounds", cfg.misob_rounds},
                {"round_learning_rate", cfg.misob_round_learning_rate},
                {"round_batch_size", cfg.misob_round_batch_size},
                {"per_batch_burdens", cfg.misob_per_batch_burdens},
                {"burden_method", cfg.misob_burden_method}};
  std::vector<std::string> methods;
  for (auto m : cfg.recourse_methods) methods.push_back(method_name(m));
  j["recourse_methods"] = methods;
  j["gs"] = {{"samples_per_shell", cfg.gs.samples_per_shell},
             {"initial_radius", cfg.gs.initial_radius},
             {"growth", cfg.gs.growth},
             {"max_shells", cfg.gs.max_shells},
             {"shrink_steps", cfg.gs.shrink_steps}};
  j["wt"] = {{"step_size", cfg.wt.step_size},
             {"lambda", cfg.wt.lambda},
             {"max_iter", cfg.wt.max_iter},
             {"clamp", cfg.wt.clamp},
             {"decision_threshold", cfg.wt.decision_threshold},
             {"target_prob", cfg.wt.target_prob}};
  j["on_failure"] = cfg.on_failure == FailurePolicy::MaxObserved   ? "max_observed"
                    : cfg.on_failure == FailurePolicy::BoxDiameter ? "box_diameter"
                                                                   : "zero";
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs}};
  j["splits"] = cfg.splits;
  j["test_fraction"] = cfg.test_fraction;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["balance"] = cfg.balance;
  j["flip_labels"] = cfg.flip_labels;
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.dataset_path = j.value("dataset", "");
  cfg.schema_path = j.value("schema", "");
  if (j.contains("sensitive_sets"))
    cfg.sensitive_sets = j.at("sensitive_sets").get<std::vector<std::vector<std::string>>>();
  if (j.contains("model")) {
    const auto kind = j.at("model").value("kind", "mlp");
    if (kind == "logistic") {
      cfg.model.kind = ModelKind::Logistic;
      cfg.model.hidden.clear();
    } else if (kind == "mlp") {
      cfg.model.kind = ModelKind::Mlp;
      if (j.at("model").contains("hidden"))
        cfg.model.hidden = j.at("model").at("hidden").get<std::vector<int>>();
    } else {
      throw std::invalid_argument("config: unknown model kind '" + kind + "'");
    }
  }
  cfg.strategy = strategy_from_name(j.value("strategy", "none"));
  if (j.contains("misob")) {
    const auto& jm = j.at("misob");
    cfg.misob_c = jm.value("C", 0.3);
    cfg.misob_warmup_epochs = jm.value("warmup_epochs", 3);
    cfg.misob_rounds = jm.value("rounds", 3);
    cfg.misob_round_learning_rate = jm.value("round_learning_rate", 0.0);
    cfg.misob_round_batch_size = jm.value("round_batch_size", 0);
    cfg.misob_per_batch_burdens = jm.value("per_batch_burdens", false);
    cfg.misob_burden_method = jm.value("burden_method", "");
  }
  if (j.contains("recourse_methods")) {
    cfg.recourse_methods.clear();
    for (const auto& name : j.at("recourse_methods"))
      cfg.recourse_methods.push_back(method_from_name(name.get<std::string>()));
  }
  if (j.contains("gs")) {
    const auto& jg = j.at("gs");
    cfg.gs.samples_per_shell = jg.value("samples_per_shell", cfg.gs.samples_per_shell);
    cfg.gs.initial_radius = jg.value("initial_radius", cfg.gs.initial_radius);
    cfg.gs.growth = jg.value("growth", cfg.gs.growth);
    cfg.gs.max_shells = jg.value("max_shells", cfg.gs.max_shells);
    cfg.gs.shrink_steps = jg.value("shrink_steps", cfg.gs.shrink_steps);
  }
  if (j.contains("wt")) {
    const auto& jw = j.at("wt");
    cfg.wt.step_size = jw.value("step_size", cfg.wt.step_size);
    cfg.wt.lambda = jw.value("lambda", cfg.wt.lambda);
    cfg.wt.max_iter = jw.value("max_iter", cfg.wt.max_iter);
    cfg.wt.clamp = jw.value("clamp", cfg.wt.clamp);
    cfg.wt.decision_threshold = jw.value("decision_threshold", cfg.wt.decision_threshold);
    cfg.wt.target_prob = jw.value("target_prob", cfg.wt.target_prob);
  }
  if (j.contains("on_failure")) {
    const auto name = j.at("on_failure").get<std::string>();
    if (name == "max_observed") cfg.on_failure = FailurePolicy::MaxObserved;
    else if (name == "box_diameter") cfg.on_failure = FailurePolicy::BoxDiameter;
    else if (name == "zero") cfg.on_failure = FailurePolicy::Zero;
    else throw std::invalid_argument("config: unknown failure policy '" + name + "'");
  }
  if (j.contains("train")) {
    const auto& jt = j.at("train");
    cfg.train.learning_rate = jt.value("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = jt.value("batch_size", cfg.train.batch_size);
    cfg.train.epochs = jt.value("epochs", cfg.train.epochs);
  }
  cfg.splits = j.value("splits", cfg.splits);
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.balance = j.value("balance", false);
  cfg.flip_labels = j.value("flip_labels", false);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_config_from_json(ss.str());
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return out;
}

namespace {

const std::vector<std::string> kAggregateColumns = {
    "method",          "strategy",        "attrs",           "acc_mean",
    "acc_std",         "burden_worst_mean", "burden_worst_std", "burden_gap_mean",
    "burden_gap_std",  "tpr_worst_mean",  "tpr_worst_std",   "tpr_gap_mean",
    "tpr_gap_std",     "cost_worst_mean", "cost_worst_std",  "cost_gap_mean",
    "cost_gap_std",    "ar_worst_mean",   "ar_worst_std",    "ar_gap_mean",
    "ar_gap_std",      "failure_rate_mean", "failure_rate_std"};

std::vector<std::string> aggregate_row_cells(const AggregateRow& r) {
  return {r.method,
          r.strategy,
          r.attrs,
          format_double(r.accuracy.mean),
          format_double(r.accuracy.std),
          format_double(r.burden_worst.mean),
          format_double(r.burden_worst.std),
          format_double(r.burden_gap.mean),
          format_double(r.burden_gap.std),
          format_double(r.tpr_worst.mean),
          format_double(r.tpr_worst.std),
          format_double(r.tpr_gap.mean),
          format_double(r.tpr_gap.std),
          format_double(r.cost_worst.mean),
          format_double(r.cost_worst.std),
          format_double(r.cost_gap.mean),
          format_double(r.cost_gap.std),
          format_double(r.ar_worst.mean),
          format_double(r.ar_worst.std),
          format_double(r.ar_gap.mean),
          format_double(r.ar_gap.std),
          format_double(r.failure_rate.mean),
          format_double(r.failure_rate.std)};
}

}  // namespace

void save_aggregate_csv(const AggregateTable& table, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows) rows.push_back(aggregate_row_cells(r));
  write_csv(path, kAggregateColumns, rows);
}

std::string aggregate_to_json(const AggregateTable& table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json jr;
    jr["method"] = r.method;
    jr["strategy"] = r.strategy;
    jr["attrs"] = r.attrs;
    auto put = [&jr](const char* name, const MeanStd& ms) {
      jr[name] = {{"mean", ms.mean}, {"std", ms.std}};
    };
    put("accuracy", r.accuracy);
    put("burden_worst", r.burden_worst);
    put("burden_gap", r.burden_gap);
    put("tpr_worst", r.tpr_worst);
    put("tpr_gap", r.tpr_gap);
    put("cost_worst", r.cost_worst);
    put("cost_gap", r.cost_gap);
    put("ar_worst", r.ar_worst);
    put("ar_gap", r.ar_gap);
    put("failure_rate", r.failure_rate);
    j.push_back(jr);
  }
  return j.dump(2);
}

namespace {

struct SplitContext {
  Dataset train;
  Dataset test;
  std::vector<bool> mask;
  seed_t split_seed = 0;
};

FairnessReport build_report(const Vector& costs, const Eigen::VectorXi& preds,
                            const Eigen::VectorXi& labels,
                            const std::vector<std::pair<GroupKey, std::vector<Index>>>& groups,
                            double failure_rate) {
  std::vector<GroupMetrics> metrics;
  for (const auto& [key, rows] : groups)
    metrics.push_back(compute_group_metrics(key, costs, preds, labels, rows));

  Index correct = 0;
  for (Index i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(preds.size());
  return aggregate_report(std::move(metrics), acc, failure_rate);
}

SplitOutcome run_one_split(const ExperimentConfig& cfg, const Dataset& full, int split) {
  SplitContext ctx;
  ctx.split_seed = derive_seed(cfg.seed, derive_seed(kSaltSplit, static_cast<seed_t>(split)));
  auto [train, test] = train_test_split(full, cfg.test_fraction, ctx.split_seed);
  std::tie(ctx.train, ctx.test) = rescale_to_train_stats(train, test);
  ctx.mask = ctx.train.schema().mutability_mask();

  const seed_t train_seed = derive_seed(ctx.split_seed, kSaltTrain);
  TrainConfig base_train = cfg.train;
  base_train.seed = train_seed;

  const Matrix& Xtr = ctx.train.features();
  const Vector& ytr = ctx.train.labels();
  const Matrix& Xte = ctx.test.features();
  const Eigen::VectorXi test_labels = to_int_labels(ctx.test.labels());
  const Eigen::VectorXi train_labels_int = to_int_labels(ytr);

  SplitOutcome outcome;

  // Base model for the unreweighted strategies; the reweighted trainer
  // builds its own model per evaluated method.
  Model base;
  if (cfg.strategy != Strategy::Misob) {
    base = init_model(cfg.model, static_cast<int>(Xtr.cols()), train_seed);
    base = train_weighted(base, Xtr, ytr, Vector::Ones(Xtr.rows()), base_train);
  }

  for (std::size_t mi = 0; mi < cfg.recourse_methods.size(); ++mi) {
    const MethodKind method = cfg.recourse_methods[mi];

    RecourseSpec eval_spec;
    eval_spec.method = method;
    eval_spec.gs = cfg.gs;
    eval_spec.wt = cfg.wt;
    eval_spec.on_failure = cfg.on_failure;
    eval_spec.seed = derive_seed(ctx.split_seed, derive_seed(kSaltRecourse, mi));

    Model model;
    if (cfg.strategy == Strategy::Misob) {
      MisobConfig mcfg;
      mcfg.C = cfg.misob_c;
      mcfg.warmup_epochs = cfg.misob_warmup_epochs;
      mcfg.rounds = cfg.misob_rounds;
      mcfg.train = base_train;
      mcfg.round_learning_rate = cfg.misob_round_learning_rate;
      mcfg.round_batch_size = cfg.misob_round_batch_size;
      mcfg.per_batch_burdens = cfg.misob_per_batch_burdens;
      mcfg.recourse = eval_spec;
      mcfg.recourse.method = cfg.misob_burden_method.empty()
                                 ? method
                                 : method_from_name(cfg.misob_burden_method);
      mcfg.recourse.seed = derive_seed(ctx.split_seed, derive_seed(kSaltBurden, mi));
      MisobOutcome mo = misob_train(Xtr, ytr, cfg.model, mcfg, ctx.mask);
      model = std::move(mo.model);
      for (auto& r : mo.rounds) outcome.training_log.push_back(r);
    } else {
      model = base;
    }

    const PopulationRecourse pop = recourse_costs_population(model, Xte, eval_spec, ctx.mask);
    const Eigen::VectorXi test_preds = predict(model, Xte);

    for (const auto& attrs : cfg.sensitive_sets) {
      const auto test_groups = enumerate_groups(ctx.test, attrs);

      Eigen::VectorXi preds_used = test_preds;
      Vector costs_used = pop.costs;
      if (cfg.strategy == Strategy::Postpro) {
        const Eigen::VectorXi train_preds = predict(model, Xtr);
        const auto train_groups = enumerate_groups(ctx.train, attrs);
        const FlipPolicy policy = fit_postpro(train_preds, train_labels_int, train_groups);
        const seed_t apply_seed = derive_seed(ctx.split_seed, derive_seed(kSaltPostpro, mi));
        preds_used = apply_postpro(policy, test_preds, test_groups, apply_seed);
        // Costs follow the post-processed decisions: rows it accepts take no
        // action; rows it rejects keep the base-model recourse cost, which
        // is 0 for rows the base model already accepted.
        for (Index i = 0; i < preds_used.size(); ++i) {
          if (preds_used[i] == 1 || test_preds[i] == 1) costs_used[i] = 0.0;
        }
      }

      outcome.reports.push_back(
          build_report(costs_used, preds_used, test_labels, test_groups, pop.failure_rate));
    }
  }
  return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.dataset_path.empty() || cfg.schema_path.empty())
    throw std::invalid_argument("config: dataset and schema paths are required");

  const FeatureSchema schema = load_schema(cfg.schema_path);
  LoadStats stats;
  Dataset full = load_csv(cfg.dataset_path, schema, &stats);
  if (cfg.flip_labels) full = flip_labels(full);
  if (cfg.balance) full = balance_downsample(full, derive_seed(cfg.seed, kSaltBalance));

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream snap(fs::path(cfg.output_dir) / "config.json");
    snap << experiment_config_to_json(cfg) << '\n';
    std::ofstream fp(fs::path(cfg.output_dir) / "fingerprint.txt");
    fp << full.fingerprint() << ",dropped=" << stats.rows_dropped_missing << '\n';
  }

  ExperimentResult result;
  int failed_splits = 0;
  for (int s = 0; s < cfg.splits; ++s) {
    try {
      SplitOutcome outcome = run_one_split(cfg, full, s);

      const fs::path split_dir = fs::path(cfg.output_dir) / ("split_" + std::to_string(s));
      fs::create_directories(split_dir);
      std::size_t r = 0;
      for (const auto method : cfg.recourse_methods) {
        for (const auto& attrs : cfg.sensitive_sets) {
          const std::string stem = "report_" + method_name(method) + "_" + attrs_name(attrs);
          save_report(outcome.reports.at(r), (split_dir / (stem + ".json")).string());
          save_report_csv(outcome.reports.at(r), (split_dir / (stem + ".csv")).string());
          ++r;
        }
      }
      if (!outcome.training_log.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& rl : outcome.training_log) {
          rows.push_back({std::to_string(rl.round), format_double(rl.total_burden),
                          std::to_string(rl.failures), format_double(rl.mean_weight),
                          format_double(rl.train_loss)});
        }
        write_csv((split_dir / "training_log.csv").string(),
                  {"round", "total_burden", "failures", "mean_phi", "train_loss"}, rows);
      }
      result.splits.push_back(std::move(outcome));
    } catch (const std::exception& e) {
      std::cerr << "split " << s << " failed: " << e.what() << '\n';
      ++failed_splits;
      result.splits.emplace_back();
    }
  }
  if (failed_splits > 0)
    throw std::runtime_error(std::to_string(failed_splits) + " split(s) failed");

  // Aggregate in (method, attrs) config order.
  std::size_t r = 0;
  for (const auto method : cfg.recourse_methods) {
    for (const auto& attrs : cfg.sensitive_sets) {
      std::vector<double> acc, bw, bg, tw, tg, cw, cg, aw, ag, fr;
      for (const auto& split : result.splits) {
        const FairnessReport& rep = split.reports.at(r);
        acc.push_back(rep.overall_accuracy);
        bw.push_back(rep.burden.worst);
        bg.push_back(rep.burden.gap);
        tw.push_back(rep.tpr.worst);
        tg.push_back(rep.tpr.gap);
        cw.push_back(rep.cost.worst);
        cg.push_back(rep.cost.gap);
        aw.push_back(rep.ar.worst);
        ag.push_back(rep.ar.gap);
        fr.push_back(rep.failure_rate);
      }
      AggregateRow row;
      row.method = method_name(method);
      row.strategy = strategy_name(cfg.strategy);
      row.attrs = attrs_name(attrs);
      row.accuracy = mean_std(acc);
      row.burden_worst = mean_std(bw);
      row.burden_gap = mean_std(bg);
      row.tpr_worst = mean_std(tw);
      row.tpr_gap = mean_std(tg);
      row.cost_worst = mean_std(cw);
      row.cost_gap = mean_std(cg);
      row.ar_worst = mean_std(aw);
      row.ar_gap = mean_std(ag);
      row.failure_rate = mean_std(fr);
      result.table.rows.push_back(std::move(row));
      ++r;
    }
  }

  save_aggregate_csv(result.table, (fs::path(cfg.output_dir) / "aggregate.csv").string());
  {
    std::ofstream out(fs::path(cfg.output_dir) / "aggregate.json");
    out << aggregate_to_json(result.table) << '\n';
  }
  return result;
}

std::vector<std::pair<double, AggregateTable>> sweep_c(const ExperimentConfig& cfg,
                                                       const std::vector<double>& c_values) {
  if (c_values.empty()) throw std::invalid_argument("sweep_c: no C values");
  std::set<double> unique(c_values.begin(), c_values.end());
  if (unique.size() != c_values.size())
    throw std::invalid_argument("sweep_c: duplicate C values");

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  std::vector<std::pair<double, AggregateTable>> results;
  std::vector<std::vector<std::string>> sweep_rows;
  for (double c : c_values) {
    ExperimentConfig sub = cfg;
    sub.strategy = Strategy::Misob;
    sub.misob_c = c;
    std::ostringstream dir;
    dir << "c_" << c;
    sub.output_dir = (fs::path(cfg.output_dir) / dir.str()).string();
    ExperimentResult res = run_experiment(sub);

    for (const auto& row : res.table.rows) {
      auto emit = [&](const char* metric, const MeanStd& ms) {
        sweep_rows.push_back({format_short(c), row.method, row.attrs, metric,
                              format_double(ms.mean), format_double(ms.std)});
      };
      emit("accuracy", row.accuracy);
      emit("burden_worst", row.burden_worst);
      emit("burden_gap", row.burden_gap);
      emit("tpr_worst", row.tpr_worst);
      emit("tpr_gap", row.tpr_gap);
      emit("cost_worst", row.cost_worst);
      emit("cost_gap", row.cost_gap);
      emit("ar_worst", row.ar_worst);
      emit("ar_gap", row.ar_gap);
      emit("failure_rate", row.failure_rate);
    }
    results.emplace_back(c, std::move(res.table));
  }

  write_csv((fs::path(cfg.output_dir) / "sweep.csv").string(),
            {"c", "method", "attrs", "metric", "mean", "std"}, sweep_rows);
  return results;
}

}  // namespace recfair
