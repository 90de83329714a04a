#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recfair/dataset.hpp"
#include "recfair/experiment.hpp"
#include "recfair/model.hpp"
#include "recfair/recourse.hpp"
#include "recfair/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

recfair::ColumnRole role_from_name(const std::string& name) {
  if (name == "label") return recfair::ColumnRole::Label;
  if (name == "sensitive") return recfair::ColumnRole::Sensitive;
  if (name == "numeric") return recfair::ColumnRole::Numeric;
  if (name == "categorical") return recfair::ColumnRole::Categorical;
  if (name == "ignore") return recfair::ColumnRole::Ignore;
  throw std::invalid_argument("unknown role '" + name +
                              "' (expected label|sensitive|numeric|categorical|ignore)");
}

int cmd_ingest(const std::string& input, const std::string& roles_path,
               const std::string& mutability_path, const std::string& output) {
  std::ifstream roles_in(roles_path);
  if (!roles_in) throw std::invalid_argument("cannot open roles file: " + roles_path);
  nlohmann::json jroles = nlohmann::json::parse(roles_in);
  std::map<std::string, recfair::ColumnRole> roles;
  for (const auto& [name, role] : jroles.items())
    roles[name] = role_from_name(role.get<std::string>());

  std::map<std::string, bool> mutability;
  if (!mutability_path.empty()) {
    std::ifstream mut_in(mutability_path);
    if (!mut_in) throw std::invalid_argument("cannot open mutability file: " + mutability_path);
    nlohmann::json jmut = nlohmann::json::parse(mut_in);
    for (const auto& [name, m] : jmut.items()) mutability[name] = m.get<bool>();
  }

  const recfair::FeatureSchema schema = recfair::infer_schema(input, roles, mutability);
  recfair::save_schema(schema, output);
  std::cout << "schema written to " << output << " (" << schema.features.size()
            << " features, encoded width " << schema.encoded_width() << ")\n";
  return kExitOk;
}

int cmd_run(recfair::ExperimentConfig cfg) {
  const recfair::ExperimentResult result = recfair::run_experiment(cfg);
  std::cout << "wrote " << result.splits.size() << " split report(s) and aggregate table to "
            << cfg.output_dir << '\n';
  for (const auto& row : result.table.rows) {
    std::cout << row.method << " / " << row.strategy << " / " << row.attrs
              << ": acc " << row.accuracy.mean << " burden_worst " << row.burden_worst.mean
              << " tpr_worst " << row.tpr_worst.mean << '\n';
  }
  return kExitOk;
}

int cmd_sweep(recfair::ExperimentConfig cfg, const std::vector<double>& c_values) {
  const auto results = recfair::sweep_c(cfg, c_values);
  std::cout << "sweep over " << results.size() << " C value(s) written to " << cfg.output_dir
            << "/sweep.csv\n";
  return kExitOk;
}

int cmd_demo_paradox(const std::string& spec_path, const std::string& output) {
  recfair::ParadoxSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw std::invalid_argument("cannot open spec file: " + spec_path);
    std::stringstream ss;
    ss << in.rdbuf();
    spec = recfair::paradox_spec_from_json(ss.str());
  }

  const recfair::ParadoxData data = recfair::generate_paradox(spec);
  const recfair::ParadoxSummary summary = recfair::summarize_paradox(data);
  if (!output.empty()) recfair::save_paradox_csv(summary, output);

  std::cout << "group, mean cost over negatives, holistic group cost\n";
  for (const auto& g : summary.groups)
    std::cout << g.group << ", " << g.conventional << ", " << g.holistic << '\n';
  std::cout << "relative gap: conventional " << summary.conventional_gap_rel * 100.0
            << "%, holistic " << summary.holistic_gap_rel * 100.0 << "%\n";
  return kExitOk;
}

int cmd_recourse(const std::string& model_path, const std::string& dataset_path,
                 const std::string& schema_path, long row, const std::string& method,
                 std::uint64_t seed, const std::string& trace_path) {
  const recfair::Model model = recfair::load_model(model_path);
  const recfair::FeatureSchema schema = recfair::load_schema(schema_path);
  const recfair::Dataset ds = recfair::load_csv(dataset_path, schema);
  if (row < 0 || row >= ds.rows())
    throw std::invalid_argument("row " + std::to_string(row) + " out of range");

  recfair::RecourseSpec spec;
  spec.method = recfair::method_from_name(method);
  spec.seed = seed;
  const recfair::Vector x = ds.features().row(row).transpose();
  const recfair::RecourseResult result =
      recfair::run_recourse(model, x, spec, schema.mutability_mask(), static_cast<std::uint64_t>(row));

  std::cout << "method " << result.method << ", success " << (result.success ? "yes" : "no")
            << ", cost " << result.cost << ", iterations " << result.iterations << '\n';
  const auto names = schema.encoded_names();
  for (recfair::Index j = 0; j < x.size(); ++j) {
    if (x[j] != result.counterfactual[j]) {
      std::cout << "  " << names[static_cast<std::size_t>(j)] << ": " << x[j] << " -> "
                << result.counterfactual[j] << '\n';
    }
  }
  if (!trace_path.empty()) {
    recfair::Matrix X(1, x.size());
    X.row(0) = x.transpose();
    recfair::write_recourse_trace(trace_path, X, {result});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recourse-aware fairness pipeline: training, recourse generation, "
               "holistic group metrics and burden-reweighted training"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "infer a feature schema from a CSV file");
  std::string in_path, roles_path, mut_path, out_path;
  ingest->add_option("--input", in_path, "input CSV")->required();
  ingest->add_option("--roles", roles_path, "JSON map column -> role")->required();
  ingest->add_option("--mutability", mut_path, "JSON map column -> mutable flag");
  ingest->add_option("--output", out_path, "schema output path")->required();

  // run
  auto* run = app.add_subcommand("run", "run a multi-split experiment");
  std::string run_config, run_dataset, run_schema, run_strategy, run_outdir;
  int run_splits = -1;
  std::int64_t run_seed = -1;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--dataset", run_dataset, "override dataset path");
  run->add_option("--schema", run_schema, "override schema path");
  run->add_option("--strategy", run_strategy, "override strategy: none|postpro|misob");
  run->add_option("--splits", run_splits, "override split count");
  run->add_option("--seed", run_seed, "override master seed");
  run->add_option("--output-dir", run_outdir, "override output directory");

  // sweep-c
  auto* sweep = app.add_subcommand("sweep-c", "run the experiment for several C values");
  std::string sweep_config, sweep_outdir;
  std::vector<double> c_values;
  sweep->add_option("--config", sweep_config, "experiment config JSON")->required();
  sweep->add_option("--c-values", c_values, "C values")->required()->expected(-1);
  sweep->add_option("--output-dir", sweep_outdir, "override output directory");

  // demo-paradox
  auto* demo = app.add_subcommand("demo-paradox", "equal per-negative cost, unequal group cost");
  std::string demo_spec, demo_out;
  demo->add_option("--spec", demo_spec, "paradox spec JSON (defaults used when omitted)");
  demo->add_option("--output", demo_out, "CSV output path");

  // recourse
  auto* rec = app.add_subcommand("recourse", "explain a single instance");
  std::string rec_model, rec_dataset, rec_schema, rec_method = "gs", rec_trace;
  long rec_row = 0;
  std::uint64_t rec_seed = 0;
  rec->add_option("--model", rec_model, "model JSON")->required();
  rec->add_option("--dataset", rec_dataset, "dataset CSV")->required();
  rec->add_option("--schema", rec_schema, "schema JSON")->required();
  rec->add_option("--row", rec_row, "row index")->required();
  rec->add_option("--method", rec_method, "gs|wt");
  rec->add_option("--seed", rec_seed, "search seed");
  rec->add_option("--trace", rec_trace, "write a one-row trace CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(in_path, roles_path, mut_path, out_path);

    if (*run) {
      recfair::ExperimentConfig cfg;
      try {
        cfg = recfair::load_experiment_config(run_config);
        if (!run_dataset.empty()) cfg.dataset_path = run_dataset;
        if (!run_schema.empty()) cfg.schema_path = run_schema;
        if (!run_strategy.empty()) cfg.strategy = recfair::strategy_from_name(run_strategy);
        if (run_splits > 0) cfg.splits = run_splits;
        if (run_seed >= 0) cfg.seed = static_cast<recfair::seed_t>(run_seed);
        if (!run_outdir.empty()) cfg.output_dir = run_outdir;
        if (const char* env = std::getenv("RECFAIR_OUTPUT_DIR")) cfg.output_dir = env;
        cfg.validate();
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      return cmd_run(cfg);
    }

    if (*sweep) {
      recfair::ExperimentConfig cfg;
      try {
        cfg = recfair::load_experiment_config(sweep_config);
        if (!sweep_outdir.empty()) cfg.output_dir = sweep_outdir;
        if (const char* env = std::getenv("RECFAIR_OUTPUT_DIR")) cfg.output_dir = env;
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      return cmd_sweep(cfg, c_values);
    }

    if (*demo) return cmd_demo_paradox(demo_spec, demo_out);
    if (*rec) return cmd_recourse(rec_model, rec_dataset, rec_schema, rec_row, rec_method,
                                  rec_seed, rec_trace);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}
