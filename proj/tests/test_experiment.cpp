#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "recfair/experiment.hpp"
#include "recfair/misob.hpp"
#include "support/adult_like.hpp"

using namespace recfair;

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small, fast configuration on generated census-style data.
ExperimentConfig small_config(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / "recfair_tests" / tag;
  fs::create_directories(dir);

  ExperimentConfig cfg;
  cfg.dataset_path = (dir / "data.csv").string();
  cfg.schema_path = (dir / "schema.json").string();
  recfair::testing::write_adult_like_csv(cfg.dataset_path, 400, 2024);
  save_schema(recfair::testing::adult_like_schema(), cfg.schema_path);

  cfg.sensitive_sets = {{"gender"}};
  cfg.model.kind = ModelKind::Logistic;
  cfg.model.hidden.clear();
  cfg.strategy = Strategy::None;
  cfg.recourse_methods = {MethodKind::GrowingSpheres};
  cfg.gs.samples_per_shell = 40;
  cfg.gs.max_shells = 12;
  cfg.gs.shrink_steps = 4;
  cfg.train.epochs = 3;
  cfg.splits = 1;
  cfg.test_fraction = 0.3;
  cfg.seed = 5;
  cfg.output_dir = (dir / "out").string();
  return cfg;
}

}  // namespace

TEST_CASE("single split produces one row with zero stds") {
  ExperimentConfig cfg = small_config("single");
  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.table.rows.size() == 1);
  const AggregateRow& row = result.table.rows[0];
  CHECK(row.method == "gs");
  CHECK(row.strategy == "none");
  CHECK(row.attrs == "gender");
  CHECK(row.accuracy.std == 0.0);
  CHECK(row.burden_worst.std == 0.0);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "split_0" / "report_gs_gender.json"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "aggregate.csv"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "config.json"));
}

TEST_CASE("two splits give non-negative stds and per-split reports") {
  ExperimentConfig cfg = small_config("two");
  cfg.splits = 2;
  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.table.rows.size() == 1);
  CHECK(result.table.rows[0].accuracy.std >= 0.0);
  CHECK(result.splits.size() == 2);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "split_1" / "report_gs_gender.json"));
}

TEST_CASE("reruns with the same master seed are byte-identical") {
  ExperimentConfig cfg = small_config("det_a");
  cfg.splits = 2;
  run_experiment(cfg);
  const std::string first = read_file(fs::path(cfg.output_dir) / "aggregate.csv");

  ExperimentConfig cfg2 = small_config("det_b");
  cfg2.splits = 2;
  run_experiment(cfg2);
  const std::string second = read_file(fs::path(cfg2.output_dir) / "aggregate.csv");
  CHECK(first == second);

  // Per-split artifacts too.
  CHECK(read_file(fs::path(cfg.output_dir) / "split_0" / "report_gs_gender.json") ==
        read_file(fs::path(cfg2.output_dir) / "split_0" / "report_gs_gender.json"));
}

TEST_CASE("aggregate means match the persisted per-split reports") {
  ExperimentConfig cfg = small_config("agg");
  cfg.splits = 3;
  const ExperimentResult result = run_experiment(cfg);

  std::vector<double> acc, burden_worst;
  for (int s = 0; s < cfg.splits; ++s) {
    const FairnessReport rep = load_report(
        (fs::path(cfg.output_dir) / ("split_" + std::to_string(s)) / "report_gs_gender.json")
            .string());
    acc.push_back(rep.overall_accuracy);
    burden_worst.push_back(rep.burden.worst);
  }
  const MeanStd acc_ms = mean_std(acc);
  const MeanStd bw_ms = mean_std(burden_worst);
  CHECK(std::abs(acc_ms.mean - result.table.rows[0].accuracy.mean) < 1e-12);
  CHECK(std::abs(acc_ms.std - result.table.rows[0].accuracy.std) < 1e-12);
  CHECK(std::abs(bw_ms.mean - result.table.rows[0].burden_worst.mean) < 1e-12);
  CHECK(std::abs(bw_ms.std - result.table.rows[0].burden_worst.std) < 1e-12);
}

TEST_CASE("training under misob and none never reads the sensitive table") {
  const Dataset ds = recfair::testing::make_adult_like(300, 31);
  const std::uint64_t before = ds.sensitive_read_count();

  ModelSpec spec;
  spec.kind = ModelKind::Logistic;
  spec.hidden.clear();
  TrainConfig train;
  train.epochs = 2;
  train.seed = 3;
  const Model base = train_weighted(init_model(spec, static_cast<int>(ds.dim()), 3),
                                    ds.features(), ds.labels(), Vector::Ones(ds.rows()), train);
  (void)base;

  MisobConfig mcfg;
  mcfg.warmup_epochs = 1;
  mcfg.rounds = 1;
  mcfg.train = train;
  mcfg.recourse.method = MethodKind::Wachter;
  misob_train(ds.features(), ds.labels(), spec, mcfg, ds.schema().mutability_mask());

  CHECK(ds.sensitive_read_count() == before);

  // Evaluation legitimately reads it.
  enumerate_groups(ds, {"gender"});
  CHECK(ds.sensitive_read_count() > before);
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig cfg = small_config("roundtrip");
  cfg.strategy = Strategy::Misob;
  cfg.misob_c = 0.45;
  cfg.recourse_methods = {MethodKind::Wachter, MethodKind::GrowingSpheres};
  cfg.sensitive_sets = {{"race"}, {"race", "gender"}};

  cfg.misob_round_learning_rate = 0.0003;
  cfg.misob_round_batch_size = 1 << 20;
  cfg.misob_per_batch_burdens = true;
  cfg.misob_burden_method = "wt";
  cfg.balance = true;
  cfg.flip_labels = true;

  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(cfg));
  CHECK(back.strategy == Strategy::Misob);
  CHECK(back.misob_c == 0.45);
  CHECK(back.misob_round_learning_rate == 0.0003);
  CHECK(back.misob_round_batch_size == 1 << 20);
  CHECK(back.misob_per_batch_burdens);
  CHECK(back.misob_burden_method == "wt");
  CHECK(back.recourse_methods == cfg.recourse_methods);
  CHECK(back.sensitive_sets == cfg.sensitive_sets);
  CHECK(back.gs.samples_per_shell == cfg.gs.samples_per_shell);
  CHECK(back.train.epochs == cfg.train.epochs);
  CHECK(back.seed == cfg.seed);
  CHECK(back.balance);
  CHECK(back.flip_labels);
}

TEST_CASE("intersectional attribute sets run end to end") {
  ExperimentConfig cfg = small_config("intersect");
  cfg.sensitive_sets = {{"race"}, {"race", "gender"}};
  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.table.rows.size() == 2);
  CHECK(result.table.rows[1].attrs == "race+gender");

  const FairnessReport rep = load_report(
      (fs::path(cfg.output_dir) / "split_0" / "report_gs_race+gender.json").string());
  CHECK(rep.groups.size() >= 3);  // observed combinations only
  Index covered = 0;
  for (const auto& g : rep.groups) {
    CHECK(g.group.parts.size() == 2);
    covered += g.n;
  }
  // Groups partition the test split.
  CHECK(covered == static_cast<Index>(std::llround(400 * cfg.test_fraction)));
}

TEST_CASE("sweep rejects duplicate C values") {
  const ExperimentConfig cfg = small_config("sweep_dup");
  CHECK_THROWS_AS(sweep_c(cfg, {0.1, 0.1}), std::invalid_argument);
}

TEST_CASE("config validation rejects broken settings") {
  ExperimentConfig cfg = small_config("invalid");
  SUBCASE("no splits") {
    cfg.splits = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("bad fraction") {
    cfg.test_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("empty attribute set") {
    cfg.sensitive_sets = {{}};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}
