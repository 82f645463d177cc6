#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rnnbench/cli.hpp"
#include "rnnbench/harness.hpp"

using namespace rnnbench;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("rnnbench_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_lag_config() {
  ExperimentConfig config;
  config.task = TaskKind::Lag;
  config.cell = CellKind::Gru;
  config.hidden = 6;
  config.seed = 5;
  config.max_epochs = 3;
  config.patience = 5;
  config.lr_candidates = 2;
  config.noise_std = 0.01;
  config.gen_num_seq = 12;
  config.gen_T = 12;
  config.gen_lag = 2;
  config.gen_dim = 3;
  return config;
}

}  // namespace

TEST_CASE("config file parsing and overrides") {
  fs::path dir = temp_dir("config");
  fs::path path = dir / "exp.cfg";
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "task = lag\n"
        << "cell = lstm\n"
        << "budget = 5000\n"
        << "seed = 77\n"
        << "noise-std = 0.05\n"
        << "gru-variant = projection\n"
        << "\n";
  }
  ExperimentConfig config = load_config_file(path.string());
  CHECK(config.task == TaskKind::Lag);
  CHECK(config.cell == CellKind::Lstm);
  CHECK(config.budget == 5000);
  CHECK(config.seed == 77);
  CHECK(config.noise_std == doctest::Approx(0.05));
  CHECK(config.gru_variant == GruVariant::ProjectionGated);

  apply_config_kv(config, "cell", "gru");
  CHECK(config.cell == CellKind::Gru);
  CHECK_THROWS_AS(apply_config_kv(config, "no-such-key", "1"), ParameterError);
  CHECK_THROWS_AS(apply_config_kv(config, "seed", "abc"), ParameterError);

  validate_config(config);
  config.hidden = 10;  // both hidden and budget set
  CHECK_THROWS_AS(validate_config(config), ParameterError);
  fs::remove_all(dir);
}

TEST_CASE("resolve_model_size") {
  ExperimentConfig config;
  config.cell = CellKind::Lstm;
  config.budget = 169100;
  CHECK(resolve_model_size(config, 20) == 195);
  config.cell = CellKind::Tanh;
  config.budget = 168400;
  CHECK(resolve_model_size(config, 20) == 400);
  config.budget = 0;
  config.hidden = 33;
  CHECK(resolve_model_size(config, 20) == 33);
}

TEST_CASE("prepare_data on the lag task") {
  ExperimentConfig config = small_lag_config();
  PreparedData data = prepare_data(config);
  CHECK(data.head == HeadKind::Bernoulli);
  CHECK(data.d_in == 3);
  CHECK(data.d_out == 3);
  CHECK(data.train.size() + data.valid.size() + data.test.size() == 12);
  CHECK(!data.train.empty());
  CHECK(!data.valid.empty());
  CHECK(!data.test.empty());
  for (const auto& item : data.train) CHECK(item.inputs.size() == 11);

  // Same seed, same data.
  PreparedData again = prepare_data(config);
  CHECK(again.train.size() == data.train.size());
  for (size_t i = 0; i < data.train.size(); ++i)
    CHECK(again.train[i].inputs == data.train[i].inputs);
}

TEST_CASE("prepare_data on the synthetic signal task") {
  ExperimentConfig config;
  config.task = TaskKind::Signal;
  config.hidden = 4;
  config.seed = 9;
  config.gen_num_seq = 8;
  config.gen_len = 60;
  config.gen_tones = 2;
  PreparedData data = prepare_data(config);
  CHECK(data.head == HeadKind::Gmm);
  CHECK(data.d_in == 20);
  CHECK(data.d_out == 10);
  CHECK(data.train.size() + data.valid.size() + data.test.size() == 8);
  for (const auto& item : data.train) {
    CHECK(item.inputs.size() == 4);  // (60 - 20) / 10
    CHECK(item.inputs[0].size() == 20);
    CHECK(item.targets[0].size() == 10);
  }
}

TEST_CASE("run_training basics") {
  ExperimentConfig config = small_lag_config();
  PreparedData data = prepare_data(config);

  // max_epochs = 0: initialized model, empty curve.
  ExperimentConfig frozen = config;
  frozen.max_epochs = 0;
  TrainOutcome none = run_training(frozen, data, 1e-3);
  CHECK(none.curve.empty());
  CHECK(none.total_updates == 0);

  TrainOutcome run = run_training(config, data, 1e-3);
  CHECK(!run.diverged);
  REQUIRE(run.curve.size() == 3);
  for (size_t i = 0; i < run.curve.size(); ++i) {
    CHECK(run.curve[i].epoch == static_cast<int>(i) + 1);
    CHECK(run.curve[i].lr == 1e-3);
    if (i > 0) {
      CHECK(run.curve[i].updates > run.curve[i - 1].updates);
      CHECK(run.curve[i].wall_clock_s >= run.curve[i - 1].wall_clock_s);
    }
  }
  CHECK(run.total_updates ==
        static_cast<long>(config.max_epochs * data.train.size()));

  // Reported checkpoint matches the curve minimum.
  double curve_min = run.curve[0].valid_nll;
  for (const auto& rec : run.curve) curve_min = std::min(curve_min, rec.valid_nll);
  CHECK(run.best_valid_nll == doctest::Approx(curve_min).epsilon(1e-15));
  CHECK(evaluate_split(run.best_model, data.valid) ==
        doctest::Approx(run.best_valid_nll).epsilon(1e-12));

  // Determinism: identical config and seed give identical runs.
  TrainOutcome rerun = run_training(config, data, 1e-3);
  REQUIRE(rerun.curve.size() == run.curve.size());
  for (size_t i = 0; i < run.curve.size(); ++i) {
    CHECK(rerun.curve[i].train_nll == run.curve[i].train_nll);
    CHECK(rerun.curve[i].valid_nll == run.curve[i].valid_nll);
  }
}

TEST_CASE("run_lr_search picks the lowest validation NLL") {
  ExperimentConfig config = small_lag_config();
  config.lr_candidates = 3;
  PreparedData data = prepare_data(config);
  LrSearchOutcome search = run_lr_search(config, data);
  REQUIRE(search.candidates.size() == 3);
  REQUIRE(search.best_index >= 0);
  for (const auto& cand : search.candidates) {
    CHECK(cand.lr >= std::exp(-12.0));
    CHECK(cand.lr <= std::exp(-6.0));
    if (!cand.diverged)
      CHECK(search.candidates[search.best_index].best_valid_nll <=
            cand.best_valid_nll + 1e-15);
  }

  // Candidate list reproducible by seed.
  LrSearchOutcome again = run_lr_search(config, data);
  for (size_t i = 0; i < search.candidates.size(); ++i)
    CHECK(search.candidates[i].lr == again.candidates[i].lr);

  // Single candidate wins by default.
  config.lr_candidates = 1;
  LrSearchOutcome solo = run_lr_search(config, data);
  CHECK(solo.best_index == 0);
  CHECK(solo.best_lr == solo.candidates[0].lr);

  // Candidate runs honor the reduced epoch budget.
  config.lr_candidates = 2;
  config.search_epochs = 1;
  LrSearchOutcome quick = run_lr_search(config, data);
  for (const auto& cand : quick.candidates) CHECK(cand.epochs_ran == 1);
  config.search_epochs = 0;
  config.full_search = true;
  LrSearchOutcome full = run_lr_search(config, data);
  for (const auto& cand : full.candidates) CHECK(cand.epochs_ran == config.max_epochs);
}

TEST_CASE("emit_outputs and round-trip parsing") {
  fs::path dir = temp_dir("emit");
  std::vector<ResultRow> rows;
  ResultRow row;
  row.dataset = "lag20";
  row.cell = CellKind::Gru;
  row.train_nll = 1.234567;
  row.test_nll = 2.345678;
  row.hidden = 38;
  row.param_count = 4902;
  row.best_lr = 0.000123456;
  row.seed = 42;
  rows.push_back(row);

  std::map<std::string, std::vector<LearningCurveRecord>> curves;
  curves["lag20_gru_seed42"] = {{1, 10, 0.5, 2.0, 2.1, 1e-3}, {2, 20, 1.0, 1.5, 1.6, 1e-3}};
  emit_outputs(rows, curves, dir.string());

  auto parsed_rows = parse_results_csv((dir / "results.csv").string());
  REQUIRE(parsed_rows.size() == 1);
  CHECK(parsed_rows[0].dataset == "lag20");
  CHECK(parsed_rows[0].cell == CellKind::Gru);
  CHECK(parsed_rows[0].train_nll == doctest::Approx(1.23457).epsilon(1e-5));
  CHECK(parsed_rows[0].hidden == 38);
  CHECK(parsed_rows[0].param_count == 4902);
  CHECK(parsed_rows[0].seed == 42);

  auto parsed_curve = parse_curve_csv((dir / "curve_lag20_gru_seed42.csv").string());
  REQUIRE(parsed_curve.size() == 2);
  CHECK(parsed_curve[0].epoch == 1);
  CHECK(parsed_curve[1].updates == 20);
  CHECK(parsed_curve[1].wall_clock_s == doctest::Approx(1.0));

  // Curve header carries both x axes.
  std::string curve_text = slurp(dir / "curve_lag20_gru_seed42.csv");
  CHECK(curve_text.find("updates") != std::string::npos);
  CHECK(curve_text.find("wall_clock_s") != std::string::npos);

  // Empty rows still produce a header-only CSV.
  fs::path dir2 = temp_dir("emit_empty");
  emit_outputs({}, {}, dir2.string());
  CHECK(slurp(dir2 / "results.csv") ==
        "dataset,cell,train_nll,test_nll,hidden,params,best_lr,seed\n");

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("cli train/eval round trip with exit codes") {
  fs::path dir = temp_dir("cli");
  std::string out_dir = (dir / "out").string();

  int rc = cli_main({"train", "--task", "lag", "--cell", "gru", "--hidden", "6",
                     "--seed", "5", "--max-epochs", "2", "--lr", "0.001",
                     "--noise-std", "0.01", "--gen-num-seq", "12", "--gen-T", "12",
                     "--gen-lag", "2", "--gen-dim", "3", "--out-dir", out_dir});
  CHECK(rc == 0);
  CHECK(fs::exists(out_dir + "/results.csv"));
  CHECK(fs::exists(out_dir + "/table.txt"));
  CHECK(fs::exists(out_dir + "/curve_lag2_gru_seed5.csv"));
  CHECK(fs::exists(out_dir + "/lag2_gru_seed5.ckpt"));

  rc = cli_main({"eval", "--checkpoint", out_dir + "/lag2_gru_seed5.ckpt", "--task",
                 "lag", "--seed", "5", "--gen-num-seq", "12", "--gen-T", "12",
                 "--gen-lag", "2", "--gen-dim", "3"});
  CHECK(rc == 0);

  // Config errors exit with 2.
  CHECK(cli_main({"train", "--task", "lag", "--cell", "gru"}) == 2);  // no hidden/budget
  CHECK(cli_main({"train", "--no-such-flag", "1"}) == 2);
  CHECK(cli_main({"count-params", "--cell", "gru", "--hidden", "5", "--budget", "10",
                  "--d", "3"}) == 2);

  // Data errors exit with 3.
  CHECK(cli_main({"train", "--task", "pianoroll", "--data", "/nonexistent.prl",
                  "--cell", "gru", "--hidden", "4"}) == 3);

  fs::remove_all(dir);
}

TEST_CASE("cli gen-data and convert-pianoroll") {
  fs::path dir = temp_dir("gen");
  std::string prl = (dir / "lag.prl").string();
  int rc = cli_main({"gen-data", "--task", "lag", "--out", prl, "--gen-num-seq", "6",
                     "--gen-T", "10", "--gen-lag", "3", "--gen-dim", "4", "--seed", "1"});
  CHECK(rc == 0);
  PianoRollDataset ds = load_pianoroll(prl);
  CHECK(ds.dim == 4);
  CHECK(ds.sequences.size() == 6);

  std::string sig = (dir / "sig.txt").string();
  rc = cli_main({"gen-data", "--task", "signal", "--out", sig, "--gen-num-seq", "4",
                 "--gen-len", "50", "--seed", "2"});
  CHECK(rc == 0);
  CHECK(load_signal(sig).sequences.size() == 4);

  // JSON piano-roll conversion.
  fs::path json_path = dir / "roll.json";
  {
    std::ofstream out(json_path);
    out << R"({"dim": 4, "sequences": [[[0,2],[1],[]], [[3],[0,1,2]]]})";
  }
  std::string converted = (dir / "converted.prl").string();
  rc = cli_main({"convert-pianoroll", "--in", json_path.string(), "--out", converted});
  CHECK(rc == 0);
  PianoRollDataset conv = load_pianoroll(converted);
  CHECK(conv.dim == 4);
  REQUIRE(conv.sequences.size() == 2);
  CHECK(conv.sequences[0][0] == std::vector<int>{0, 2});
  CHECK(conv.sequences[0][2].empty());

  // Bad JSON exits with 3.
  fs::path bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << "{\"dim\": 2}";
  }
  CHECK(cli_main({"convert-pianoroll", "--in", bad.string(), "--out", converted}) == 3);

  fs::remove_all(dir);
}

TEST_CASE("full runs are byte-identical for equal config and seed") {
  fs::path dir = temp_dir("repro");
  auto run = [&](const std::string& out_dir) {
    int rc = cli_main({"train", "--task", "lag", "--cell", "lstm", "--budget", "800",
                       "--seed", "11", "--max-epochs", "2", "--lr-candidates", "2",
                       "--noise-std", "0.01", "--gen-num-seq", "10", "--gen-T", "10",
                       "--gen-lag", "2", "--gen-dim", "3", "--out-dir", out_dir});
    REQUIRE(rc == 0);
  };
  run((dir / "a").string());
  run((dir / "b").string());
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));
  fs::remove_all(dir);
}
