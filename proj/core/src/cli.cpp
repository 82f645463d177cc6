#include "rnnbench/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "rnnbench/checkpoint.hpp"
#include "rnnbench/data.hpp"
#include "rnnbench/gradcheck.hpp"
#include "rnnbench/harness.hpp"

namespace rnnbench {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct ConfigCli {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Every ExperimentConfig field is reachable both from the config file and
// as a --key value flag; flags win.
void add_config_flags(CLI::App* cmd, ConfigCli& cli) {
  cmd->add_option("--config", cli.config_file, "flat key=value config file");
  static const char* keys[] = {
      "task", "data", "name", "cell", "hidden", "budget", "gru-variant", "seed",
      "lr-candidates", "max-epochs", "patience", "noise-std", "clip", "rmsprop-rho",
      "rmsprop-eps", "gmm-components", "window-in", "window-out", "init-scale", "lr",
      "search-epochs", "full-search", "train-frac", "valid-frac", "test-frac",
      "gen-num-seq", "gen-T", "gen-lag", "gen-dim", "gen-len", "gen-tones", "out-dir"};
  for (const char* key : keys) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [&cli, key](const std::string& value) { cli.overrides.emplace_back(key, value); },
        std::string("config key '") + key + "'");
  }
}

ExperimentConfig resolve_config(const ConfigCli& cli) {
  ExperimentConfig config;
  if (!cli.config_file.empty()) config = load_config_file(cli.config_file);
  for (const auto& [key, value] : cli.overrides) apply_config_kv(config, key, value);
  return config;
}

int cmd_train(const ConfigCli& cli) {
  ExperimentConfig config = resolve_config(cli);
  validate_config(config);
  PreparedData data = prepare_data(config);

  double lr = config.lr;
  std::map<std::string, std::vector<LearningCurveRecord>> curves;
  if (lr <= 0.0) {
    LrSearchOutcome search = run_lr_search(config, data);
    lr = search.best_lr;
    std::cout << "lr-search: best candidate " << search.best_index << " with lr "
              << format_real(lr) << "\n";
  }

  TrainOutcome outcome = run_training(config, data, lr);
  if (outcome.diverged) {
    std::cerr << "training diverged: " << outcome.divergence_note << "\n";
    if (outcome.best_epoch > 0) {
      save_checkpoint(config.out_dir + "/" + run_label(config, data) + ".ckpt",
                      outcome.best_model);
      std::cerr << "last good checkpoint (epoch " << outcome.best_epoch
                << ") retained\n";
    }
    return kExitNumeric;
  }

  std::string label = run_label(config, data);
  curves[label] = outcome.curve;
  ResultRow row = make_result_row(config, data, outcome.best_model, lr);
  emit_outputs({row}, curves, config.out_dir);
  save_checkpoint(config.out_dir + "/" + label + ".ckpt", outcome.best_model);

  std::cout << "trained " << to_string(config.cell) << " (n=" << outcome.best_model.n
            << ", params=" << row.param_count << ") on " << data.name << "\n"
            << "best epoch " << outcome.best_epoch << ", valid NLL "
            << format_real(outcome.best_valid_nll) << ", train NLL "
            << format_real(row.train_nll) << ", test NLL " << format_real(row.test_nll)
            << "\n"
            << "outputs in " << config.out_dir << "\n";
  return kExitOk;
}

int cmd_lr_search(const ConfigCli& cli) {
  ExperimentConfig config = resolve_config(cli);
  validate_config(config);
  PreparedData data = prepare_data(config);
  LrSearchOutcome search = run_lr_search(config, data);

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  std::string path = config.out_dir + "/lr_search_" + run_label(config, data) + ".csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "candidate,lr,best_valid_nll,epochs,diverged\n";
  for (const auto& cand : search.candidates)
    out << cand.index << ',' << format_real(cand.lr) << ','
        << format_real(cand.best_valid_nll) << ',' << cand.epochs_ran << ','
        << (cand.diverged ? 1 : 0) << "\n";

  std::cout << "best lr " << format_real(search.best_lr) << " (candidate "
            << search.best_index << " of " << search.candidates.size() << ")\n"
            << "summaries in " << path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const ConfigCli& cli) {
  ExperimentConfig config = resolve_config(cli);
  PreparedData data = prepare_data(config);
  SequenceModel model = load_checkpoint(checkpoint_path);
  if (model.d_in != data.d_in || model.d_out != data.d_out)
    throw ContractError("checkpoint dimensions (" + std::to_string(model.d_in) + "->" +
                        std::to_string(model.d_out) + ") do not match data (" +
                        std::to_string(data.d_in) + "->" + std::to_string(data.d_out) +
                        ")");
  double train = evaluate_split(model, data.train);
  double valid = evaluate_split(model, data.valid);
  double test = evaluate_split(model, data.test);
  std::cout << "dataset " << data.name << ", cell " << to_string(model.kind)
            << " (n=" << model.n << ")\n"
            << "train NLL " << format_real(train) << "\n"
            << "valid NLL " << format_real(valid) << "\n"
            << "test  NLL " << format_real(test) << "\n";
  return kExitOk;
}

int cmd_gradcheck(int n, int d, int T, int seeds, double eps, double tol, int K) {
  struct Combo {
    CellKind cell;
    GruVariant variant;
    HeadKind head;
  };
  std::vector<Combo> combos;
  for (HeadKind head : {HeadKind::Bernoulli, HeadKind::Gmm}) {
    combos.push_back({CellKind::Tanh, GruVariant::CandidateGated, head});
    combos.push_back({CellKind::Lstm, GruVariant::CandidateGated, head});
    combos.push_back({CellKind::Gru, GruVariant::CandidateGated, head});
    combos.push_back({CellKind::Gru, GruVariant::ProjectionGated, head});
  }

  bool all_ok = true;
  for (const auto& combo : combos) {
    double worst = 0.0;
    std::string worst_param;
    for (int s = 1; s <= seeds; ++s) {
      RngStream rng(static_cast<std::uint64_t>(s) * 7919);
      SequenceModel model =
          build_model(combo.cell, combo.head, n, d, combo.head == HeadKind::Gmm ? 3 : d,
                      rng, 1.0, combo.variant, K);
      SequenceBatchItem item;
      for (int t = 0; t < T; ++t) {
        Vector x(d), y(model.d_out);
        for (double& v : x) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        if (combo.head == HeadKind::Bernoulli) {
          for (double& v : y) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        } else {
          for (double& v : y) v = rng.normal();
        }
        item.inputs.push_back(std::move(x));
        item.targets.push_back(std::move(y));
      }
      GradReport report = check_model_gradients(model, item, eps);
      if (report.max_rel_error > worst) {
        worst = report.max_rel_error;
        worst_param = report.worst_parameter;
      }
    }
    bool ok = worst < tol;
    all_ok = all_ok && ok;
    std::string name = to_string(combo.cell);
    if (combo.cell == CellKind::Gru) name += "/" + to_string(combo.variant);
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << " x " << to_string(combo.head)
              << "  max rel err " << format_real(worst)
              << (worst_param.empty() ? "" : " (" + worst_param + ")") << "\n";
  }
  return all_ok ? kExitOk : kExitNumeric;
}

int cmd_count_params(const std::string& cell_name, int hidden, long budget, int d) {
  CellKind cell = cell_kind_from_string(cell_name);
  if ((hidden > 0) == (budget > 0))
    throw ParameterError("give exactly one of --hidden / --budget");
  if (hidden > 0) {
    std::cout << count_params(cell, hidden, d) << "\n";
  } else {
    int n = param_budget_to_units(cell, d, budget);
    std::cout << "n=" << n << " params=" << count_params(cell, n, d) << "\n";
  }
  return kExitOk;
}

int cmd_gen_data(const ConfigCli& cli, const std::string& out_path, bool binary) {
  ExperimentConfig config = resolve_config(cli);
  RngStream rng = RngStream(config.seed).derive("data");
  switch (config.task) {
    case TaskKind::Lag: {
      PianoRollDataset ds =
          gen_lag_task(rng, config.gen_num_seq, config.gen_T, config.gen_lag,
                       config.gen_dim);
      save_pianoroll(out_path, ds);
      std::cout << "wrote " << ds.sequences.size() << " lag-" << config.gen_lag
                << " sequences (dim " << ds.dim << ") to " << out_path << "\n";
      return kExitOk;
    }
    case TaskKind::Signal: {
      SignalDataset ds = gen_synthetic_signal(rng, config.gen_num_seq, config.gen_len,
                                              config.gen_tones);
      if (binary)
        save_signal_binary(out_path, ds);
      else
        save_signal_text(out_path, ds);
      std::cout << "wrote " << ds.sequences.size() << " signal sequences (len "
                << config.gen_len << ") to " << out_path << "\n";
      return kExitOk;
    }
    case TaskKind::PianoRoll:
      throw ParameterError("gen-data supports the lag and signal tasks");
  }
  return kExitConfig;
}

// JSON layout {"dim": d, "sequences": [[[idx, ...], ...], ...]}, as produced
// by the converter recipe in the README.
int cmd_convert_pianoroll(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(in_path + ": " + e.what());
  }
  PianoRollDataset ds;
  try {
    ds.dim = doc.at("dim").get<int>();
    for (const auto& seq : doc.at("sequences")) {
      std::vector<std::vector<int>> steps;
      for (const auto& step : seq) {
        std::vector<int> active = step.get<std::vector<int>>();
        std::sort(active.begin(), active.end());
        steps.push_back(std::move(active));
      }
      ds.sequences.push_back(std::move(steps));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(in_path + ": expected {dim, sequences:[[[int,...],...],...]}: " +
                     e.what());
  }
  for (const auto& seq : ds.sequences) {
    if (seq.size() < 2)
      throw DataError(in_path + ": sequence with fewer than 2 timesteps");
    for (const auto& step : seq)
      for (int idx : step)
        if (idx < 0 || idx >= ds.dim)
          throw DataError(in_path + ": index " + std::to_string(idx) +
                          " out of range for dim " + std::to_string(ds.dim));
  }
  save_pianoroll(out_path, ds);
  std::cout << "converted " << ds.sequences.size() << " sequences (dim " << ds.dim
            << ") to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>("rnnbench"));
  for (auto& s : storage) argv.push_back(s.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Recurrent-unit sequence modeling benchmark (tanh / LSTM / GRU)"};
  app.require_subcommand(1);

  ConfigCli train_cli, search_cli, eval_cli, gen_cli;

  auto* train = app.add_subcommand(
      "train", "LR search (unless --lr is given) plus full training run");
  add_config_flags(train, train_cli);

  auto* search = app.add_subcommand("lr-search", "learning-rate search only");
  add_config_flags(search, search_cli);

  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  add_config_flags(eval, eval_cli);

  int gc_n = 6, gc_d = 4, gc_T = 5, gc_seeds = 10, gc_K = 3;
  double gc_eps = 1e-5, gc_tol = 1e-5;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference certification of BPTT");
  gradcheck->add_option("--n", gc_n, "hidden units");
  gradcheck->add_option("--d", gc_d, "input dimension");
  gradcheck->add_option("--T", gc_T, "sequence length");
  gradcheck->add_option("--seeds", gc_seeds, "random repetitions per combination");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step");
  gradcheck->add_option("--tol", gc_tol, "max allowed relative error");
  gradcheck->add_option("--gmm-components", gc_K, "mixture components");

  std::string cp_cell = "lstm";
  int cp_hidden = 0, cp_d = 20;
  long cp_budget = 0;
  auto* count = app.add_subcommand("count-params", "cell parameter counting");
  count->add_option("--cell", cp_cell, "tanh|lstm|gru");
  count->add_option("--hidden", cp_hidden, "hidden units");
  count->add_option("--budget", cp_budget, "parameter budget to match");
  count->add_option("--d", cp_d, "input dimension");

  std::string gen_out;
  bool gen_binary = false;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset file");
  gen->add_option("--out", gen_out, "output path")->required();
  gen->add_flag("--binary", gen_binary, "binary signal format");
  add_config_flags(gen, gen_cli);

  std::string conv_in, conv_out;
  auto* conv = app.add_subcommand("convert-pianoroll",
                                  "JSON piano-roll -> pianoroll v1 text");
  conv->add_option("--in", conv_in, "JSON input")->required();
  conv->add_option("--out", conv_out, "pianoroll v1 output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_cli);
    if (search->parsed()) return cmd_lr_search(search_cli);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_cli);
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_n, gc_d, gc_T, gc_seeds, gc_eps, gc_tol, gc_K);
    if (count->parsed()) return cmd_count_params(cp_cell, cp_hidden, cp_budget, cp_d);
    if (gen->parsed()) return cmd_gen_data(gen_cli, gen_out, gen_binary);
    if (conv->parsed()) return cmd_convert_pianoroll(conv_in, conv_out);
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SearchError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const OracleError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace rnnbench
