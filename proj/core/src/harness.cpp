#include "rnnbench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rnnbench {

namespace {

namespace fs = std::filesystem;

double parse_real(const std::string& s, const std::string& what) {
  try {
    size_t pos;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("bad real value for " + what + ": '" + s + "'");
  }
}

long parse_int(const std::string& s, const std::string& what) {
  try {
    size_t pos;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("bad integer value for " + what + ": '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParameterError("bad boolean value for " + what + ": '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::PianoRoll: return "pianoroll";
    case TaskKind::Signal: return "signal";
    case TaskKind::Lag: return "lag";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "pianoroll") return TaskKind::PianoRoll;
  if (s == "signal") return TaskKind::Signal;
  if (s == "lag") return TaskKind::Lag;
  throw ParameterError("unknown task: " + s);
}

void apply_config_kv(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "task") c.task = task_kind_from_string(value);
  else if (key == "data") c.data_path = value;
  else if (key == "name") c.name = value;
  else if (key == "cell") c.cell = cell_kind_from_string(value);
  else if (key == "hidden") c.hidden = static_cast<int>(parse_int(value, key));
  else if (key == "budget") c.budget = parse_int(value, key);
  else if (key == "gru-variant") c.gru_variant = gru_variant_from_string(value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "lr-candidates") c.lr_candidates = static_cast<int>(parse_int(value, key));
  else if (key == "max-epochs") c.max_epochs = static_cast<int>(parse_int(value, key));
  else if (key == "patience") c.patience = static_cast<int>(parse_int(value, key));
  else if (key == "noise-std") c.noise_std = parse_real(value, key);
  else if (key == "clip") c.clip_threshold = parse_real(value, key);
  else if (key == "rmsprop-rho") c.rmsprop_rho = parse_real(value, key);
  else if (key == "rmsprop-eps") c.rmsprop_eps = parse_real(value, key);
  else if (key == "gmm-components") c.gmm_components = static_cast<int>(parse_int(value, key));
  else if (key == "window-in") c.window_in = static_cast<int>(parse_int(value, key));
  else if (key == "window-out") c.window_out = static_cast<int>(parse_int(value, key));
  else if (key == "init-scale") c.init_scale = parse_real(value, key);
  else if (key == "lr") c.lr = parse_real(value, key);
  else if (key == "search-epochs") c.search_epochs = static_cast<int>(parse_int(value, key));
  else if (key == "full-search") c.full_search = parse_bool(value, key);
  else if (key == "train-frac") c.split_fractions[0] = parse_real(value, key);
  else if (key == "valid-frac") c.split_fractions[1] = parse_real(value, key);
  else if (key == "test-frac") c.split_fractions[2] = parse_real(value, key);
  else if (key == "gen-num-seq") c.gen_num_seq = static_cast<int>(parse_int(value, key));
  else if (key == "gen-T") c.gen_T = static_cast<int>(parse_int(value, key));
  else if (key == "gen-lag") c.gen_lag = static_cast<int>(parse_int(value, key));
  else if (key == "gen-dim") c.gen_dim = static_cast<int>(parse_int(value, key));
  else if (key == "gen-len") c.gen_len = static_cast<int>(parse_int(value, key));
  else if (key == "gen-tones") c.gen_tones = static_cast<int>(parse_int(value, key));
  else if (key == "out-dir") c.out_dir = value;
  else throw ParameterError("unknown config key: " + key);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string entry = line.substr(first, last - first + 1);
    auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = entry.substr(0, eq);
    std::string value = entry.substr(eq + 1);
    auto key_end = key.find_last_not_of(" \t");
    key = key.substr(0, key_end == std::string::npos ? 0 : key_end + 1);
    auto val_start = value.find_first_not_of(" \t");
    value = val_start == std::string::npos ? "" : value.substr(val_start);
    apply_config_kv(config, key, value);
  }
  return config;
}

void validate_config(const ExperimentConfig& c) {
  if ((c.hidden > 0) == (c.budget > 0))
    throw ParameterError("exactly one of hidden / budget must be set");
  if (c.hidden < 0 || c.budget < 0) throw ParameterError("hidden/budget must be positive");
  if (c.lr_candidates < 1) throw ParameterError("lr-candidates must be >= 1");
  if (c.max_epochs < 0) throw ParameterError("max-epochs must be >= 0");
  if (c.patience < 0) throw ParameterError("patience must be >= 0");
  if (c.noise_std < 0.0) throw ParameterError("noise-std must be >= 0");
  if (c.clip_threshold <= 0.0) throw ParameterError("clip must be > 0");
  if (c.rmsprop_rho <= 0.0 || c.rmsprop_rho >= 1.0)
    throw ParameterError("rmsprop-rho must be in (0,1)");
  if (c.rmsprop_eps <= 0.0) throw ParameterError("rmsprop-eps must be > 0");
  if (c.gmm_components < 1) throw ParameterError("gmm-components must be >= 1");
  if (c.window_in < 1 || c.window_out < 1) throw ParameterError("window sizes must be >= 1");
  if (c.init_scale <= 0.0) throw ParameterError("init-scale must be > 0");
  if (c.lr < 0.0) throw ParameterError("lr must be >= 0");
  if (c.task == TaskKind::PianoRoll && c.data_path.empty())
    throw ParameterError("pianoroll task needs a data file (use gen-data for lag/signal)");
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData data;
  RngStream data_rng = RngStream(config.seed).derive("data");

  std::vector<SequenceBatchItem> items;
  switch (config.task) {
    case TaskKind::PianoRoll: {
      PianoRollDataset ds = load_pianoroll(config.data_path);
      data.head = HeadKind::Bernoulli;
      data.d_in = data.d_out = ds.dim;
      data.name = config.name.empty() ? fs::path(config.data_path).stem().string()
                                      : config.name;
      for (size_t i = 0; i < ds.sequences.size(); ++i)
        items.push_back(pianoroll_item(ds, static_cast<int>(i)));
      break;
    }
    case TaskKind::Lag: {
      PianoRollDataset ds;
      if (config.data_path.empty()) {
        ds = gen_lag_task(data_rng, config.gen_num_seq, config.gen_T, config.gen_lag,
                          config.gen_dim);
      } else {
        ds = load_pianoroll(config.data_path);
      }
      data.head = HeadKind::Bernoulli;
      data.d_in = data.d_out = ds.dim;
      data.name = config.name.empty() ? "lag" + std::to_string(config.gen_lag)
                                      : config.name;
      for (size_t i = 0; i < ds.sequences.size(); ++i)
        items.push_back(pianoroll_item(ds, static_cast<int>(i)));
      break;
    }
    case TaskKind::Signal: {
      SignalDataset ds;
      if (config.data_path.empty()) {
        ds = gen_synthetic_signal(data_rng, config.gen_num_seq, config.gen_len,
                                  config.gen_tones);
      } else {
        ds = load_signal(config.data_path);
      }
      data.head = HeadKind::Gmm;
      data.d_in = config.window_in;
      data.d_out = config.window_out;
      data.name = config.name.empty()
                      ? (config.data_path.empty()
                             ? "synthsig"
                             : fs::path(config.data_path).stem().string())
                      : config.name;
      Split split = make_split(static_cast<int>(ds.sequences.size()),
                               RngStream(config.seed).derive("split").seed(),
                               config.split_fractions);
      // Normalize with train-split statistics only.
      auto [mean, std] = signal_stats(ds, split.train);
      if (std <= 0.0) throw DataError("signal data has zero variance on the train split");
      normalize_signal(ds, mean, std);
      for (int i : split.train)
        data.train.push_back(window_signal(ds.sequences[i], config.window_in,
                                           config.window_out));
      for (int i : split.valid)
        data.valid.push_back(window_signal(ds.sequences[i], config.window_in,
                                           config.window_out));
      for (int i : split.test)
        data.test.push_back(window_signal(ds.sequences[i], config.window_in,
                                          config.window_out));
      return data;
    }
  }

  Split split = make_split(static_cast<int>(items.size()),
                           RngStream(config.seed).derive("split").seed(),
                           config.split_fractions);
  for (int i : split.train) data.train.push_back(items[i]);
  for (int i : split.valid) data.valid.push_back(items[i]);
  for (int i : split.test) data.test.push_back(items[i]);
  return data;
}

int resolve_model_size(const ExperimentConfig& config, int d_in) {
  if (config.hidden > 0) return config.hidden;
  return param_budget_to_units(config.cell, d_in, config.budget);
}

TrainOutcome run_training(const ExperimentConfig& config, const PreparedData& data,
                          double lr) {
  if (lr <= 0.0) throw ParameterError("run_training: lr must be > 0");
  if (data.train.empty() || data.valid.empty())
    throw DataError("run_training: empty train or valid split");

  RngStream init_rng = RngStream(config.seed).derive("init");
  RngStream noise_rng = RngStream(config.seed).derive("noise");
  RngStream shuffle_rng = RngStream(config.seed).derive("shuffle");

  int n = resolve_model_size(config, data.d_in);
  SequenceModel model = build_model(config.cell, data.head, n, data.d_in, data.d_out,
                                    init_rng, config.init_scale, config.gru_variant,
                                    config.gmm_components);

  TrainOutcome out;
  out.best_model = model;
  out.best_valid_nll = std::numeric_limits<double>::infinity();
  if (config.max_epochs == 0) return out;

  RmsPropState opt = make_rmsprop(model, lr, config.rmsprop_rho, config.rmsprop_eps);
  EarlyStopState stopper;
  stopper.patience = config.patience;

  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);

    double epoch_nll = 0.0;
    long epoch_steps = 0;
    for (size_t i : order) {
      SequenceModel noisy = perturb_weights(model, noise_rng, config.noise_std);
      auto [grads, nll] = bptt(noisy, data.train[i]);
      if (!std::isfinite(nll)) {
        out.diverged = true;
        out.divergence_note = "non-finite training NLL at epoch " +
                              std::to_string(epoch) + ", update " +
                              std::to_string(out.total_updates + 1);
        return out;
      }
      clip_global_norm(grads, config.clip_threshold);
      rmsprop_step(opt, model, grads);
      ++out.total_updates;
      epoch_nll += nll;
      epoch_steps += static_cast<long>(data.train[i].inputs.size());
    }

    double valid_nll = average_nll(model, data.valid);
    if (!std::isfinite(valid_nll)) {
      out.diverged = true;
      out.divergence_note = "non-finite validation NLL at epoch " + std::to_string(epoch);
      return out;
    }

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    out.curve.push_back(LearningCurveRecord{epoch, out.total_updates, wall,
                                            epoch_nll / epoch_steps, valid_nll, lr});

    // Strict minimum tracking, independent of the early-stop improvement
    // threshold, so the reported model always matches the curve minimum.
    if (valid_nll < out.best_valid_nll) {
      out.best_valid_nll = valid_nll;
      out.best_model = model;
      out.best_epoch = epoch;
    }
    if (early_stop_update(stopper, valid_nll, epoch) == StopDecision::Stop) break;
  }
  return out;
}

LrSearchOutcome run_lr_search(const ExperimentConfig& config, const PreparedData& data) {
  RngStream lr_rng = RngStream(config.seed).derive("lr");
  LrSearchOutcome out;
  out.candidates.reserve(config.lr_candidates);

  ExperimentConfig probe = config;
  if (!config.full_search)
    probe.max_epochs = config.search_epochs > 0
                           ? config.search_epochs
                           : std::max(5, config.max_epochs / 10);

  for (int i = 0; i < config.lr_candidates; ++i) {
    double lr = sample_log_uniform_lr(lr_rng);
    TrainOutcome run = run_training(probe, data, lr);
    bool usable = !run.curve.empty() && std::isfinite(run.best_valid_nll);
    out.candidates.push_back(LrCandidateSummary{
        i, lr, usable ? run.best_valid_nll : std::numeric_limits<double>::infinity(),
        static_cast<int>(run.curve.size()), run.diverged});
    if (usable && !run.diverged &&
        (out.best_index < 0 ||
         run.best_valid_nll < out.candidates[out.best_index].best_valid_nll)) {
      out.best_index = i;
      out.best_lr = lr;
    }
  }
  if (out.best_index < 0) {
    std::string listing;
    for (const auto& cand : out.candidates)
      listing += (listing.empty() ? "" : ", ") + format_real(cand.lr);
    throw SearchError("every learning-rate candidate diverged: " + listing);
  }
  return out;
}

double evaluate_split(const SequenceModel& model,
                      const std::vector<SequenceBatchItem>& items) {
  return average_nll(model, items);
}

ResultRow make_result_row(const ExperimentConfig& config, const PreparedData& data,
                          const SequenceModel& model, double best_lr) {
  ResultRow row;
  row.dataset = data.name;
  row.cell = config.cell;
  row.train_nll = evaluate_split(model, data.train);
  row.test_nll = evaluate_split(model, data.test);
  row.hidden = model.n;
  row.param_count = count_params(config.cell, model.n, data.d_in);
  row.best_lr = best_lr;
  row.seed = config.seed;
  return row;
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string run_label(const ExperimentConfig& config, const PreparedData& data) {
  return data.name + "_" + to_string(config.cell) + "_seed" + std::to_string(config.seed);
}

void emit_outputs(const std::vector<ResultRow>& rows,
                  const std::map<std::string, std::vector<LearningCurveRecord>>& curves,
                  const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  {
    std::string path = out_dir + "/results.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "dataset,cell,train_nll,test_nll,hidden,params,best_lr,seed\n";
    for (const auto& row : rows)
      out << row.dataset << ',' << to_string(row.cell) << ','
          << format_real(row.train_nll) << ',' << format_real(row.test_nll) << ','
          << row.hidden << ',' << row.param_count << ',' << format_real(row.best_lr)
          << ',' << row.seed << "\n";
    if (!out) throw IoError("failed writing " + path);
  }

  for (const auto& [label, curve] : curves) {
    std::string path = out_dir + "/curve_" + label + ".csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,updates,wall_clock_s,train_nll,valid_nll,lr\n";
    for (const auto& rec : curve)
      out << rec.epoch << ',' << rec.updates << ',' << format_real(rec.wall_clock_s)
          << ',' << format_real(rec.train_nll) << ',' << format_real(rec.valid_nll)
          << ',' << format_real(rec.lr) << "\n";
    if (!out) throw IoError("failed writing " + path);
  }

  {
    // Table-2-style grid: one block per dataset, train/test rows, one
    // column per cell type.
    std::string path = out_dir + "/table.txt";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    std::vector<std::string> datasets;
    for (const auto& row : rows)
      if (std::find(datasets.begin(), datasets.end(), row.dataset) == datasets.end())
        datasets.push_back(row.dataset);
    const CellKind cells[] = {CellKind::Tanh, CellKind::Gru, CellKind::Lstm};
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-16s %-6s %12s %12s %12s\n", "dataset", "", "tanh",
                  "GRU", "LSTM");
    out << buf;
    for (const auto& ds : datasets) {
      for (const char* metric : {"train", "test"}) {
        std::string cols[3];
        for (int c = 0; c < 3; ++c) {
          cols[c] = "-";
          for (const auto& row : rows) {
            if (row.dataset != ds || row.cell != cells[c]) continue;
            cols[c] = format_real(metric == std::string("train") ? row.train_nll
                                                                 : row.test_nll);
          }
        }
        std::snprintf(buf, sizeof(buf), "%-16s %-6s %12s %12s %12s\n",
                      metric == std::string("train") ? ds.c_str() : "", metric,
                      cols[0].c_str(), cols[1].c_str(), cols[2].c_str());
        out << buf;
      }
    }
    if (!out) throw IoError("failed writing " + path);
  }
}

std::vector<ResultRow> parse_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (line != "dataset,cell,train_nll,test_nll,hidden,params,best_lr,seed")
    throw ParseError(path + ": unexpected results header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 8)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 8 fields");
    ResultRow row;
    row.dataset = fields[0];
    row.cell = cell_kind_from_string(fields[1]);
    row.train_nll = parse_real(fields[2], "train_nll");
    row.test_nll = parse_real(fields[3], "test_nll");
    row.hidden = static_cast<int>(parse_int(fields[4], "hidden"));
    row.param_count = parse_int(fields[5], "params");
    row.best_lr = parse_real(fields[6], "best_lr");
    row.seed = static_cast<std::uint64_t>(parse_int(fields[7], "seed"));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LearningCurveRecord> parse_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (line != "epoch,updates,wall_clock_s,train_nll,valid_nll,lr")
    throw ParseError(path + ": unexpected curve header");
  std::vector<LearningCurveRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 6)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    LearningCurveRecord rec;
    rec.epoch = static_cast<int>(parse_int(fields[0], "epoch"));
    rec.updates = parse_int(fields[1], "updates");
    rec.wall_clock_s = parse_real(fields[2], "wall_clock_s");
    rec.train_nll = parse_real(fields[3], "train_nll");
    rec.valid_nll = parse_real(fields[4], "valid_nll");
    rec.lr = parse_real(fields[5], "lr");
    records.push_back(rec);
  }
  return records;
}

}  // namespace rnnbench
