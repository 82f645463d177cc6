#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "rnnbench/data.hpp"
#include "rnnbench/model.hpp"
#include "rnnbench/optim.hpp"

namespace rnnbench {

enum class TaskKind { PianoRoll, Signal, Lag };

std::string to_string(TaskKind task);
TaskKind task_kind_from_string(const std::string& s);

// Full training-protocol description. Exactly one of hidden/budget must be
// set; every field has a config-file key and a CLI flag of the same name.
struct ExperimentConfig {
  TaskKind task = TaskKind::Lag;
  std::string data_path;  // empty -> synthesize via the task generator
  std::string name;       // dataset label in outputs; defaulted if empty
  CellKind cell = CellKind::Gru;
  int hidden = 0;
  long budget = 0;
  GruVariant gru_variant = GruVariant::CandidateGated;
  std::uint64_t seed = 1;
  int lr_candidates = 10;
  int max_epochs = 50;
  int patience = 20;
  double noise_std = 0.075;
  double clip_threshold = 1.0;
  double rmsprop_rho = 0.9;
  double rmsprop_eps = 1e-8;
  int gmm_components = 20;
  int window_in = 20;
  int window_out = 10;
  double init_scale = 1.0;
  double lr = 0.0;        // explicit learning rate; 0 -> run the search
  int search_epochs = 0;  // 0 -> max(5, max_epochs / 10)
  bool full_search = false;
  std::array<double, 3> split_fractions = {0.8, 0.1, 0.1};
  // generator knobs
  int gen_num_seq = 128;
  int gen_T = 64;
  int gen_lag = 20;
  int gen_dim = 4;
  int gen_len = 500;
  int gen_tones = 3;
  std::string out_dir = "out";
};

ExperimentConfig load_config_file(const std::string& path);
// Applies one key=value pair; unknown keys raise ParameterError.
void apply_config_kv(ExperimentConfig& config, const std::string& key,
                     const std::string& value);
void validate_config(const ExperimentConfig& config);

struct LearningCurveRecord {
  int epoch = 0;
  long updates = 0;
  double wall_clock_s = 0.0;
  double train_nll = 0.0;
  double valid_nll = 0.0;
  double lr = 0.0;
};

struct ResultRow {
  std::string dataset;
  CellKind cell = CellKind::Tanh;
  double train_nll = 0.0;
  double test_nll = 0.0;
  int hidden = 0;
  long param_count = 0;
  double best_lr = 0.0;
  std::uint64_t seed = 0;
};

// Datasets resolved into model-ready items.
struct PreparedData {
  std::string name;
  HeadKind head = HeadKind::Bernoulli;
  int d_in = 0;
  int d_out = 0;
  std::vector<SequenceBatchItem> train, valid, test;
};

PreparedData prepare_data(const ExperimentConfig& config);

// Configured hidden size, or the largest one fitting the parameter budget.
int resolve_model_size(const ExperimentConfig& config, int d_in);

struct TrainOutcome {
  SequenceModel best_model;
  double best_valid_nll = 0.0;
  int best_epoch = 0;
  std::vector<LearningCurveRecord> curve;
  long total_updates = 0;
  bool diverged = false;
  std::string divergence_note;
};

// One training run at a fixed learning rate: per update, draw fresh weight
// noise, take the exact BPTT gradient at the noisy point, clip its global
// norm, and apply RMSProp to the clean parameters. Validation after each
// epoch drives early stopping; the best-validation model is returned.
TrainOutcome run_training(const ExperimentConfig& config, const PreparedData& data,
                          double lr);

struct LrCandidateSummary {
  int index = 0;
  double lr = 0.0;
  double best_valid_nll = 0.0;
  int epochs_ran = 0;
  bool diverged = false;
};

struct LrSearchOutcome {
  double best_lr = 0.0;
  int best_index = -1;
  std::vector<LrCandidateSummary> candidates;
};

// Trains one reduced-budget run per log-uniform candidate and returns the
// one with the lowest validation NLL. Raises SearchError if every candidate
// diverges.
LrSearchOutcome run_lr_search(const ExperimentConfig& config, const PreparedData& data);

// Per-timestep average NLL of the clean model on a split.
double evaluate_split(const SequenceModel& model, const std::vector<SequenceBatchItem>& items);

ResultRow make_result_row(const ExperimentConfig& config, const PreparedData& data,
                          const SequenceModel& model, double best_lr);

// results.csv, curve_<run>.csv per curve, and a plain-text results grid.
// Reals are printed with 6 significant digits.
void emit_outputs(const std::vector<ResultRow>& rows,
                  const std::map<std::string, std::vector<LearningCurveRecord>>& curves,
                  const std::string& out_dir);

std::string format_real(double x);  // %.6g
std::string run_label(const ExperimentConfig& config, const PreparedData& data);

// Parsers for the emitted CSVs (round-trip checks and downstream tooling).
std::vector<ResultRow> parse_results_csv(const std::string& path);
std::vector<LearningCurveRecord> parse_curve_csv(const std::string& path);

}  // namespace rnnbench
