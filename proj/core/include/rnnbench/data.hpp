#pragma once

#include <array>
#include <string>

#include "rnnbench/model.hpp"

namespace rnnbench {

// Binary-vector sequences stored as sorted sets of active indices per step.
struct PianoRollDataset {
  int dim = 0;
  std::vector<std::vector<std::vector<int>>> sequences;
};

// Real-valued sample sequences plus the normalization record that produced
// them.
struct SignalDataset {
  std::vector<Vector> sequences;
  double sample_mean = 0.0;
  double sample_std = 1.0;
};

struct Split {
  std::vector<int> train, valid, test;
};

// Text format, one sequence per line:
//   pianoroll v1 dim=<d>
//   0,2;1;-
// Timesteps separated by ';', active indices by ',', '-' for a silent step.
PianoRollDataset load_pianoroll(const std::string& path);
void save_pianoroll(const std::string& path, const PianoRollDataset& ds);

// Text format:
//   signal v1 count=<n>
// then one sequence per line as space-separated reals. The binary variant
// has a 16-byte header (magic "RNNSIGB1", u32 sequence count, u32 zero) and
// per sequence a u32 length followed by little-endian real32 samples.
SignalDataset load_signal(const std::string& path);  // sniffs text vs binary
void save_signal_text(const std::string& path, const SignalDataset& ds);
void save_signal_binary(const std::string& path, const SignalDataset& ds);

Vector binarize_step(const std::vector<int>& active, int dim);

// Next-step prediction pairs for one sequence: inputs[t] = step t,
// targets[t] = step t+1, so T = length - 1.
SequenceBatchItem pianoroll_item(const PianoRollDataset& ds, int index);

// Slides a window of in_len samples predicting the next out_len; stride
// defaults to out_len so every sample is predicted exactly once.
SequenceBatchItem window_signal(const Vector& seq, int in_len = 20, int out_len = 10,
                                int stride = 0);

// Synthetic long-dependency probe. Sequences have period lag+1 with random
// first period, so under next-step pairing targets[t] copies inputs[t-lag]
// for t > lag (1-based) and is irreducibly random before that.
PianoRollDataset gen_lag_task(RngStream& rng, int num_seq, int T, int lag, int dim);

// Sum of random sinusoids plus noise at 10% of signal RMS, normalized to
// dataset-level zero mean and unit std.
SignalDataset gen_synthetic_signal(RngStream& rng, int num_seq, int len, int num_tones);

// Deterministic shuffled partition with largest-remainder rounding; all
// three splits are nonempty for count >= 3.
Split make_split(int count, std::uint64_t seed,
                 std::array<double, 3> fractions = {0.8, 0.1, 0.1});

// Mean/population-std over the samples of the selected sequences.
std::pair<double, double> signal_stats(const SignalDataset& ds,
                                       const std::vector<int>& indices);
void normalize_signal(SignalDataset& ds, double mean, double std);

}  // namespace rnnbench
