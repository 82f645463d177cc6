#pragma once

#include <limits>

#include "rnnbench/model.hpp"

namespace rnnbench {

struct RmsPropState {
  double rho = 0.9;
  double eps = 1e-8;
  double lr = 1e-3;
  Gradients accum;  // running mean-square, congruent with the model
};

RmsPropState make_rmsprop(const SequenceModel& model, double lr, double rho = 0.9,
                          double eps = 1e-8);

// Rescales the whole gradient tree so its global norm does not exceed the
// threshold; gradients at or below it are untouched. Returns the pre-clip
// norm.
double clip_global_norm(Gradients& grads, double threshold = 1.0);

// accum <- rho accum + (1 - rho) g^2;  param <- param - lr g / sqrt(accum + eps)
void rmsprop_step(RmsPropState& state, SequenceModel& model, const Gradients& grads);

// lr = e^u with u ~ Uniform(lo, hi); natural exponent.
double sample_log_uniform_lr(RngStream& rng, double lo = -12.0, double hi = -6.0);

enum class StopDecision { Continue, Stop };

struct EarlyStopState {
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int patience = 20;
  int epochs_since_best = 0;
};

// Improvement means valid_nll < best - 1e-9; Stop once the non-improvement
// counter exceeds the patience.
StopDecision early_stop_update(EarlyStopState& state, double valid_nll, int epoch);

}  // namespace rnnbench
