#include "rnnbench/optim.hpp"

#include <cmath>

namespace rnnbench {

RmsPropState make_rmsprop(const SequenceModel& model, double lr, double rho, double eps) {
  if (lr <= 0.0) throw ParameterError("rmsprop: lr must be > 0");
  if (rho <= 0.0 || rho >= 1.0) throw ParameterError("rmsprop: rho must be in (0,1)");
  if (eps <= 0.0) throw ParameterError("rmsprop: eps must be > 0");
  return RmsPropState{rho, eps, lr, zero_gradients(model)};
}

double clip_global_norm(Gradients& grads, double threshold) {
  if (threshold <= 0.0) throw ParameterError("clip_global_norm: threshold must be > 0");
  double norm = global_norm(grads);
  // The slack keeps clipping bitwise idempotent: a clipped tree whose
  // recomputed norm lands a few ulps above the threshold is left alone.
  if (norm > threshold * (1.0 + 1e-12)) {
    double scale = threshold / norm;
    for (auto& view : tensor_views(grads))
      for (double& g : view.data) g *= scale;
  }
  return norm;
}

void rmsprop_step(RmsPropState& state, SequenceModel& model, const Gradients& grads) {
  auto params = tensor_views(model);
  auto gs = tensor_views(grads);
  auto accums = tensor_views(state.accum);
  if (params.size() != gs.size() || params.size() != accums.size())
    throw ContractError("rmsprop_step: tensor trees differ in layout");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].data.size() != gs[i].data.size() ||
        params[i].data.size() != accums[i].data.size() || params[i].name != gs[i].name)
      throw ContractError("rmsprop_step: tensor " + params[i].name +
                          " is not shape-congruent");
    auto p = params[i].data;
    auto g = gs[i].data;
    auto a = accums[i].data;
    for (size_t j = 0; j < p.size(); ++j) {
      a[j] = state.rho * a[j] + (1.0 - state.rho) * g[j] * g[j];
      p[j] -= state.lr * g[j] / std::sqrt(a[j] + state.eps);
    }
  }
}

double sample_log_uniform_lr(RngStream& rng, double lo, double hi) {
  if (lo >= hi) throw ParameterError("sample_log_uniform_lr: lo must be < hi");
  return std::exp(rng.uniform(lo, hi));
}

StopDecision early_stop_update(EarlyStopState& state, double valid_nll, int epoch) {
  if (valid_nll < state.best_valid - 1e-9) {
    state.best_valid = valid_nll;
    state.best_epoch = epoch;
    state.epochs_since_best = 0;
    return StopDecision::Continue;
  }
  ++state.epochs_since_best;
  return state.epochs_since_best > state.patience ? StopDecision::Stop
                                                  : StopDecision::Continue;
}

}  // namespace rnnbench
