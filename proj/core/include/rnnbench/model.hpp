#pragma once

#include "rnnbench/cells.hpp"
#include "rnnbench/heads.hpp"

namespace rnnbench {

// A generative sequence model: one recurrent cell plus one output head.
// h_0 (and c_0 for LSTM) is the zero vector.
struct SequenceModel {
  CellKind kind = CellKind::Tanh;
  GruVariant gru_variant = GruVariant::CandidateGated;
  int n = 0;
  int d_in = 0;
  int d_out = 0;
  CellParams cell;
  OutputHead head;
};

// Same shape tree as the model parameters.
struct Gradients {
  CellParams cell;
  OutputHead head;
};

// One training sequence: per-step input and prediction target.
struct SequenceBatchItem {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;
};

struct ForwardPass {
  double total_nll = 0.0;
  std::vector<double> per_step;
  std::vector<StepTrace> cell_traces;   // empty unless traces were requested
  std::vector<HeadTrace> head_traces;
};

SequenceModel build_model(CellKind kind, HeadKind head, int n, int d_in, int d_out,
                          RngStream& rng, double scale = 1.0,
                          GruVariant variant = GruVariant::CandidateGated,
                          int gmm_components = 20);
SequenceModel make_zero_model(CellKind kind, HeadKind head, int n, int d_in, int d_out,
                              GruVariant variant = GruVariant::CandidateGated,
                              int gmm_components = 20);

Gradients zero_gradients(const SequenceModel& model);

ForwardPass forward_nll(const SequenceModel& model, const SequenceBatchItem& item,
                        bool keep_traces = false);
// Same unroll started from a caller-supplied state; c0 is ignored unless the
// cell is an LSTM.
ForwardPass forward_nll_from_state(const SequenceModel& model,
                                   const SequenceBatchItem& item, const Vector& h0,
                                   const Vector& c0, bool keep_traces = false);

// Exact untruncated backpropagation through time over the full unroll.
std::pair<Gradients, double> bptt(const SequenceModel& model,
                                  const SequenceBatchItem& item);

// Copy with i.i.d. N(0, std^2) added to every weight matrix and peephole
// diagonal; biases are left alone. std = 0 returns a bit-identical copy.
SequenceModel perturb_weights(const SequenceModel& model, RngStream& rng,
                              double std = 0.075);

// Per-timestep nats: sum of sequence NLLs over the total number of steps.
double average_nll(const SequenceModel& model, const std::vector<SequenceBatchItem>& items);

std::vector<TensorView> tensor_views(SequenceModel& model);
std::vector<ConstTensorView> tensor_views(const SequenceModel& model);
std::vector<TensorView> tensor_views(Gradients& grads);
std::vector<ConstTensorView> tensor_views(const Gradients& grads);

double global_norm(const Gradients& grads);
long total_param_count(const SequenceModel& model);  // cell + head

}  // namespace rnnbench
