#include "rnnbench/model.hpp"

#include <cmath>

namespace rnnbench {

namespace {

OutputHead make_head(HeadKind head, int n, int d_out, int K, RngStream* rng, double scale) {
  switch (head) {
    case HeadKind::Bernoulli:
      return rng ? OutputHead{init_bernoulli_head(n, d_out, *rng, scale)}
                 : OutputHead{zero_bernoulli_head(n, d_out)};
    case HeadKind::Gmm:
      return rng ? OutputHead{init_gmm_head(n, d_out, K, *rng, scale)}
                 : OutputHead{zero_gmm_head(n, d_out, K)};
  }
  throw ParameterError("make_head: bad kind");
}

void check_item(const SequenceModel& model, const SequenceBatchItem& item) {
  if (item.inputs.empty()) throw DataError("empty sequence");
  if (item.inputs.size() != item.targets.size())
    throw DataError("sequence has " + std::to_string(item.inputs.size()) +
                    " inputs but " + std::to_string(item.targets.size()) + " targets");
  for (const auto& x : item.inputs)
    if (static_cast<int>(x.size()) != model.d_in)
      throw ShapeError("input step has length " + std::to_string(x.size()) +
                       ", model d_in is " + std::to_string(model.d_in));
  for (const auto& t : item.targets)
    if (static_cast<int>(t.size()) != model.d_out)
      throw ShapeError("target step has length " + std::to_string(t.size()) +
                       ", model d_out is " + std::to_string(model.d_out));
}

}  // namespace

SequenceModel build_model(CellKind kind, HeadKind head, int n, int d_in, int d_out,
                          RngStream& rng, double scale, GruVariant variant,
                          int gmm_components) {
  SequenceModel m;
  m.kind = kind;
  m.gru_variant = variant;
  m.n = n;
  m.d_in = d_in;
  m.d_out = d_out;
  m.cell = init_params(kind, n, d_in, rng, scale);
  m.head = make_head(head, n, d_out, gmm_components, &rng, scale);
  return m;
}

SequenceModel make_zero_model(CellKind kind, HeadKind head, int n, int d_in, int d_out,
                              GruVariant variant, int gmm_components) {
  SequenceModel m;
  m.kind = kind;
  m.gru_variant = variant;
  m.n = n;
  m.d_in = d_in;
  m.d_out = d_out;
  m.cell = zero_params(kind, n, d_in);
  m.head = make_head(head, n, d_out, gmm_components, nullptr, 1.0);
  return m;
}

Gradients zero_gradients(const SequenceModel& model) {
  Gradients g;
  g.cell = zero_params(model.kind, model.n, model.d_in);
  g.head = make_head(head_kind_of(model.head), model.n, model.d_out,
                     head_kind_of(model.head) == HeadKind::Gmm
                         ? std::get<GmmHead>(model.head).K
                         : 0,
                     nullptr, 1.0);
  return g;
}

ForwardPass forward_nll_from_state(const SequenceModel& model,
                                   const SequenceBatchItem& item, const Vector& h0,
                                   const Vector& c0, bool keep_traces) {
  check_item(model, item);
  size_t T = item.inputs.size();

  ForwardPass out;
  out.per_step.resize(T);
  if (keep_traces) {
    out.cell_traces.resize(T);
    out.head_traces.resize(T);
  }

  Vector h = h0;
  Vector c = c0;
  for (size_t t = 0; t < T; ++t) {
    StepTrace* ct = keep_traces ? &out.cell_traces[t] : nullptr;
    switch (model.kind) {
      case CellKind::Tanh: {
        TanhTrace trace;
        h = tanh_step(std::get<TanhParams>(model.cell), h, item.inputs[t],
                      ct ? &trace : nullptr);
        if (ct) *ct = std::move(trace);
        break;
      }
      case CellKind::Lstm: {
        LstmTrace trace;
        LstmState s = lstm_step(std::get<LstmParams>(model.cell), LstmState{h, c},
                                item.inputs[t], ct ? &trace : nullptr);
        h = std::move(s.h);
        c = std::move(s.c);
        if (ct) *ct = std::move(trace);
        break;
      }
      case CellKind::Gru: {
        GruTrace trace;
        h = gru_step(std::get<GruParams>(model.cell), h, item.inputs[t],
                     model.gru_variant, ct ? &trace : nullptr);
        if (ct) *ct = std::move(trace);
        break;
      }
    }
    out.per_step[t] = head_nll(model.head, h, item.targets[t],
                               keep_traces ? &out.head_traces[t] : nullptr);
    out.total_nll += out.per_step[t];
  }
  return out;
}

ForwardPass forward_nll(const SequenceModel& model, const SequenceBatchItem& item,
                        bool keep_traces) {
  return forward_nll_from_state(model, item, Vector(model.n, 0.0), Vector(model.n, 0.0),
                                keep_traces);
}

std::pair<Gradients, double> bptt(const SequenceModel& model,
                                  const SequenceBatchItem& item) {
  ForwardPass fwd = forward_nll(model, item, /*keep_traces=*/true);
  size_t T = item.inputs.size();

  Gradients grads = zero_gradients(model);
  Vector gh_future(model.n, 0.0);
  Vector gc_future(model.n, 0.0);
  Vector gh(model.n), gh_head, gh_prev, gc_prev, gx;

  bool is_lstm = model.kind == CellKind::Lstm;
  for (size_t t = T; t-- > 0;) {
    head_backward(model.head, fwd.head_traces[t], item.targets[t], grads.head, gh_head);
    for (int j = 0; j < model.n; ++j) gh[j] = gh_head[j] + gh_future[j];
    cell_backstep(model.cell, fwd.cell_traces[t], model.gru_variant, gh,
                  is_lstm ? &gc_future : nullptr, grads.cell, gh_prev,
                  is_lstm ? &gc_prev : nullptr, gx);
    gh_future = gh_prev;
    if (is_lstm) gc_future = gc_prev;
  }
  return {std::move(grads), fwd.total_nll};
}

SequenceModel perturb_weights(const SequenceModel& model, RngStream& rng, double std) {
  if (std < 0.0) throw ParameterError("perturb_weights: negative std");
  SequenceModel noisy = model;
  if (std == 0.0) return noisy;
  for (auto& view : tensor_views(noisy)) {
    if (view.kind == TensorKind::Bias) continue;
    for (double& w : view.data) w += rng.normal(0.0, std);
  }
  return noisy;
}

double average_nll(const SequenceModel& model, const std::vector<SequenceBatchItem>& items) {
  if (items.empty()) throw DataError("average_nll: empty dataset");
  double total = 0.0;
  long steps = 0;
  for (const auto& item : items) {
    total += forward_nll(model, item).total_nll;
    steps += static_cast<long>(item.inputs.size());
  }
  return total / static_cast<double>(steps);
}

std::vector<TensorView> tensor_views(SequenceModel& model) {
  std::vector<TensorView> out;
  collect_views(model.cell, out);
  collect_views(model.head, out);
  return out;
}

std::vector<ConstTensorView> tensor_views(const SequenceModel& model) {
  std::vector<ConstTensorView> out;
  collect_views(model.cell, out);
  collect_views(model.head, out);
  return out;
}

std::vector<TensorView> tensor_views(Gradients& grads) {
  std::vector<TensorView> out;
  collect_views(grads.cell, out);
  collect_views(grads.head, out);
  return out;
}

std::vector<ConstTensorView> tensor_views(const Gradients& grads) {
  std::vector<ConstTensorView> out;
  collect_views(grads.cell, out);
  collect_views(grads.head, out);
  return out;
}

double global_norm(const Gradients& grads) {
  std::vector<std::span<const double>> parts;
  for (const auto& view : tensor_views(grads)) parts.push_back(view.data);
  return global_norm(parts);
}

long total_param_count(const SequenceModel& model) {
  long total = 0;
  for (const auto& view : tensor_views(model)) total += static_cast<long>(view.data.size());
  return total;
}

}  // namespace rnnbench
