#include "rnnbench/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rnnbench {

namespace {

constexpr double kProbClamp = 1e-12;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Matrix uniform_fan_in(RngStream& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  double a = scale / std::sqrt(static_cast<double>(cols));
  for (double& x : m.data) x = rng.uniform(-a, a);
  return m;
}

inline double clamped_log(double p) {
  if (p < kProbClamp) p = kProbClamp;
  if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
  return std::log(p);
}

// Per-component log density (weights included): ln w_k + sum_d ln N(t_d; mu_kd, s_kd).
Vector component_log_liks(const MixtureParams& mix, const Vector& target) {
  int K = static_cast<int>(mix.weights.size());
  int d_out = mix.means.cols;
  Vector l(K);
  for (int k = 0; k < K; ++k) {
    double acc = std::log(mix.weights[k]);
    for (int d = 0; d < d_out; ++d) {
      double s = mix.stds(k, d);
      double z = (target[d] - mix.means(k, d)) / s;
      acc += -kHalfLog2Pi - std::log(s) - 0.5 * z * z;
    }
    l[k] = acc;
  }
  return l;
}

}  // namespace

std::string to_string(HeadKind kind) {
  return kind == HeadKind::Bernoulli ? "bernoulli" : "gmm";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "bernoulli") return HeadKind::Bernoulli;
  if (s == "gmm") return HeadKind::Gmm;
  throw ParameterError("unknown head kind: " + s);
}

BernoulliHead zero_bernoulli_head(int n, int d_out) {
  if (n < 1 || d_out < 1) throw ParameterError("bernoulli head sizes must be >= 1");
  return BernoulliHead{Matrix(d_out, n), Vector(d_out, 0.0)};
}

GmmHead zero_gmm_head(int n, int d_out, int K) {
  if (n < 1 || d_out < 1 || K < 1) throw ParameterError("gmm head sizes must be >= 1");
  GmmHead head;
  head.K = K;
  head.d_out = d_out;
  head.W_pi = Matrix(K, n);
  head.b_pi = Vector(K, 0.0);
  head.W_mu = Matrix(K * d_out, n);
  head.b_mu = Vector(static_cast<size_t>(K) * d_out, 0.0);
  head.W_s = Matrix(K * d_out, n);
  head.b_s = Vector(static_cast<size_t>(K) * d_out, 0.0);
  return head;
}

BernoulliHead init_bernoulli_head(int n, int d_out, RngStream& rng, double scale) {
  BernoulliHead head = zero_bernoulli_head(n, d_out);
  head.W_y = uniform_fan_in(rng, d_out, n, scale);
  return head;
}

GmmHead init_gmm_head(int n, int d_out, int K, RngStream& rng, double scale) {
  GmmHead head = zero_gmm_head(n, d_out, K);
  head.W_pi = uniform_fan_in(rng, K, n, scale);
  head.W_mu = uniform_fan_in(rng, K * d_out, n, scale);
  head.W_s = uniform_fan_in(rng, K * d_out, n, scale);
  return head;
}

Vector bernoulli_forward(const BernoulliHead& head, const Vector& h, BernoulliTrace* trace) {
  Vector a = mat_vec(head.W_y, h);
  add_scaled(a, head.b_y);
  Vector p = sigmoid_vec(a);
  if (trace) *trace = BernoulliTrace{h, p};
  return p;
}

double bernoulli_nll(const Vector& p, const Vector& target) {
  if (p.size() != target.size()) throw ShapeError("bernoulli_nll: length mismatch");
  double nll = 0.0;
  for (size_t j = 0; j < p.size(); ++j) {
    double t = target[j];
    if (t != 0.0 && t != 1.0)
      throw DataError("bernoulli_nll: target entry " + std::to_string(j) +
                      " is not binary");
    nll -= t * clamped_log(p[j]) + (1.0 - t) * clamped_log(1.0 - p[j]);
  }
  return nll;
}

MixtureParams gmm_forward(const GmmHead& head, const Vector& h, GmmTrace* trace) {
  Vector logits = mat_vec(head.W_pi, h);
  add_scaled(logits, head.b_pi);
  double lse = logsumexp(logits);
  Vector w(head.K);
  for (int k = 0; k < head.K; ++k) w[k] = std::exp(logits[k] - lse);

  Vector mu_flat = mat_vec(head.W_mu, h);
  add_scaled(mu_flat, head.b_mu);
  Vector ls_raw = mat_vec(head.W_s, h);
  add_scaled(ls_raw, head.b_s);

  MixtureParams mix;
  mix.weights = std::move(w);
  mix.means = Matrix(head.K, head.d_out);
  mix.means.data = std::move(mu_flat);
  mix.stds = Matrix(head.K, head.d_out);
  for (size_t j = 0; j < ls_raw.size(); ++j) {
    double ls = std::clamp(ls_raw[j], -kLogStdClamp, kLogStdClamp);
    mix.stds.data[j] = std::exp(ls);
  }
  if (trace) *trace = GmmTrace{h, mix, std::move(ls_raw)};
  return mix;
}

double gmm_nll(const MixtureParams& mix, const Vector& target) {
  if (static_cast<int>(target.size()) != mix.means.cols)
    throw ShapeError("gmm_nll: target length " + std::to_string(target.size()) +
                     " vs d_out " + std::to_string(mix.means.cols));
  return -logsumexp(component_log_liks(mix, target));
}

void bernoulli_backward(const BernoulliHead& head, const BernoulliTrace& trace,
                        const Vector& target, BernoulliHead& grad_accum, Vector& grad_h) {
  if (trace.p.size() != target.size())
    throw ContractError("bernoulli_backward: trace/target mismatch");
  size_t d = target.size();
  Vector da(d);
  for (size_t j = 0; j < d; ++j) {
    double t = target[j];
    if (t != 0.0 && t != 1.0) throw DataError("bernoulli_backward: target is not binary");
    da[j] = trace.p[j] - t;  // canonical link
  }
  add_outer(grad_accum.W_y, da, trace.h);
  add_scaled(grad_accum.b_y, da);
  grad_h = mat_tvec(head.W_y, da);
}

void gmm_backward(const GmmHead& head, const GmmTrace& trace, const Vector& target,
                  GmmHead& grad_accum, Vector& grad_h) {
  const MixtureParams& mix = trace.mix;
  if (static_cast<int>(mix.weights.size()) != head.K ||
      static_cast<int>(target.size()) != head.d_out)
    throw ContractError("gmm_backward: trace/target mismatch");
  int K = head.K, d_out = head.d_out;

  // Posterior responsibilities gamma_k = softmax(component log-liks).
  Vector l = component_log_liks(mix, target);
  double lse = logsumexp(l);
  Vector gamma(K);
  for (int k = 0; k < K; ++k) gamma[k] = std::exp(l[k] - lse);

  Vector d_logits(K);
  for (int k = 0; k < K; ++k) d_logits[k] = mix.weights[k] - gamma[k];

  Vector d_mu(static_cast<size_t>(K) * d_out), d_ls(static_cast<size_t>(K) * d_out);
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < d_out; ++d) {
      size_t idx = static_cast<size_t>(k) * d_out + d;
      double s = mix.stds(k, d);
      double z = (target[d] - mix.means(k, d)) / s;
      d_mu[idx] = -gamma[k] * z / s;
      // No gradient through a clamped log-std.
      double raw = trace.log_std_raw[idx];
      d_ls[idx] = (raw > -kLogStdClamp && raw < kLogStdClamp)
                      ? -gamma[k] * (z * z - 1.0)
                      : 0.0;
    }
  }

  add_outer(grad_accum.W_pi, d_logits, trace.h);
  add_scaled(grad_accum.b_pi, d_logits);
  add_outer(grad_accum.W_mu, d_mu, trace.h);
  add_scaled(grad_accum.b_mu, d_mu);
  add_outer(grad_accum.W_s, d_ls, trace.h);
  add_scaled(grad_accum.b_s, d_ls);

  grad_h.assign(trace.h.size(), 0.0);
  mat_tvec_add(head.W_pi, d_logits, grad_h);
  mat_tvec_add(head.W_mu, d_mu, grad_h);
  mat_tvec_add(head.W_s, d_ls, grad_h);
}

HeadKind head_kind_of(const OutputHead& head) {
  return std::holds_alternative<BernoulliHead>(head) ? HeadKind::Bernoulli : HeadKind::Gmm;
}

int head_output_size(const OutputHead& head) {
  if (const auto* b = std::get_if<BernoulliHead>(&head)) return b->W_y.rows;
  return std::get<GmmHead>(head).d_out;
}

double head_nll(const OutputHead& head, const Vector& h, const Vector& target,
                HeadTrace* trace) {
  if (const auto* b = std::get_if<BernoulliHead>(&head)) {
    BernoulliTrace local;
    Vector p = bernoulli_forward(*b, h, trace ? &local : nullptr);
    if (trace) *trace = std::move(local);
    return bernoulli_nll(p, target);
  }
  const auto& g = std::get<GmmHead>(head);
  if (trace) {
    GmmTrace local;
    MixtureParams mix = gmm_forward(g, h, &local);
    *trace = std::move(local);
    return gmm_nll(mix, target);
  }
  return gmm_nll(gmm_forward(g, h), target);
}

void head_backward(const OutputHead& head, const HeadTrace& trace, const Vector& target,
                   OutputHead& grad_accum, Vector& grad_h) {
  if (head.index() != grad_accum.index())
    throw ContractError("head_backward: gradient tree does not match head");
  if (const auto* b = std::get_if<BernoulliHead>(&head)) {
    const auto* bt = std::get_if<BernoulliTrace>(&trace);
    if (!bt) throw ContractError("head_backward: trace is not a Bernoulli trace");
    bernoulli_backward(*b, *bt, target, std::get<BernoulliHead>(grad_accum), grad_h);
  } else {
    const auto* gt = std::get_if<GmmTrace>(&trace);
    if (!gt) throw ContractError("head_backward: trace is not a GMM trace");
    gmm_backward(std::get<GmmHead>(head), *gt, target, std::get<GmmHead>(grad_accum),
                 grad_h);
  }
}

namespace {

template <typename View, typename Vec>
void push(std::vector<View>& out, const char* name, TensorKind kind, Vec& v) {
  out.push_back(View{name, kind, {v.data(), v.size()}});
}

template <typename View, typename H>
void collect_head(H& head, std::vector<View>& out) {
  if constexpr (std::is_same_v<std::remove_const_t<H>, BernoulliHead>) {
    push(out, "head.W_y", TensorKind::Weight, head.W_y.data);
    push(out, "head.b_y", TensorKind::Bias, head.b_y);
  } else {
    push(out, "head.W_pi", TensorKind::Weight, head.W_pi.data);
    push(out, "head.b_pi", TensorKind::Bias, head.b_pi);
    push(out, "head.W_mu", TensorKind::Weight, head.W_mu.data);
    push(out, "head.b_mu", TensorKind::Bias, head.b_mu);
    push(out, "head.W_s", TensorKind::Weight, head.W_s.data);
    push(out, "head.b_s", TensorKind::Bias, head.b_s);
  }
}

}  // namespace

void collect_views(OutputHead& head, std::vector<TensorView>& out) {
  std::visit([&](auto& h) { collect_head<TensorView>(h, out); }, head);
}

void collect_views(const OutputHead& head, std::vector<ConstTensorView>& out) {
  std::visit([&](const auto& h) { collect_head<ConstTensorView>(h, out); }, head);
}

}  // namespace rnnbench
