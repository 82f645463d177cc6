#pragma once

#include <variant>

#include "rnnbench/cells.hpp"
#include "rnnbench/numerics.hpp"

namespace rnnbench {

enum class HeadKind { Bernoulli, Gmm };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

// Factorized per-dimension Bernoulli output: p = sigma(W_y h + b_y).
struct BernoulliHead {
  Matrix W_y;  // d_out x n
  Vector b_y;  // d_out
};

// K-component diagonal-Gaussian mixture density head. Log-stds are clamped
// to [-7, 7] before exponentiation.
struct GmmHead {
  int K = 0;
  int d_out = 0;
  Matrix W_pi;  // K x n
  Vector b_pi;  // K
  Matrix W_mu;  // (K * d_out) x n
  Vector b_mu;
  Matrix W_s;   // (K * d_out) x n, log-std parameters
  Vector b_s;
};

using OutputHead = std::variant<BernoulliHead, GmmHead>;

constexpr double kLogStdClamp = 7.0;

struct MixtureParams {
  Vector weights;  // K, on the simplex
  Matrix means;    // K x d_out
  Matrix stds;     // K x d_out, strictly positive
};

struct BernoulliTrace {
  Vector h, p;
};

struct GmmTrace {
  Vector h;
  MixtureParams mix;
  Vector log_std_raw;  // pre-clamp, length K * d_out
};

using HeadTrace = std::variant<BernoulliTrace, GmmTrace>;

BernoulliHead init_bernoulli_head(int n, int d_out, RngStream& rng, double scale = 1.0);
GmmHead init_gmm_head(int n, int d_out, int K, RngStream& rng, double scale = 1.0);
BernoulliHead zero_bernoulli_head(int n, int d_out);
GmmHead zero_gmm_head(int n, int d_out, int K);

Vector bernoulli_forward(const BernoulliHead& head, const Vector& h,
                         BernoulliTrace* trace = nullptr);
// Negative log-likelihood in nats over independent Bernoulli dimensions;
// probabilities are clamped inside the logs only.
double bernoulli_nll(const Vector& p, const Vector& target);

MixtureParams gmm_forward(const GmmHead& head, const Vector& h, GmmTrace* trace = nullptr);
double gmm_nll(const MixtureParams& mix, const Vector& target);

void bernoulli_backward(const BernoulliHead& head, const BernoulliTrace& trace,
                        const Vector& target, BernoulliHead& grad_accum, Vector& grad_h);
void gmm_backward(const GmmHead& head, const GmmTrace& trace, const Vector& target,
                  GmmHead& grad_accum, Vector& grad_h);

// Generic wrappers dispatching on the head variant.
HeadKind head_kind_of(const OutputHead& head);
int head_output_size(const OutputHead& head);
double head_nll(const OutputHead& head, const Vector& h, const Vector& target,
                HeadTrace* trace = nullptr);
void head_backward(const OutputHead& head, const HeadTrace& trace, const Vector& target,
                   OutputHead& grad_accum, Vector& grad_h);

void collect_views(OutputHead& head, std::vector<TensorView>& out);
void collect_views(const OutputHead& head, std::vector<ConstTensorView>& out);

}  // namespace rnnbench
