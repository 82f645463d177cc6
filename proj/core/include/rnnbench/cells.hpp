#pragma once

#include <string>
#include <variant>

#include "rnnbench/numerics.hpp"

namespace rnnbench {

enum class CellKind { Tanh, Lstm, Gru };

// The GRU candidate can apply the reset gate before or after the recurrent
// projection: CandidateGated computes U (r o h), ProjectionGated r o (U h).
// The two coincide whenever U is diagonal.
enum class GruVariant { CandidateGated, ProjectionGated };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& s);
std::string to_string(GruVariant variant);
GruVariant gru_variant_from_string(const std::string& s);

struct TanhParams {
  Matrix W;  // n x d
  Matrix U;  // n x n
  Vector b;  // n
};

struct LstmParams {
  Matrix W_i, W_f, W_o, W_c;        // n x d
  Matrix U_i, U_f, U_o, U_c;        // n x n
  DiagMatrix V_i, V_f, V_o;         // peepholes, stored as diagonals
  Vector b_i, b_f, b_o, b_c;        // n
};

struct GruParams {
  Matrix W_z, W_r, W;   // n x d
  Matrix U_z, U_r, U;   // n x n
  Vector b_z, b_r, b;   // n
};

using CellParams = std::variant<TanhParams, LstmParams, GruParams>;

struct LstmState {
  Vector h;
  Vector c;
};

// Activations cached by a forward step; enough to run the exact backward
// pass without recomputing the forward.
struct TanhTrace {
  Vector x, h_prev, h;
};

struct LstmTrace {
  Vector x, h_prev, c_prev;
  Vector i, f, o, c_tilde, c, tanh_c, h;
};

struct GruTrace {
  Vector x, h_prev;
  Vector z, r, h_tilde, h;
  Vector cand_in;  // CandidateGated: r o h_prev; ProjectionGated: U h_prev
};

using StepTrace = std::variant<TanhTrace, LstmTrace, GruTrace>;

CellKind cell_kind_of(const CellParams& p);
int hidden_size(const CellParams& p);
int input_size(const CellParams& p);

// Weights ~ Uniform(-scale/sqrt(fan_in), +scale/sqrt(fan_in)); biases zero
// except the LSTM forget bias, which starts at +1. Peephole diagonals use
// fan_in = 1.
CellParams init_params(CellKind kind, int n, int d, RngStream& rng, double scale = 1.0);
CellParams zero_params(CellKind kind, int n, int d);

// h = tanh(W x + U h_prev + b)
Vector tanh_step(const TanhParams& p, const Vector& h_prev, const Vector& x,
                 TanhTrace* trace = nullptr);

// LSTM with diagonal peepholes: the f and i gates read c_prev, the o gate
// reads the updated cell.
LstmState lstm_step(const LstmParams& p, const LstmState& s, const Vector& x,
                    LstmTrace* trace = nullptr);

// z = sigma(W_z x + U_z h + b_z); r likewise; candidate per variant;
// h = (1 - z) o h_prev + z o h_tilde.
Vector gru_step(const GruParams& p, const Vector& h_prev, const Vector& x,
                GruVariant variant, GruTrace* trace = nullptr);

// Exact reverse-mode of one step. grad_h (and grad_c for LSTM) are the loss
// sensitivities to this step's outputs; parameter gradients accumulate into
// grad_accum, input-side gradients are overwritten.
void tanh_backstep(const TanhParams& p, const TanhTrace& t, const Vector& grad_h,
                   TanhParams& grad_accum, Vector& grad_h_prev, Vector& grad_x);
void lstm_backstep(const LstmParams& p, const LstmTrace& t, const Vector& grad_h,
                   const Vector& grad_c, LstmParams& grad_accum, Vector& grad_h_prev,
                   Vector& grad_c_prev, Vector& grad_x);
void gru_backstep(const GruParams& p, const GruTrace& t, GruVariant variant,
                  const Vector& grad_h, GruParams& grad_accum, Vector& grad_h_prev,
                  Vector& grad_x);

// Generic dispatcher; kind/trace mismatch raises ContractError. grad_c and
// grad_c_prev are required for LSTM and must be null otherwise.
void cell_backstep(const CellParams& p, const StepTrace& t, GruVariant variant,
                   const Vector& grad_h, const Vector* grad_c, CellParams& grad_accum,
                   Vector& grad_h_prev, Vector* grad_c_prev, Vector& grad_x);

// Recurrent-cell parameters only; output heads are counted separately.
// tanh: nd + n^2 + n; GRU: 3x that; LSTM: 4x that + 3n peepholes.
long count_params(CellKind kind, int n, int d);

// Largest n whose parameter count fits the budget.
int param_budget_to_units(CellKind kind, int d, long budget);

// Named flat views over each tensor; used for clipping, optimizer updates,
// noise injection, serialization, and gradient checking.
enum class TensorKind { Weight, Peephole, Bias };

struct TensorView {
  std::string name;
  TensorKind kind;
  std::span<double> data;
};

struct ConstTensorView {
  std::string name;
  TensorKind kind;
  std::span<const double> data;
};

void collect_views(CellParams& p, std::vector<TensorView>& out);
void collect_views(const CellParams& p, std::vector<ConstTensorView>& out);

}  // namespace rnnbench
