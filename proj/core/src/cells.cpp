#include "rnnbench/cells.hpp"

#include <cmath>

namespace rnnbench {

namespace {

Matrix uniform_fan_in(RngStream& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  double a = scale / std::sqrt(static_cast<double>(cols));
  for (double& x : m.data) x = rng.uniform(-a, a);
  return m;
}

DiagMatrix uniform_diag(RngStream& rng, int n, double scale) {
  DiagMatrix d(n);
  for (double& x : d.diag) x = rng.uniform(-scale, scale);
  return d;
}

void check_sizes(int n, int d) {
  if (n < 1 || d < 1)
    throw ParameterError("cell sizes must be >= 1, got n=" + std::to_string(n) +
                         " d=" + std::to_string(d));
}

inline void check_len(const Vector& v, int len, const char* what) {
  if (static_cast<int>(v.size()) != len)
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(len) +
                     ", got " + std::to_string(v.size()));
}

// d(pre-activation) for a sigmoid output s is g * s * (1 - s).
inline Vector sigmoid_backprop(const Vector& g, const Vector& s) {
  Vector out(g.size());
  for (size_t i = 0; i < g.size(); ++i) out[i] = g[i] * s[i] * (1.0 - s[i]);
  return out;
}

inline Vector tanh_backprop(const Vector& g, const Vector& t) {
  Vector out(g.size());
  for (size_t i = 0; i < g.size(); ++i) out[i] = g[i] * (1.0 - t[i] * t[i]);
  return out;
}

}  // namespace

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Tanh: return "tanh";
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
  }
  return "?";
}

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "tanh") return CellKind::Tanh;
  if (s == "lstm") return CellKind::Lstm;
  if (s == "gru") return CellKind::Gru;
  throw ParameterError("unknown cell kind: " + s);
}

std::string to_string(GruVariant variant) {
  return variant == GruVariant::CandidateGated ? "candidate" : "projection";
}

GruVariant gru_variant_from_string(const std::string& s) {
  if (s == "candidate") return GruVariant::CandidateGated;
  if (s == "projection") return GruVariant::ProjectionGated;
  throw ParameterError("unknown gru variant: " + s);
}

CellKind cell_kind_of(const CellParams& p) {
  if (std::holds_alternative<TanhParams>(p)) return CellKind::Tanh;
  if (std::holds_alternative<LstmParams>(p)) return CellKind::Lstm;
  return CellKind::Gru;
}

int hidden_size(const CellParams& p) {
  return std::visit(
      [](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, TanhParams>)
          return q.W.rows;
        else if constexpr (std::is_same_v<std::decay_t<decltype(q)>, LstmParams>)
          return q.W_i.rows;
        else
          return q.W_z.rows;
      },
      p);
}

int input_size(const CellParams& p) {
  return std::visit(
      [](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, TanhParams>)
          return q.W.cols;
        else if constexpr (std::is_same_v<std::decay_t<decltype(q)>, LstmParams>)
          return q.W_i.cols;
        else
          return q.W_z.cols;
      },
      p);
}

CellParams zero_params(CellKind kind, int n, int d) {
  check_sizes(n, d);
  switch (kind) {
    case CellKind::Tanh:
      return TanhParams{Matrix(n, d), Matrix(n, n), Vector(n, 0.0)};
    case CellKind::Lstm:
      return LstmParams{Matrix(n, d), Matrix(n, d), Matrix(n, d), Matrix(n, d),
                        Matrix(n, n), Matrix(n, n), Matrix(n, n), Matrix(n, n),
                        DiagMatrix(n), DiagMatrix(n), DiagMatrix(n),
                        Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)};
    case CellKind::Gru:
      return GruParams{Matrix(n, d), Matrix(n, d), Matrix(n, d),
                       Matrix(n, n), Matrix(n, n), Matrix(n, n),
                       Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)};
  }
  throw ParameterError("zero_params: bad kind");
}

CellParams init_params(CellKind kind, int n, int d, RngStream& rng, double scale) {
  check_sizes(n, d);
  if (scale <= 0.0) throw ParameterError("init_params: scale must be > 0");
  switch (kind) {
    case CellKind::Tanh: {
      TanhParams p;
      p.W = uniform_fan_in(rng, n, d, scale);
      p.U = uniform_fan_in(rng, n, n, scale);
      p.b = Vector(n, 0.0);
      return p;
    }
    case CellKind::Lstm: {
      LstmParams p;
      p.W_i = uniform_fan_in(rng, n, d, scale);
      p.W_f = uniform_fan_in(rng, n, d, scale);
      p.W_o = uniform_fan_in(rng, n, d, scale);
      p.W_c = uniform_fan_in(rng, n, d, scale);
      p.U_i = uniform_fan_in(rng, n, n, scale);
      p.U_f = uniform_fan_in(rng, n, n, scale);
      p.U_o = uniform_fan_in(rng, n, n, scale);
      p.U_c = uniform_fan_in(rng, n, n, scale);
      p.V_i = uniform_diag(rng, n, scale);
      p.V_f = uniform_diag(rng, n, scale);
      p.V_o = uniform_diag(rng, n, scale);
      p.b_i = Vector(n, 0.0);
      p.b_f = Vector(n, 1.0);  // keep memory early in training
      p.b_o = Vector(n, 0.0);
      p.b_c = Vector(n, 0.0);
      return p;
    }
    case CellKind::Gru: {
      GruParams p;
      p.W_z = uniform_fan_in(rng, n, d, scale);
      p.W_r = uniform_fan_in(rng, n, d, scale);
      p.W = uniform_fan_in(rng, n, d, scale);
      p.U_z = uniform_fan_in(rng, n, n, scale);
      p.U_r = uniform_fan_in(rng, n, n, scale);
      p.U = uniform_fan_in(rng, n, n, scale);
      p.b_z = Vector(n, 0.0);
      p.b_r = Vector(n, 0.0);
      p.b = Vector(n, 0.0);
      return p;
    }
  }
  throw ParameterError("init_params: bad kind");
}

Vector tanh_step(const TanhParams& p, const Vector& h_prev, const Vector& x,
                 TanhTrace* trace) {
  check_len(h_prev, p.U.cols, "tanh_step h_prev");
  Vector a = mat_vec(p.W, x);
  add_scaled(a, mat_vec(p.U, h_prev));
  add_scaled(a, p.b);
  Vector h = tanh_vec(a);
  if (trace) *trace = TanhTrace{x, h_prev, h};
  return h;
}

LstmState lstm_step(const LstmParams& p, const LstmState& s, const Vector& x,
                    LstmTrace* trace) {
  int n = static_cast<int>(p.b_c.size());
  check_len(s.h, n, "lstm_step h_prev");
  check_len(s.c, n, "lstm_step c_prev");

  Vector a_c = mat_vec(p.W_c, x);
  add_scaled(a_c, mat_vec(p.U_c, s.h));
  add_scaled(a_c, p.b_c);
  Vector c_tilde = tanh_vec(a_c);

  Vector a_f = mat_vec(p.W_f, x);
  add_scaled(a_f, mat_vec(p.U_f, s.h));
  add_scaled(a_f, hadamard(p.V_f.diag, s.c));
  add_scaled(a_f, p.b_f);
  Vector f = sigmoid_vec(a_f);

  Vector a_i = mat_vec(p.W_i, x);
  add_scaled(a_i, mat_vec(p.U_i, s.h));
  add_scaled(a_i, hadamard(p.V_i.diag, s.c));
  add_scaled(a_i, p.b_i);
  Vector i = sigmoid_vec(a_i);

  Vector c(n);
  for (int j = 0; j < n; ++j) c[j] = f[j] * s.c[j] + i[j] * c_tilde[j];

  Vector a_o = mat_vec(p.W_o, x);
  add_scaled(a_o, mat_vec(p.U_o, s.h));
  add_scaled(a_o, hadamard(p.V_o.diag, c));  // output gate reads the new cell
  add_scaled(a_o, p.b_o);
  Vector o = sigmoid_vec(a_o);

  Vector tanh_c = tanh_vec(c);
  Vector h = hadamard(o, tanh_c);

  if (trace) *trace = LstmTrace{x, s.h, s.c, i, f, o, c_tilde, c, tanh_c, h};
  return LstmState{h, c};
}

Vector gru_step(const GruParams& p, const Vector& h_prev, const Vector& x,
                GruVariant variant, GruTrace* trace) {
  int n = static_cast<int>(p.b.size());
  check_len(h_prev, n, "gru_step h_prev");

  Vector a_z = mat_vec(p.W_z, x);
  add_scaled(a_z, mat_vec(p.U_z, h_prev));
  add_scaled(a_z, p.b_z);
  Vector z = sigmoid_vec(a_z);

  Vector a_r = mat_vec(p.W_r, x);
  add_scaled(a_r, mat_vec(p.U_r, h_prev));
  add_scaled(a_r, p.b_r);
  Vector r = sigmoid_vec(a_r);

  Vector cand_in;
  Vector a_h = mat_vec(p.W, x);
  if (variant == GruVariant::CandidateGated) {
    cand_in = hadamard(r, h_prev);
    add_scaled(a_h, mat_vec(p.U, cand_in));
  } else {
    cand_in = mat_vec(p.U, h_prev);
    add_scaled(a_h, hadamard(r, cand_in));
  }
  add_scaled(a_h, p.b);
  Vector h_tilde = tanh_vec(a_h);

  Vector h(n);
  for (int j = 0; j < n; ++j) h[j] = (1.0 - z[j]) * h_prev[j] + z[j] * h_tilde[j];

  if (trace) *trace = GruTrace{x, h_prev, z, r, h_tilde, h, cand_in};
  return h;
}

void tanh_backstep(const TanhParams& p, const TanhTrace& t, const Vector& grad_h,
                   TanhParams& grad_accum, Vector& grad_h_prev, Vector& grad_x) {
  check_len(grad_h, p.U.cols, "tanh_backstep grad_h");
  Vector da = tanh_backprop(grad_h, t.h);
  add_outer(grad_accum.W, da, t.x);
  add_outer(grad_accum.U, da, t.h_prev);
  add_scaled(grad_accum.b, da);
  grad_h_prev = mat_tvec(p.U, da);
  grad_x = mat_tvec(p.W, da);
}

void lstm_backstep(const LstmParams& p, const LstmTrace& t, const Vector& grad_h,
                   const Vector& grad_c, LstmParams& grad_accum, Vector& grad_h_prev,
                   Vector& grad_c_prev, Vector& grad_x) {
  int n = static_cast<int>(p.b_c.size());
  check_len(grad_h, n, "lstm_backstep grad_h");
  check_len(grad_c, n, "lstm_backstep grad_c");

  Vector do_(n), dc(n);
  for (int j = 0; j < n; ++j) do_[j] = grad_h[j] * t.tanh_c[j];
  Vector da_o = sigmoid_backprop(do_, t.o);
  // dL/dc: direct path, through h = o o tanh(c), and through the output
  // gate's peephole on the new cell.
  for (int j = 0; j < n; ++j)
    dc[j] = grad_c[j] + grad_h[j] * t.o[j] * (1.0 - t.tanh_c[j] * t.tanh_c[j]) +
            p.V_o.diag[j] * da_o[j];

  Vector dc_tilde(n), df(n), di(n);
  for (int j = 0; j < n; ++j) {
    dc_tilde[j] = dc[j] * t.i[j];
    df[j] = dc[j] * t.c_prev[j];
    di[j] = dc[j] * t.c_tilde[j];
  }
  Vector da_c = tanh_backprop(dc_tilde, t.c_tilde);
  Vector da_f = sigmoid_backprop(df, t.f);
  Vector da_i = sigmoid_backprop(di, t.i);

  add_outer(grad_accum.W_c, da_c, t.x);
  add_outer(grad_accum.W_f, da_f, t.x);
  add_outer(grad_accum.W_i, da_i, t.x);
  add_outer(grad_accum.W_o, da_o, t.x);
  add_outer(grad_accum.U_c, da_c, t.h_prev);
  add_outer(grad_accum.U_f, da_f, t.h_prev);
  add_outer(grad_accum.U_i, da_i, t.h_prev);
  add_outer(grad_accum.U_o, da_o, t.h_prev);
  add_scaled(grad_accum.b_c, da_c);
  add_scaled(grad_accum.b_f, da_f);
  add_scaled(grad_accum.b_i, da_i);
  add_scaled(grad_accum.b_o, da_o);
  for (int j = 0; j < n; ++j) {
    grad_accum.V_f.diag[j] += da_f[j] * t.c_prev[j];
    grad_accum.V_i.diag[j] += da_i[j] * t.c_prev[j];
    grad_accum.V_o.diag[j] += da_o[j] * t.c[j];
  }

  grad_c_prev.assign(n, 0.0);
  for (int j = 0; j < n; ++j)
    grad_c_prev[j] = dc[j] * t.f[j] + p.V_f.diag[j] * da_f[j] + p.V_i.diag[j] * da_i[j];

  grad_h_prev.assign(n, 0.0);
  mat_tvec_add(p.U_c, da_c, grad_h_prev);
  mat_tvec_add(p.U_f, da_f, grad_h_prev);
  mat_tvec_add(p.U_i, da_i, grad_h_prev);
  mat_tvec_add(p.U_o, da_o, grad_h_prev);

  grad_x.assign(t.x.size(), 0.0);
  mat_tvec_add(p.W_c, da_c, grad_x);
  mat_tvec_add(p.W_f, da_f, grad_x);
  mat_tvec_add(p.W_i, da_i, grad_x);
  mat_tvec_add(p.W_o, da_o, grad_x);
}

void gru_backstep(const GruParams& p, const GruTrace& t, GruVariant variant,
                  const Vector& grad_h, GruParams& grad_accum, Vector& grad_h_prev,
                  Vector& grad_x) {
  int n = static_cast<int>(p.b.size());
  check_len(grad_h, n, "gru_backstep grad_h");

  Vector dz(n), dh_tilde(n);
  for (int j = 0; j < n; ++j) {
    dz[j] = grad_h[j] * (t.h_tilde[j] - t.h_prev[j]);
    dh_tilde[j] = grad_h[j] * t.z[j];
  }
  Vector da_z = sigmoid_backprop(dz, t.z);
  Vector da_h = tanh_backprop(dh_tilde, t.h_tilde);

  grad_h_prev.assign(n, 0.0);
  for (int j = 0; j < n; ++j) grad_h_prev[j] = grad_h[j] * (1.0 - t.z[j]);

  Vector dr(n);
  if (variant == GruVariant::CandidateGated) {
    // a_h = W x + U (r o h_prev) + b, cand_in = r o h_prev
    add_outer(grad_accum.U, da_h, t.cand_in);
    Vector dq = mat_tvec(p.U, da_h);
    for (int j = 0; j < n; ++j) {
      dr[j] = dq[j] * t.h_prev[j];
      grad_h_prev[j] += dq[j] * t.r[j];
    }
  } else {
    // a_h = W x + r o (U h_prev) + b, cand_in = U h_prev
    Vector du(n);
    for (int j = 0; j < n; ++j) {
      dr[j] = da_h[j] * t.cand_in[j];
      du[j] = da_h[j] * t.r[j];
    }
    add_outer(grad_accum.U, du, t.h_prev);
    mat_tvec_add(p.U, du, grad_h_prev);
  }
  Vector da_r = sigmoid_backprop(dr, t.r);

  add_outer(grad_accum.W, da_h, t.x);
  add_outer(grad_accum.W_z, da_z, t.x);
  add_outer(grad_accum.W_r, da_r, t.x);
  add_outer(grad_accum.U_z, da_z, t.h_prev);
  add_outer(grad_accum.U_r, da_r, t.h_prev);
  add_scaled(grad_accum.b, da_h);
  add_scaled(grad_accum.b_z, da_z);
  add_scaled(grad_accum.b_r, da_r);

  mat_tvec_add(p.U_z, da_z, grad_h_prev);
  mat_tvec_add(p.U_r, da_r, grad_h_prev);

  grad_x.assign(t.x.size(), 0.0);
  mat_tvec_add(p.W, da_h, grad_x);
  mat_tvec_add(p.W_z, da_z, grad_x);
  mat_tvec_add(p.W_r, da_r, grad_x);
}

void cell_backstep(const CellParams& p, const StepTrace& t, GruVariant variant,
                   const Vector& grad_h, const Vector* grad_c, CellParams& grad_accum,
                   Vector& grad_h_prev, Vector* grad_c_prev, Vector& grad_x) {
  if (p.index() != grad_accum.index())
    throw ContractError("cell_backstep: gradient tree does not match parameters");
  if (const auto* tp = std::get_if<TanhParams>(&p)) {
    const auto* tt = std::get_if<TanhTrace>(&t);
    if (!tt) throw ContractError("cell_backstep: trace is not a tanh trace");
    tanh_backstep(*tp, *tt, grad_h, std::get<TanhParams>(grad_accum), grad_h_prev, grad_x);
  } else if (const auto* lp = std::get_if<LstmParams>(&p)) {
    const auto* lt = std::get_if<LstmTrace>(&t);
    if (!lt) throw ContractError("cell_backstep: trace is not an LSTM trace");
    if (!grad_c || !grad_c_prev)
      throw ContractError("cell_backstep: LSTM requires grad_c and grad_c_prev");
    lstm_backstep(*lp, *lt, grad_h, *grad_c, std::get<LstmParams>(grad_accum),
                  grad_h_prev, *grad_c_prev, grad_x);
  } else {
    const auto* gp = std::get_if<GruParams>(&p);
    const auto* gt = std::get_if<GruTrace>(&t);
    if (!gt) throw ContractError("cell_backstep: trace is not a GRU trace");
    gru_backstep(*gp, *gt, variant, grad_h, std::get<GruParams>(grad_accum),
                 grad_h_prev, grad_x);
  }
}

long count_params(CellKind kind, int n, int d) {
  check_sizes(n, d);
  long nl = n, dl = d;
  long block = nl * dl + nl * nl + nl;
  switch (kind) {
    case CellKind::Tanh: return block;
    case CellKind::Gru: return 3 * block;
    case CellKind::Lstm: return 4 * block + 3 * nl;
  }
  throw ParameterError("count_params: bad kind");
}

int param_budget_to_units(CellKind kind, int d, long budget) {
  if (budget < count_params(kind, 1, d))
    throw ParameterError("param budget " + std::to_string(budget) +
                         " is below the smallest " + to_string(kind) + " cell at d=" +
                         std::to_string(d));
  int lo = 1, hi = 2;
  while (count_params(kind, hi, d) <= budget) {
    lo = hi;
    hi *= 2;
  }
  while (lo + 1 < hi) {
    int mid = lo + (hi - lo) / 2;
    if (count_params(kind, mid, d) <= budget)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

namespace {

template <typename View, typename Vec>
void push(std::vector<View>& out, const char* name, TensorKind kind, Vec& v) {
  out.push_back(View{name, kind, {v.data(), v.size()}});
}

template <typename View, typename P>
void collect_cell(P& p, std::vector<View>& out) {
  if constexpr (std::is_same_v<std::remove_const_t<P>, TanhParams>) {
    push(out, "W", TensorKind::Weight, p.W.data);
    push(out, "U", TensorKind::Weight, p.U.data);
    push(out, "b", TensorKind::Bias, p.b);
  } else if constexpr (std::is_same_v<std::remove_const_t<P>, LstmParams>) {
    push(out, "W_i", TensorKind::Weight, p.W_i.data);
    push(out, "W_f", TensorKind::Weight, p.W_f.data);
    push(out, "W_o", TensorKind::Weight, p.W_o.data);
    push(out, "W_c", TensorKind::Weight, p.W_c.data);
    push(out, "U_i", TensorKind::Weight, p.U_i.data);
    push(out, "U_f", TensorKind::Weight, p.U_f.data);
    push(out, "U_o", TensorKind::Weight, p.U_o.data);
    push(out, "U_c", TensorKind::Weight, p.U_c.data);
    push(out, "V_i", TensorKind::Peephole, p.V_i.diag);
    push(out, "V_f", TensorKind::Peephole, p.V_f.diag);
    push(out, "V_o", TensorKind::Peephole, p.V_o.diag);
    push(out, "b_i", TensorKind::Bias, p.b_i);
    push(out, "b_f", TensorKind::Bias, p.b_f);
    push(out, "b_o", TensorKind::Bias, p.b_o);
    push(out, "b_c", TensorKind::Bias, p.b_c);
  } else {
    push(out, "W_z", TensorKind::Weight, p.W_z.data);
    push(out, "W_r", TensorKind::Weight, p.W_r.data);
    push(out, "W", TensorKind::Weight, p.W.data);
    push(out, "U_z", TensorKind::Weight, p.U_z.data);
    push(out, "U_r", TensorKind::Weight, p.U_r.data);
    push(out, "U", TensorKind::Weight, p.U.data);
    push(out, "b_z", TensorKind::Bias, p.b_z);
    push(out, "b_r", TensorKind::Bias, p.b_r);
    push(out, "b", TensorKind::Bias, p.b);
  }
}

}  // namespace

void collect_views(CellParams& p, std::vector<TensorView>& out) {
  std::visit([&](auto& q) { collect_cell<TensorView>(q, out); }, p);
}

void collect_views(const CellParams& p, std::vector<ConstTensorView>& out) {
  std::visit([&](const auto& q) { collect_cell<ConstTensorView>(q, out); }, p);
}

}  // namespace rnnbench
