#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rnnbench/cells.hpp"
#include "rnnbench/gradcheck.hpp"

using namespace rnnbench;

namespace {

// Scalar loss sum(u o h) (+ sum(v o c) for LSTM) used to probe single-step
// backward passes against central differences.
double weighted_step_loss(const CellParams& p, const Vector& h_prev, const Vector& c_prev,
                          const Vector& x, GruVariant variant, const Vector& u,
                          const Vector& v) {
  double loss = 0.0;
  if (const auto* tp = std::get_if<TanhParams>(&p)) {
    Vector h = tanh_step(*tp, h_prev, x);
    for (size_t j = 0; j < h.size(); ++j) loss += u[j] * h[j];
  } else if (const auto* lp = std::get_if<LstmParams>(&p)) {
    LstmState s = lstm_step(*lp, LstmState{h_prev, c_prev}, x);
    for (size_t j = 0; j < s.h.size(); ++j) loss += u[j] * s.h[j] + v[j] * s.c[j];
  } else {
    Vector h = gru_step(std::get<GruParams>(p), h_prev, x, variant);
    for (size_t j = 0; j < h.size(); ++j) loss += u[j] * h[j];
  }
  return loss;
}

}  // namespace

TEST_CASE("init_params is seed-deterministic and fixes biases") {
  RngStream r1(9), r2(9);
  auto a = init_params(CellKind::Gru, 5, 3, r1);
  auto b = init_params(CellKind::Gru, 5, 3, r2);
  std::vector<ConstTensorView> va, vb;
  collect_views(a, va);
  collect_views(b, vb);
  for (size_t i = 0; i < va.size(); ++i)
    for (size_t j = 0; j < va[i].data.size(); ++j) CHECK(va[i].data[j] == vb[i].data[j]);

  RngStream r3(9);
  auto lstm = std::get<LstmParams>(init_params(CellKind::Lstm, 4, 2, r3));
  for (double x : lstm.b_f) CHECK(x == 1.0);
  for (double x : lstm.b_i) CHECK(x == 0.0);
  for (double x : lstm.b_o) CHECK(x == 0.0);
  for (double x : lstm.b_c) CHECK(x == 0.0);

  CHECK_THROWS_AS(init_params(CellKind::Tanh, 0, 1, r3), ParameterError);
}

TEST_CASE("init_params weight spread matches the uniform fan-in rule") {
  // std of U(-a, a) is a/sqrt(3) with a = scale/sqrt(d).
  RngStream rng(31);
  double scale = 2.0;
  int n = 200, d = 500;
  auto p = std::get<TanhParams>(init_params(CellKind::Tanh, n, d, rng, scale));
  double sum = 0.0, sum_sq = 0.0;
  for (double x : p.W.data) {
    sum += x;
    sum_sq += x * x;
  }
  double count = static_cast<double>(p.W.data.size());
  double std = std::sqrt(sum_sq / count - (sum / count) * (sum / count));
  CHECK(std == doctest::Approx(scale / std::sqrt(double(d)) / std::sqrt(3.0)).epsilon(0.02));
}

TEST_CASE("tanh_step") {
  auto zero = std::get<TanhParams>(zero_params(CellKind::Tanh, 3, 2));
  Vector h = tanh_step(zero, {0.5, -0.5, 0.1}, {1.0, 2.0});
  for (double x : h) CHECK(x == 0.0);

  TanhParams scalar{Matrix(1, 1), Matrix(1, 1), Vector(1, 0.0)};
  scalar.W(0, 0) = 1.0;
  scalar.U(0, 0) = 1.0;
  CHECK(tanh_step(scalar, {0.0}, {0.5})[0] ==
        doctest::Approx(0.46211715726000974).epsilon(1e-12));

  RngStream rng(4);
  auto p = std::get<TanhParams>(init_params(CellKind::Tanh, 6, 3, rng, 5.0));
  Vector out = tanh_step(p, gaussian_vector(rng, 6, 0.0, 2.0),
                         gaussian_vector(rng, 3, 0.0, 2.0));
  for (double x : out) {
    CHECK(x > -1.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("lstm_step") {
  auto zero = std::get<LstmParams>(zero_params(CellKind::Lstm, 2, 2));
  LstmState s0{Vector(2, 0.0), Vector(2, 0.0)};
  LstmState s1 = lstm_step(zero, s0, {1.0, -1.0});
  for (double x : s1.h) CHECK(x == 0.0);
  for (double x : s1.c) CHECK(x == 0.0);

  // Zero params, c_prev = 1: every gate is 0.5, candidate 0,
  // so c' = 0.5 and h' = 0.5 tanh(0.5).
  auto scalar = std::get<LstmParams>(zero_params(CellKind::Lstm, 1, 1));
  LstmState s = lstm_step(scalar, LstmState{{0.0}, {1.0}}, {0.0});
  CHECK(s.c[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.h[0] == doctest::Approx(0.23105857863000487).epsilon(1e-12));

  // Saturated forget (open) and input (shut) gates carry the cell through.
  auto carry = std::get<LstmParams>(zero_params(CellKind::Lstm, 3, 2));
  carry.b_f = Vector(3, 30.0);
  carry.b_i = Vector(3, -30.0);
  LstmState prev{Vector(3, 0.0), {0.7, -1.3, 0.2}};
  LstmState next = lstm_step(carry, prev, {1.0, 1.0});
  for (int j = 0; j < 3; ++j) CHECK(std::abs(next.c[j] - prev.c[j]) < 1e-9);
}

TEST_CASE("lstm gates stay in (0,1)") {
  RngStream rng(12);
  auto p = std::get<LstmParams>(init_params(CellKind::Lstm, 5, 4, rng, 3.0));
  LstmState s{gaussian_vector(rng, 5, 0.0, 1.0), gaussian_vector(rng, 5, 0.0, 1.0)};
  LstmTrace trace;
  lstm_step(p, s, gaussian_vector(rng, 4, 0.0, 1.0), &trace);
  for (const Vector* gate : {&trace.i, &trace.f, &trace.o})
    for (double g : *gate) {
      CHECK(g > 0.0);
      CHECK(g < 1.0);
    }
}

TEST_CASE("gru_step") {
  auto zero = std::get<GruParams>(zero_params(CellKind::Gru, 2, 2));
  GruTrace trace;
  Vector h = gru_step(zero, {1.0, -2.0}, {0.0, 0.0}, GruVariant::CandidateGated, &trace);
  CHECK(h[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(trace.z[0] == doctest::Approx(0.5));
  CHECK(trace.r[0] == doctest::Approx(0.5));

  // Update gate shut: the state passes through.
  auto frozen = std::get<GruParams>(zero_params(CellKind::Gru, 3, 2));
  frozen.b_z = Vector(3, -30.0);
  Vector h_prev{0.4, -0.9, 0.05};
  Vector out = gru_step(frozen, h_prev, {1.0, 1.0}, GruVariant::CandidateGated);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(out[j] - h_prev[j]) < 1e-9);
}

TEST_CASE("gru output is a convex combination of h_prev and the candidate") {
  RngStream rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = std::get<GruParams>(init_params(CellKind::Gru, 6, 3, rng, 4.0));
    Vector h_prev = gaussian_vector(rng, 6, 0.0, 1.0);
    Vector x = gaussian_vector(rng, 3, 0.0, 1.0);
    GruTrace trace;
    Vector h = gru_step(p, h_prev, x, GruVariant::CandidateGated, &trace);
    for (int j = 0; j < 6; ++j) {
      double lo = std::min(h_prev[j], trace.h_tilde[j]);
      double hi = std::max(h_prev[j], trace.h_tilde[j]);
      CHECK(h[j] >= lo - 1e-15);
      CHECK(h[j] <= hi + 1e-15);
    }
  }
}

TEST_CASE("gru variants agree for diagonal U") {
  RngStream rng(33);
  for (int rep = 0; rep < 10; ++rep) {
    auto p = std::get<GruParams>(init_params(CellKind::Gru, 5, 3, rng, 2.0));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) p.U(i, j) = 0.0;
    Vector h_prev = gaussian_vector(rng, 5, 0.0, 1.0);
    Vector x = gaussian_vector(rng, 3, 0.0, 1.0);
    Vector a = gru_step(p, h_prev, x, GruVariant::CandidateGated);
    Vector b = gru_step(p, h_prev, x, GruVariant::ProjectionGated);
    for (int j = 0; j < 5; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
  }
}

TEST_CASE("backstep with zero output gradient is zero") {
  RngStream rng(8);
  auto p = init_params(CellKind::Lstm, 4, 3, rng);
  const auto& lp = std::get<LstmParams>(p);
  LstmState s{gaussian_vector(rng, 4, 0.0, 1.0), gaussian_vector(rng, 4, 0.0, 1.0)};
  LstmTrace trace;
  lstm_step(lp, s, gaussian_vector(rng, 3, 0.0, 1.0), &trace);

  auto grads = zero_params(CellKind::Lstm, 4, 3);
  Vector gh(4, 0.0), gc(4, 0.0), ghp, gcp, gx;
  lstm_backstep(lp, trace, gh, gc, std::get<LstmParams>(grads), ghp, gcp, gx);
  std::vector<ConstTensorView> views;
  collect_views(grads, views);
  for (const auto& view : views)
    for (double g : view.data) CHECK(g == 0.0);
  for (double g : ghp) CHECK(g == 0.0);
  for (double g : gcp) CHECK(g == 0.0);
  for (double g : gx) CHECK(g == 0.0);
}

TEST_CASE("single-step backward matches finite differences") {
  // Scalar tanh case first (rel err < 1e-7), then small random shapes for
  // every cell kind and both GRU variants.
  struct Setup {
    CellKind kind;
    GruVariant variant;
    int n, d;
    double tol;
  };
  for (const Setup& setup :
       {Setup{CellKind::Tanh, GruVariant::CandidateGated, 1, 1, 1e-7},
        Setup{CellKind::Tanh, GruVariant::CandidateGated, 5, 4, 1e-6},
        Setup{CellKind::Lstm, GruVariant::CandidateGated, 4, 3, 1e-6},
        Setup{CellKind::Gru, GruVariant::CandidateGated, 4, 3, 1e-6},
        Setup{CellKind::Gru, GruVariant::ProjectionGated, 4, 3, 1e-6}}) {
    CAPTURE(to_string(setup.kind));
    RngStream rng(101 + setup.n);
    CellParams p = init_params(setup.kind, setup.n, setup.d, rng);
    Vector h_prev = gaussian_vector(rng, setup.n, 0.0, 0.8);
    Vector c_prev = gaussian_vector(rng, setup.n, 0.0, 0.8);
    Vector x = gaussian_vector(rng, setup.d, 0.0, 0.8);
    Vector u = gaussian_vector(rng, setup.n, 0.0, 1.0);
    Vector v = setup.kind == CellKind::Lstm ? gaussian_vector(rng, setup.n, 0.0, 1.0)
                                            : Vector(setup.n, 0.0);

    CellParams grads = zero_params(setup.kind, setup.n, setup.d);
    Vector ghp, gcp, gx;
    if (setup.kind == CellKind::Tanh) {
      TanhTrace trace;
      tanh_step(std::get<TanhParams>(p), h_prev, x, &trace);
      tanh_backstep(std::get<TanhParams>(p), trace, u, std::get<TanhParams>(grads), ghp, gx);
    } else if (setup.kind == CellKind::Lstm) {
      LstmTrace trace;
      lstm_step(std::get<LstmParams>(p), LstmState{h_prev, c_prev}, x, &trace);
      lstm_backstep(std::get<LstmParams>(p), trace, u, v, std::get<LstmParams>(grads),
                    ghp, gcp, gx);
    } else {
      GruTrace trace;
      gru_step(std::get<GruParams>(p), h_prev, x, setup.variant, &trace);
      gru_backstep(std::get<GruParams>(p), trace, setup.variant, u,
                   std::get<GruParams>(grads), ghp, gx);
    }

    std::vector<TensorView> pviews, gviews;
    collect_views(p, pviews);
    collect_views(grads, gviews);
    for (size_t i = 0; i < pviews.size(); ++i) {
      for (size_t j = 0; j < pviews[i].data.size(); ++j) {
        double numeric = finite_diff_scalar(
            [&](double value) {
              double saved = pviews[i].data[j];
              pviews[i].data[j] = value;
              double loss = weighted_step_loss(p, h_prev, c_prev, x, setup.variant, u, v);
              pviews[i].data[j] = saved;
              return loss;
            },
            pviews[i].data[j]);
        CAPTURE(pviews[i].name);
        CHECK(relative_error(gviews[i].data[j], numeric, 1e-6) < setup.tol);
      }
    }
    // Input-side gradients via the same oracle.
    for (size_t j = 0; j < h_prev.size(); ++j) {
      double numeric = finite_diff_scalar(
          [&](double value) {
            Vector probe = h_prev;
            probe[j] = value;
            return weighted_step_loss(p, probe, c_prev, x, setup.variant, u, v);
          },
          h_prev[j]);
      CHECK(relative_error(ghp[j], numeric, 1e-6) < setup.tol);
    }
    for (size_t j = 0; j < x.size(); ++j) {
      double numeric = finite_diff_scalar(
          [&](double value) {
            Vector probe = x;
            probe[j] = value;
            return weighted_step_loss(p, h_prev, c_prev, probe, setup.variant, u, v);
          },
          x[j]);
      CHECK(relative_error(gx[j], numeric, 1e-6) < setup.tol);
    }
  }
}

TEST_CASE("saturated forget gate passes the cell gradient through") {
  auto p = std::get<LstmParams>(zero_params(CellKind::Lstm, 3, 2));
  p.b_f = Vector(3, 30.0);
  p.b_i = Vector(3, -30.0);
  LstmState s{Vector(3, 0.0), {0.4, -0.2, 0.9}};
  LstmTrace trace;
  lstm_step(p, s, {0.0, 0.0}, &trace);

  auto grads = zero_params(CellKind::Lstm, 3, 2);
  Vector gh(3, 0.0), gc{1.0, -2.0, 0.5}, ghp, gcp, gx;
  lstm_backstep(p, trace, gh, gc, std::get<LstmParams>(grads), ghp, gcp, gx);
  for (int j = 0; j < 3; ++j) CHECK(gcp[j] == doctest::Approx(gc[j]).epsilon(1e-9));
}

TEST_CASE("cell_backstep rejects mismatched traces") {
  RngStream rng(2);
  CellParams p = init_params(CellKind::Gru, 3, 2, rng);
  StepTrace wrong = TanhTrace{};
  CellParams grads = zero_params(CellKind::Gru, 3, 2);
  Vector gh(3, 1.0), ghp, gx;
  CHECK_THROWS_AS(cell_backstep(p, wrong, GruVariant::CandidateGated, gh, nullptr, grads,
                                ghp, nullptr, gx),
                  ContractError);
}

TEST_CASE("count_params reproduces the published model sizes") {
  // Speech rows at d = 20.
  CHECK(count_params(CellKind::Lstm, 195, 20) == 169065);
  CHECK(count_params(CellKind::Gru, 227, 20) == 168888);
  CHECK(count_params(CellKind::Tanh, 400, 20) == 168400);
  // Music rows at nominal d = 100.
  CHECK(count_params(CellKind::Tanh, 100, 100) == 20100);
  CHECK(count_params(CellKind::Lstm, 36, 100) == 19836);
  CHECK(count_params(CellKind::Gru, 46, 100) == 20286);
  CHECK(count_params(CellKind::Tanh, 1, 1) == 3);
}

TEST_CASE("count_params is strictly increasing in n") {
  for (CellKind kind : {CellKind::Tanh, CellKind::Lstm, CellKind::Gru})
    for (int n = 1; n < 50; ++n)
      CHECK(count_params(kind, n + 1, 7) > count_params(kind, n, 7));
}

TEST_CASE("param_budget_to_units") {
  CHECK(param_budget_to_units(CellKind::Lstm, 20, 169100) == 195);
  CHECK(param_budget_to_units(CellKind::Gru, 20, 168900) == 227);
  CHECK(param_budget_to_units(CellKind::Tanh, 20, 168400) == 400);
  CHECK_THROWS_AS(param_budget_to_units(CellKind::Lstm, 20, 10), ParameterError);

  // Round-trip: the exact count of any n maps back to n.
  for (CellKind kind : {CellKind::Tanh, CellKind::Lstm, CellKind::Gru})
    for (int n : {1, 2, 17, 64, 311})
      CHECK(param_budget_to_units(kind, 9, count_params(kind, n, 9)) == n);
}
