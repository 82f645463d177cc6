#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rnnbench/errors.hpp"

namespace rnnbench {

using Vector = std::vector<double>;

// Dense row-major real64 matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
};

// Square matrix with zero off-diagonal entries, stored as its diagonal.
struct DiagMatrix {
  Vector diag;

  DiagMatrix() = default;
  explicit DiagMatrix(int n) : diag(n, 0.0) {}
};

// Counter-based deterministic random stream (splitmix64 core). Equal seeds
// give bit-identical draw sequences; independent streams are forked with
// derive() rather than by sharing one stream across owners.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal (Box-Muller)
  double normal(double mean, double std);
  // Unbiased-enough integer in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  RngStream derive(std::string_view tag) const;
  RngStream derive(std::string_view tag, std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

Vector mat_vec(const Matrix& m, const Vector& v);    // m v
Vector mat_tvec(const Matrix& m, const Vector& v);   // m^T v
void mat_tvec_add(const Matrix& m, const Vector& v, Vector& out);  // out += m^T v
void add_outer(Matrix& m, const Vector& a, const Vector& b);       // m += a b^T
void add_scaled(Vector& y, const Vector& x, double alpha = 1.0);   // y += alpha x

Vector hadamard(const Vector& a, const Vector& b);

// Elementwise logistic sigmoid / tanh. Outputs are clamped into the open
// interval so saturated inputs never round to an exact endpoint.
Vector sigmoid_vec(const Vector& v);
Vector tanh_vec(const Vector& v);
double sigmoid(double x);

// Euclidean norm over the concatenation of all parts.
double global_norm(const std::vector<std::span<const double>>& parts);

// log sum_i exp(v_i) with max-subtraction; v must be nonempty.
double logsumexp(const Vector& v);

// i.i.d. N(mean, std^2) draws; std = 0 yields the constant mean.
Vector gaussian_vector(RngStream& rng, int len, double mean, double std);
Matrix gaussian_matrix(RngStream& rng, int rows, int cols, double mean, double std);

}  // namespace rnnbench
