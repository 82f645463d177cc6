#include "rnnbench/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rnnbench {

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

const double kOneBelow = std::nextafter(1.0, 0.0);
const double kZeroAbove = std::numeric_limits<double>::min();

}  // namespace

std::uint64_t RngStream::next_u64() {
  return mix64(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double std) {
  return mean + std * normal();
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  return next_u64() % n;
}

RngStream RngStream::derive(std::string_view tag) const {
  return RngStream(mix64(seed_ ^ hash_tag(tag)));
}

RngStream RngStream::derive(std::string_view tag, std::uint64_t index) const {
  return RngStream(mix64(mix64(seed_ ^ hash_tag(tag)) + index));
}

Vector mat_vec(const Matrix& m, const Vector& v) {
  if (m.cols != static_cast<int>(v.size()))
    throw ShapeError("mat_vec: matrix is " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + " but vector has length " +
                     std::to_string(v.size()));
  Vector out(m.rows, 0.0);
  const double* row = m.data.data();
  for (int i = 0; i < m.rows; ++i, row += m.cols) {
    double acc = 0.0;
    for (int j = 0; j < m.cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

Vector mat_tvec(const Matrix& m, const Vector& v) {
  Vector out(m.cols, 0.0);
  mat_tvec_add(m, v, out);
  return out;
}

void mat_tvec_add(const Matrix& m, const Vector& v, Vector& out) {
  if (m.rows != static_cast<int>(v.size()) || m.cols != static_cast<int>(out.size()))
    throw ShapeError("mat_tvec: matrix is " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + " but vectors have lengths " +
                     std::to_string(v.size()) + ", " + std::to_string(out.size()));
  const double* row = m.data.data();
  for (int i = 0; i < m.rows; ++i, row += m.cols) {
    double a = v[i];
    if (a == 0.0) continue;
    for (int j = 0; j < m.cols; ++j) out[j] += a * row[j];
  }
}

void add_outer(Matrix& m, const Vector& a, const Vector& b) {
  if (m.rows != static_cast<int>(a.size()) || m.cols != static_cast<int>(b.size()))
    throw ShapeError("add_outer: shape mismatch");
  double* row = m.data.data();
  for (int i = 0; i < m.rows; ++i, row += m.cols) {
    double ai = a[i];
    if (ai == 0.0) continue;
    for (int j = 0; j < m.cols; ++j) row[j] += ai * b[j];
  }
}

void add_scaled(Vector& y, const Vector& x, double alpha) {
  if (y.size() != x.size()) throw ShapeError("add_scaled: length mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

Vector hadamard(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw ShapeError("hadamard: lengths " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  Vector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    s = e / (1.0 + e);
  }
  if (s >= 1.0) s = kOneBelow;
  if (s <= 0.0) s = kZeroAbove;
  return s;
}

Vector sigmoid_vec(const Vector& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector tanh_vec(const Vector& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    double t = std::tanh(v[i]);
    if (t >= 1.0) t = kOneBelow;
    if (t <= -1.0) t = -kOneBelow;
    out[i] = t;
  }
  return out;
}

double global_norm(const std::vector<std::span<const double>>& parts) {
  double ss = 0.0;
  for (const auto& part : parts)
    for (double x : part) ss += x * x;
  return std::sqrt(ss);
}

double logsumexp(const Vector& v) {
  if (v.empty()) throw ParameterError("logsumexp: empty input");
  double m = v[0];
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;  // all -inf, or a +-inf dominates
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

Vector gaussian_vector(RngStream& rng, int len, double mean, double std) {
  if (std < 0.0) throw ParameterError("gaussian_vector: negative std");
  Vector out(len, mean);
  if (std > 0.0)
    for (double& x : out) x = rng.normal(mean, std);
  return out;
}

Matrix gaussian_matrix(RngStream& rng, int rows, int cols, double mean, double std) {
  if (std < 0.0) throw ParameterError("gaussian_matrix: negative std");
  Matrix out(rows, cols);
  if (std > 0.0) {
    for (double& x : out.data) x = rng.normal(mean, std);
  } else {
    for (double& x : out.data) x = mean;
  }
  return out;
}

}  // namespace rnnbench
