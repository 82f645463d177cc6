#pragma once

#include <functional>

#include "rnnbench/model.hpp"

namespace rnnbench {

struct GradReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  size_t worst_index = 0;
  size_t num_checked = 0;
  std::vector<std::pair<std::string, double>> per_tensor_max;
};

// Central differences: (f(x + eps) - f(x - eps)) / (2 eps).
double finite_diff_scalar(const std::function<double(double)>& f, double x,
                          double eps = 1e-5);

// Central-difference gradient of a scalar loss over every model parameter.
// The loss must be pure; a non-finite evaluation raises OracleError.
Gradients finite_diff(const std::function<double(const SequenceModel&)>& loss,
                      SequenceModel model, double eps = 1e-5);

// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-8);

// Entrywise comparison of a supplied gradient tree against the
// finite-difference oracle on forward_nll.
GradReport compare_to_finite_diff(const SequenceModel& model,
                                  const SequenceBatchItem& item,
                                  const Gradients& analytic, double eps = 1e-5);

// Certifies bptt against the oracle; intended for small models
// (O(P) forward passes, P up to a couple thousand).
GradReport check_model_gradients(const SequenceModel& model,
                                 const SequenceBatchItem& item, double eps = 1e-5);

}  // namespace rnnbench
