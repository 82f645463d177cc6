#include "rnnbench/gradcheck.hpp"

#include <cmath>

namespace rnnbench {

double finite_diff_scalar(const std::function<double(double)>& f, double x, double eps) {
  if (eps <= 0.0) throw ParameterError("finite_diff_scalar: eps must be > 0");
  double hi = f(x + eps);
  double lo = f(x - eps);
  if (!std::isfinite(hi) || !std::isfinite(lo))
    throw OracleError("finite_diff_scalar: non-finite loss");
  return (hi - lo) / (2.0 * eps);
}

Gradients finite_diff(const std::function<double(const SequenceModel&)>& loss,
                      SequenceModel model, double eps) {
  if (eps <= 0.0) throw ParameterError("finite_diff: eps must be > 0");
  Gradients grads = zero_gradients(model);
  auto params = tensor_views(model);
  auto gs = tensor_views(grads);
  for (size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data;
    auto g = gs[i].data;
    for (size_t j = 0; j < p.size(); ++j) {
      double saved = p[j];
      p[j] = saved + eps;
      double hi = loss(model);
      p[j] = saved - eps;
      double lo = loss(model);
      p[j] = saved;
      if (!std::isfinite(hi) || !std::isfinite(lo))
        throw OracleError("finite_diff: non-finite loss at " + params[i].name + "[" +
                          std::to_string(j) + "]");
      g[j] = (hi - lo) / (2.0 * eps);
    }
  }
  return grads;
}

double relative_error(double a, double b, double floor) {
  double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

GradReport compare_to_finite_diff(const SequenceModel& model,
                                  const SequenceBatchItem& item,
                                  const Gradients& analytic, double eps) {
  Gradients numeric = finite_diff(
      [&item](const SequenceModel& m) { return forward_nll(m, item).total_nll; }, model,
      eps);

  // Entries far below |loss| * eps sit beneath the resolution of a central
  // difference of the loss (numerator rounding ~ ulp(loss)); compare those
  // at that scale instead of amplifying oracle roundoff.
  double total = forward_nll(model, item).total_nll;
  double floor = std::max(1e-8, std::abs(total) * eps);

  auto a_views = tensor_views(analytic);
  auto n_views = tensor_views(numeric);
  if (a_views.size() != n_views.size())
    throw ContractError("compare_to_finite_diff: gradient tree mismatch");

  GradReport report;
  for (size_t i = 0; i < a_views.size(); ++i) {
    if (a_views[i].data.size() != n_views[i].data.size())
      throw ContractError("compare_to_finite_diff: tensor " + a_views[i].name +
                          " shape mismatch");
    double tensor_max = 0.0;
    for (size_t j = 0; j < a_views[i].data.size(); ++j) {
      double err = relative_error(a_views[i].data[j], n_views[i].data[j], floor);
      ++report.num_checked;
      if (err > tensor_max) tensor_max = err;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = a_views[i].name;
        report.worst_index = j;
      }
    }
    report.per_tensor_max.emplace_back(a_views[i].name, tensor_max);
  }
  return report;
}

GradReport check_model_gradients(const SequenceModel& model,
                                 const SequenceBatchItem& item, double eps) {
  auto [analytic, nll] = bptt(model, item);
  if (!std::isfinite(nll)) throw OracleError("check_model_gradients: non-finite NLL");
  return compare_to_finite_diff(model, item, analytic, eps);
}

}  // namespace rnnbench
