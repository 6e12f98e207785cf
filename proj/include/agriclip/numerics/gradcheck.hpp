#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "agriclip/numerics/tensor.hpp"

namespace agriclip {

// Loss callback used by the checker: returns f(params); fills *grad with the
// analytic gradient when grad is non-null.
using LossFn = std::function<double(const Tensor<double>& params, Tensor<double>* grad)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  bool passed = false;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Central-difference check of every coordinate against the analytic gradient.
inline GradCheckReport finite_diff_check(const LossFn& loss_fn, const Tensor<double>& params,
                                         double h = 1e-5, double tol = 1e-5) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw ParameterError("finite_diff_check: h must lie in [1e-6, 1e-3]");
  Tensor<double> analytic(params.dims());
  const double f0 = loss_fn(params, &analytic);
  if (!std::isfinite(f0)) throw EvaluationError("finite_diff_check: non-finite loss at base point");
  require_same_shape(params, analytic, "finite_diff_check gradient");

  GradCheckReport report;
  report.coordinates = params.size();
  Tensor<double> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = loss_fn(probe, nullptr);
    probe[i] = orig - h;
    const double fm = loss_fn(probe, nullptr);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw EvaluationError("finite_diff_check: non-finite loss when perturbing coordinate " +
                            std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double err = relative_error(analytic[i], numeric);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace agriclip
