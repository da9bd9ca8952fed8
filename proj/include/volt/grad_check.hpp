#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "volt/param_store.hpp"

namespace volt {

// Scalar objective over a parameter store. When grads is non-null it must be
// filled (accumulated) with the analytic gradient for every trainable entry.
using Objective = std::function<double(const ParamStore& params, ParamStore* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;  // scalar entries compared
};

// Compares the analytic gradient against central differences on every
// trainable scalar: |analytic - numeric| / (|numeric| + 1e-8). Frozen entries
// are not perturbed.
GradCheckResult grad_check(const Objective& f, const ParamStore& params, double epsilon = 1e-5);

}  // namespace volt
