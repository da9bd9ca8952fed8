#include "volt/grad_check.hpp"

#include <cmath>

#include "volt/error.hpp"

namespace volt {
namespace {

double eval_finite(const Objective& f, const ParamStore& p, ParamStore* grads) {
  const double v = f(p, grads);
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const Objective& f, const ParamStore& params, double epsilon) {
  ParamStore work = params;
  ParamStore analytic = params.zeros_like();
  eval_finite(f, work, &analytic);

  GradCheckResult result;
  for (auto& entry : work.entries()) {
    if (!entry.trainable) continue;
    const Tensor& grad = analytic.get(entry.name);
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double original = entry.value[i];
      entry.value[i] = original + epsilon;
      const double up = eval_finite(f, work, nullptr);
      entry.value[i] = original - epsilon;
      const double down = eval_finite(f, work, nullptr);
      entry.value[i] = original;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double rel = std::abs(grad[i] - numeric) / (std::abs(numeric) + 1e-8);
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = rel;
        result.worst_param = entry.name;
        result.worst_index = i;
        result.worst_analytic = grad[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace volt
