#include "volt/adamw.hpp"

#include <cmath>

#include "volt/error.hpp"

namespace volt {

AdamWState AdamWState::init(const ParamStore& params, AdamWConfig config) {
  AdamWState s;
  s.config = config;
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    s.m.add(e.name, Tensor(e.value.shape()));
    s.v.add(e.name, Tensor(e.value.shape()));
  }
  return s;
}

void adamw_step(ParamStore& params, const ParamStore& grads, AdamWState& state) {
  // Validate everything first so a bad gradient leaves params untouched.
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    if (!grads.contains(e.name)) throw ShapeError("adamw: missing gradient for " + e.name);
    const Tensor& g = grads.get(e.name);
    if (!g.same_shape(e.value)) {
      throw ShapeError("adamw: gradient shape " + g.shape_string() + " does not match parameter " +
                       e.name + " " + e.value.shape_string());
    }
    if (!state.m.contains(e.name) || !state.m.get(e.name).same_shape(e.value)) {
      throw ShapeError("adamw: optimizer state does not match parameter " + e.name);
    }
  }

  const AdamWConfig& c = state.config;
  state.t += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  const double decay = 1.0 - c.lr * c.weight_decay;

  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    const Tensor& g = grads.get(e.name);
    Tensor& m = state.m.get(e.name);
    Tensor& v = state.v.get(e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      e.value[i] = e.value[i] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace volt
