#pragma once

#include <cstdint>

#include "volt/param_store.hpp"

namespace volt {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Per-parameter moments plus the step counter. m and v mirror the trainable
// entries of the parameter store they were created from.
struct AdamWState {
  AdamWConfig config;
  std::int64_t t = 0;
  ParamStore m;
  ParamStore v;

  static AdamWState init(const ParamStore& params, AdamWConfig config);
};

// One decoupled-weight-decay Adam step on every trainable entry:
//   w <- w - lr*wd*w - lr * m_hat / (sqrt(v_hat) + eps)
// Frozen entries are left untouched. Throws ShapeError naming the parameter
// when a gradient does not match.
void adamw_step(ParamStore& params, const ParamStore& grads, AdamWState& state);

}  // namespace volt
