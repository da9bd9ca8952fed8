#pragma once

#include "volt/tensor.hpp"

namespace volt {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kBceClamp = 1e-7;

// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& m);

// Per-row standardization with population variance, then gamma * x_hat + beta.
// gamma and beta hold d values (rank 1 or 1 x d).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Mean binary cross-entropy; p is clamped to [kBceClamp, 1 - kBceClamp].
double bce_mean(const Tensor& p, const Tensor& target);

}  // namespace volt
