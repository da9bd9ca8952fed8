#include "volt/ops.hpp"

#include <algorithm>
#include <cmath>

#include "volt/error.hpp"

namespace volt {

Tensor softmax_rows(const Tensor& m) {
  require_rank2(m, "softmax_rows");
  Tensor out(m.shape());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    const double inv = 1.0 / sum;
    for (double& v : o) v *= inv;
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t d = x.cols();
  if (d < 1) throw ShapeError("layer_norm: feature dimension must be >= 1");
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: gamma/beta length must equal " + std::to_string(d));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    auto o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) o[j] = gamma[j] * (r[j] - mean) * rstd + beta[j];
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

double bce_mean(const Tensor& p, const Tensor& target) {
  if (p.size() != target.size()) throw ShapeError("bce: prediction/target size mismatch");
  if (p.size() == 0) throw ShapeError("bce: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    sum -= target[i] * std::log(q) + (1.0 - target[i]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(p.size());
}

}  // namespace volt
