#include "volt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "volt/error.hpp"
#include "volt/ops.hpp"

namespace volt {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, std::string_view name) {
  std::string key(name);
  if (auto it = param_ids_.find(key); it != param_ids_.end()) return {this, it->second};
  const auto& entry = store.entry(name);
  Node n;
  n.external = &entry.value;
  n.requires_grad = record_ && entry.trainable;
  n.param_name = key;
  nodes_.push_back(std::move(n));
  param_ids_.emplace(std::move(key), nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.owned;
}

const Tensor& Tape::grad(std::size_t id) const { return nodes_[id].grad; }

Tensor& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !value(id).empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError("non-finite value produced on tape");
  Node n;
  n.owned = std::move(value);
  if (record_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](std::size_t i) { return nodes_[i].requires_grad; });
    if (n.requires_grad) {
      n.inputs = std::move(inputs);
      n.backward = std::move(fn);
    }
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(const Var& out) {
  if (!record_) throw Error("backward on a non-recording tape");
  if (value(out.id()).size() != 1) throw ShapeError("backward: output must be scalar");
  grad_mut(out.id())[0] = 1.0;
  for (std::size_t id = out.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::collect_param_grads(ParamStore& grads) const {
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    add_inplace(grads.get(name), n.grad);
  }
}

namespace ad {
namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw Error("operands on different tapes");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(volt::matmul(a.value(), b.value()), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) matmul_nt_acc(g, tp.value(ib), tp.grad_mut(ia));
    if (tp.requires_grad(ib)) matmul_tn_acc(tp.value(ia), g, tp.grad_mut(ib));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(volt::matmul_nt(a.value(), b.value()), {ia, ib},
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.requires_grad(ia)) matmul_acc(g, tp.value(ib), tp.grad_mut(ia));
                  if (tp.requires_grad(ib)) matmul_tn_acc(g, tp.value(ia), tp.grad_mut(ib));
                });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("add: " + a.value().shape_string() + " vs " + b.value().shape_string());
  }
  Tensor out = a.value();
  add_inplace(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) add_inplace(tp.grad_mut(ia), g);
    if (tp.requires_grad(ib)) add_inplace(tp.grad_mut(ib), g);
  });
}

Var add_row(Var a, Var bias) {
  Tape& t = same_tape(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.size() != x.cols()) throw ShapeError("add_row: bias length must equal column count");
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) add_inplace(tp.grad_mut(ia), g);
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_mut(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [ia, factor](Tape& tp, std::size_t self) {
    axpy_inplace(factor, tp.grad(self), tp.grad_mut(ia));
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t ca = a.value().cols();
  return t.push(volt::concat_cols(a.value(), b.value()), {ia, ib},
                [ia, ib, ca](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.requires_grad(ia)) add_inplace(tp.grad_mut(ia), slice_cols(g, 0, ca));
                  if (tp.requires_grad(ib)) {
                    add_inplace(tp.grad_mut(ib), slice_cols(g, ca, g.cols()));
                  }
                });
}

Var softmax_rows(Var a) {
  const std::size_t ia = a.id();
  return a.tape()->push(volt::softmax_rows(a.value()), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad_mut(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(x, gamma);
  same_tape(x, beta);
  const Tensor& in = x.value();
  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  require_rank2(in, "layer_norm");
  const std::size_t rows = in.rows(), d = in.cols();
  if (d < 1) throw ShapeError("layer_norm: feature dimension must be >= 1");
  if (gm.size() != d || bt.size() != d) {
    throw ShapeError("layer_norm: gamma/beta length must equal " + std::to_string(d));
  }
  auto x_hat = std::make_shared<Tensor>(in.shape());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = in.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    (*rstd)[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      (*x_hat)(i, j) = (r[j] - mean) * (*rstd)[i];
      out(i, j) = gm[j] * (*x_hat)(i, j) + bt[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.push(std::move(out), {ix, ig, ib},
                [ix, ig, ib, x_hat, rstd](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  const Tensor& gm = tp.value(ig);
                  const std::size_t rows = g.rows(), d = g.cols();
                  if (tp.requires_grad(ig)) {
                    Tensor& gg = tp.grad_mut(ig);
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < d; ++j) gg[j] += g(i, j) * (*x_hat)(i, j);
                  }
                  if (tp.requires_grad(ib)) {
                    Tensor& gb = tp.grad_mut(ib);
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < d; ++j) gb[j] += g(i, j);
                  }
                  if (!tp.requires_grad(ix)) return;
                  Tensor& gx = tp.grad_mut(ix);
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t i = 0; i < rows; ++i) {
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxh = g(i, j) * gm[j];
                      mean_dxh += dxh;
                      mean_dxh_xh += dxh * (*x_hat)(i, j);
                    }
                    mean_dxh *= inv_d;
                    mean_dxh_xh *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxh = g(i, j) * gm[j];
                      gx(i, j) += (*rstd)[i] * (dxh - mean_dxh - (*x_hat)(i, j) * mean_dxh_xh);
                    }
                  }
                });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return a.tape()->push(volt::relu(a.value()), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& x = tp.value(ia);
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad_mut(ia);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) gx[i] += g[i];
  });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  return a.tape()->push(volt::sigmoid(a.value()), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad_mut(ia);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var bce(Var p, const Tensor& target) {
  const std::size_t ip = p.id();
  const double loss = bce_mean(p.value(), target);
  return p.tape()->push(Tensor({1, 1}, {loss}), {ip}, [ip, target](Tape& tp, std::size_t self) {
    const Tensor& pv = tp.value(ip);
    const double g = tp.grad(self)[0] / static_cast<double>(pv.size());
    Tensor& gp = tp.grad_mut(ip);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double q = pv[i];
      if (q < kBceClamp || q > 1.0 - kBceClamp) continue;
      gp[i] += g * (-target[i] / q + (1.0 - target[i]) / (1.0 - q));
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->push(Tensor({1, 1}, {s}), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad_mut(ia).data()) v += g;
  });
}

}  // namespace ad
}  // namespace volt
