#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "volt/param_store.hpp"
#include "volt/tensor.hpp"

namespace volt {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape over a fixed primitive set. One tape per forward
// pass; a tape built with record=false keeps values only and cannot run
// backward, which is the evaluation path.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  // References the stored tensor (no copy); the store must outlive the tape.
  // Repeated calls with the same name return the same node.
  Var param(const ParamStore& store, std::string_view name);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the recorded scalar output with respect to node id.
  const Tensor& grad(std::size_t id) const;
  Tensor& grad_mut(std::size_t id);

  void backward(const Var& scalar_output);

  // Adds d(output)/d(param) into grads for every trainable parameter used.
  void collect_param_grads(ParamStore& grads) const;

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
};

// Differentiable primitives. All operands must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var a, Var bias);  // bias (d values) broadcast over rows
Var scale(Var a, double factor);
Var concat_cols(Var a, Var b);
Var softmax_rows(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var relu(Var a);
Var sigmoid(Var a);
// Mean clamped binary cross-entropy against a constant target; 1x1 result.
Var bce(Var p, const Tensor& target);
Var sum(Var a);  // 1x1

}  // namespace ad
}  // namespace volt
