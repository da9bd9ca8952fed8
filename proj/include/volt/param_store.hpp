#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "volt/tensor.hpp"

namespace volt {

// Named parameter tensors in insertion order. Frozen entries take part in the
// forward pass but are skipped by the optimizer and the gradient checker.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  Tensor& add(std::string name, Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Entry& entry(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t trainable_count() const;  // scalar count over trainable entries
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  // Same names, shapes and flags, all values zero.
  ParamStore zeros_like() const;

  void set_zero();
  void scale(double factor);
  // this += other, matched by name; shapes must agree.
  void accumulate(const ParamStore& other);

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace volt
