#include "volt/param_store.hpp"

#include <algorithm>

#include "volt/error.hpp"

namespace volt {

Tensor& ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), trainable});
  return entries_.back().value;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return it->second;
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

const Tensor& ParamStore::get(std::string_view name) const {
  return entries_[index_of(name)].value;
}

Tensor& ParamStore::get(std::string_view name) { return entries_[index_of(name)].value; }

const ParamStore::Entry& ParamStore::entry(std::string_view name) const {
  return entries_[index_of(name)];
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.value.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, Tensor(e.value.shape()), e.trainable);
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : entries_) std::fill(e.value.data().begin(), e.value.data().end(), 0.0);
}

void ParamStore::scale(double factor) {
  for (auto& e : entries_)
    for (double& v : e.value.data()) v *= factor;
}

void ParamStore::accumulate(const ParamStore& other) {
  for (const auto& e : other.entries_) {
    Tensor& dst = get(e.name);
    if (!dst.same_shape(e.value)) {
      throw ShapeError("accumulate: shape mismatch for " + e.name + ": " + dst.shape_string() +
                       " vs " + e.value.shape_string());
    }
    add_inplace(dst, e.value);
  }
}

}  // namespace volt
