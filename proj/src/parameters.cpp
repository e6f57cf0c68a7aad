// SPDX-License-Identifier: Apache-2.0
#include "pointcell/parameters.hpp"

#include <random>

#include "pointcell/errors.hpp"

namespace pointcell {

std::uint64_t stable_hash(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  value.validate();
  value.requires_grad = true;
  value.grad.reset();
  entries_.push_back({name, std::move(value)});
  return entries_.back().tensor;
}

Tensor& ParameterStore::add_normal(const std::string& name, Shape shape, double stddev,
                                   std::uint64_t seed) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::mt19937_64 rng(stable_hash(name, seed));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = dist(rng);
  return add(name, std::move(t));
}

Tensor& ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("unknown parameter '" + name + "'");
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("unknown parameter '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

}  // namespace pointcell
