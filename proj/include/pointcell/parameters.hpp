// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <string>

#include "pointcell/tensor.hpp"

namespace pointcell {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered, name-addressed collection of trainable tensors. References
/// returned by `add` and `get` stay valid for the store's lifetime.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  /// He-normal weights with per-name random streams: the draw for a name
  /// depends only on (seed, name), never on registration order.
  Tensor& add_normal(const std::string& name, Shape shape, double stddev, std::uint64_t seed);
  Tensor& add_constant(const std::string& name, Shape shape, double value);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::deque<NamedTensor> entries_;
};

/// Stable 64-bit FNV-1a hash, used to derive per-name random streams.
std::uint64_t stable_hash(const std::string& text, std::uint64_t seed = 0);

}  // namespace pointcell
