// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_PARAM_SET_HPP
#define FEDSPLIT_PARAM_SET_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fedsplit/tensor.hpp"

namespace fedsplit {

// Named tensors, iterated in lexicographic name order.
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;
  using const_iterator = Map::const_iterator;
  using iterator = Map::iterator;

  void insert(const std::string& name, Tensor t);
  void insert_or_assign(const std::string& name, Tensor t) { map_.insert_or_assign(name, std::move(t)); }
  bool contains(const std::string& name) const { return map_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  void erase(const std::string& name) { map_.erase(name); }

  std::size_t size() const noexcept { return map_.size(); }
  bool empty() const noexcept { return map_.empty(); }
  std::size_t total_numel() const noexcept;
  std::vector<std::string> names() const;

  const_iterator begin() const noexcept { return map_.begin(); }
  const_iterator end() const noexcept { return map_.end(); }
  iterator begin() noexcept { return map_.begin(); }
  iterator end() noexcept { return map_.end(); }

  bool bit_equal(const ParameterSet& other) const noexcept;
  bool all_finite() const noexcept;

 private:
  Map map_;
};

// w <- w - eta * g for every name in `grads`; parameters without a gradient
// are copied through unchanged.
ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double eta);

}  // namespace fedsplit

#endif  // FEDSPLIT_PARAM_SET_HPP
