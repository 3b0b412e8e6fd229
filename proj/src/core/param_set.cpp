// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/param_set.hpp"

#include "fedsplit/error.hpp"

namespace fedsplit {

void ParameterSet::insert(const std::string& name, Tensor t) {
  if (!map_.emplace(name, std::move(t)).second) fail(ErrorKind::Name, "duplicate parameter '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) fail(ErrorKind::Name, "unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) fail(ErrorKind::Name, "unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::total_numel() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, t] : map_) n += t.numel();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(map_.size());
  for (const auto& [name, _] : map_) out.push_back(name);
  return out;
}

bool ParameterSet::bit_equal(const ParameterSet& other) const noexcept {
  if (map_.size() != other.map_.size()) return false;
  auto a = map_.begin();
  auto b = other.map_.begin();
  for (; a != map_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.bit_equal(b->second)) return false;
  }
  return true;
}

bool ParameterSet::all_finite() const noexcept {
  for (const auto& [_, t] : map_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double eta) {
  if (eta < 0) fail(ErrorKind::Config, "learning rate must be >= 0");
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) fail(ErrorKind::Name, "gradient for unknown parameter '" + name + "'");
    if (params.at(name).shape() != g.shape()) {
      fail(ErrorKind::Dimension, "gradient shape " + shape_str(g.shape()) + " for parameter '" + name +
                                     "' of shape " + shape_str(params.at(name).shape()));
    }
  }
  ParameterSet out = params;
  for (auto& [name, w] : out) {
    if (!grads.contains(name)) continue;
    const Tensor& g = grads.at(name);
    auto wd = w.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = round_to_precision(wd[i] - eta * gd[i]);
  }
  return out;
}

}  // namespace fedsplit
