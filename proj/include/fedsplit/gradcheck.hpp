// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_GRADCHECK_HPP
#define FEDSPLIT_GRADCHECK_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "fedsplit/autograd.hpp"
#include "fedsplit/param_set.hpp"

namespace fedsplit {

using LossFn = std::function<Var(Graph&, const std::map<std::string, Var>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

struct GradCheckOptions {
  std::size_t probes = 200;
  double eps = 1e-5;
  // Denominator floor for the relative error. Central differences carry
  // ~1e-16 * |f| / eps of round-off, so gradients below the floor are
  // compared absolutely.
  double abs_floor = 1e-5;
  std::uint64_t seed = 7;
};

// Compares analytic gradients (computed under the active precision) with
// central differences (f(w+eps) - f(w-eps)) / 2eps evaluated in 64-bit mode
// at coordinates drawn uniformly over all parameter elements. Returns the
// worst |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport finite_diff_check(const LossFn& loss, const ParameterSet& params, const GradCheckOptions& opts = {});

}  // namespace fedsplit

#endif  // FEDSPLIT_GRADCHECK_HPP
