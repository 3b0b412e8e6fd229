// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fedsplit/error.hpp"

namespace fedsplit {
namespace {

double eval_loss(const LossFn& loss, const ParameterSet& params) {
  Graph g;
  auto vars = g.parameters(params);
  return loss(g, vars).value().item();
}

}  // namespace

GradCheckReport finite_diff_check(const LossFn& loss, const ParameterSet& params, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) fail(ErrorKind::Config, "finite-difference eps must be > 0");
  GradCheckReport report;
  if (params.empty() || opts.probes == 0) return report;

  ParameterSet analytic;
  {
    Graph g;
    auto vars = g.parameters(params);
    analytic = g.backward(loss(g, vars));
  }

  std::vector<std::pair<std::string, std::size_t>> offsets;  // (name, cumulative start)
  std::size_t total = 0;
  for (const auto& [name, t] : params) {
    offsets.emplace_back(name, total);
    total += t.numel();
  }

  PrecisionScope oracle_precision(Precision::F64);
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  ParameterSet probe = params;
  for (std::size_t n = 0; n < opts.probes; ++n) {
    const std::size_t flat = pick(rng);
    auto it = std::upper_bound(offsets.begin(), offsets.end(), flat,
                               [](std::size_t v, const auto& e) { return v < e.second; });
    --it;
    const std::string& name = it->first;
    const std::size_t idx = flat - it->second;

    Tensor& w = probe.at(name);
    const double saved = w[idx];
    w[idx] = saved + opts.eps;
    const double up = eval_loss(loss, probe);
    w[idx] = saved - opts.eps;
    const double down = eval_loss(loss, probe);
    w[idx] = saved;

    const double numeric = (up - down) / (2.0 * opts.eps);
    const double a = analytic.at(name)[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_error || n == 0) {
      report.max_rel_error = rel;
      report.worst_param = name;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.probes = opts.probes;
  return report;
}

}  // namespace fedsplit
