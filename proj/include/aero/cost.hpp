// SPDX-License-Identifier: Apache-2.0
//
// FLOP accounting. Generation costs a forward pass (2 * params per token),
// training costs forward plus backward (6 * params per token). Token counts
// include prompt and response in both phases. Rollouts dropped by curation
// still pay generation cost; only kept rollouts pay training cost.

#pragma once

#include <cstdint>
#include <stdexcept>

#include "aero/allocator.hpp"
#include "aero/core.hpp"

namespace aero {

inline double rollout_flops(const ModelSpec& model, std::int64_t tokens) {
  if (model.n_params < 1) throw std::invalid_argument("n_params must be >= 1");
  if (tokens < 0) throw std::invalid_argument("token count must be >= 0");
  return 2.0 * static_cast<double>(model.n_params) * static_cast<double>(tokens);
}

inline double training_flops(const ModelSpec& model, std::int64_t tokens) {
  if (model.n_params < 1) throw std::invalid_argument("n_params must be >= 1");
  if (tokens < 0) throw std::invalid_argument("token count must be >= 0");
  return 6.0 * static_cast<double>(model.n_params) * static_cast<double>(tokens);
}

// Oversampling factor needed to fill a batch when a fraction p0 of candidate
// groups is discarded: 1 / (1 - p0).
inline double inflation_factor(double p0) {
  if (p0 < 0.0 || p0 >= 1.0) throw std::invalid_argument("p0 must lie in [0,1)");
  return 1.0 / (1.0 - p0);
}

struct CostReport {
  std::int64_t rollout_tokens = 0;
  std::int64_t training_tokens = 0;
  double rollout_flops = 0.0;
  double training_flops = 0.0;
  double total_flops = 0.0;

  bool operator==(const CostReport&) const = default;
};

inline CostReport step_cost(const StepResult& result, const ModelSpec& model) {
  CostReport report;
  report.rollout_tokens = result.total_tokens_generated;
  for (const auto& g : result.groups)
    for (const auto& r : g.kept_rollouts) report.training_tokens += r.tokens;
  report.rollout_flops = rollout_flops(model, report.rollout_tokens);
  report.training_flops = training_flops(model, report.training_tokens);
  report.total_flops = report.rollout_flops + report.training_flops;
  return report;
}

}  // namespace aero
