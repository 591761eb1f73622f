// SPDX-License-Identifier: Apache-2.0
//
// Group-relative advantages for binary rewards: the empirical form
// (r_i - u) / sigma with the population standard deviation, and the Bayesian
// posterior-smoothed form used when a group's rewards are all identical and
// the empirical form would collapse to zero for every rollout.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "aero/core.hpp"

namespace aero {

enum class AdvantageMode { Empirical, Bayesian };

struct AdvantageSet {
  std::vector<double> values;  // aligned with the input rewards
  AdvantageMode mode = AdvantageMode::Empirical;
  double mean_used = 0.0;
  double std_used = 0.0;
  bool dead_zone = false;

  bool operator==(const AdvantageSet&) const = default;
};

struct BinaryStats {
  double u = 0.0;
  double sigma = 0.0;
};

namespace detail {

inline void require_binary(const std::vector<int>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("rewards must be non-empty");
  for (int r : rewards)
    if (r != 0 && r != 1) throw std::invalid_argument("rewards must be 0 or 1");
}

}  // namespace detail

// Mean and population standard deviation. Computed from the tally; for binary
// rewards this equals the two-pass population std exactly up to rounding.
inline BinaryStats empirical_stats(const std::vector<int>& rewards) {
  detail::require_binary(rewards);
  const double n = static_cast<double>(rewards.size());
  int c = 0;
  for (int r : rewards) c += r;
  const double u = static_cast<double>(c) / n;
  return BinaryStats{u, std::sqrt(u * (1.0 - u))};
}

inline AdvantageSet empirical_advantages(const std::vector<int>& rewards) {
  const BinaryStats st = empirical_stats(rewards);
  AdvantageSet out;
  out.mode = AdvantageMode::Empirical;
  out.mean_used = st.u;
  out.std_used = st.sigma;
  out.values.reserve(rewards.size());
  if (st.sigma == 0.0) {
    // Degenerate group: no within-group signal. Callers decide whether to
    // keep these zeros or re-derive advantages from a posterior.
    out.dead_zone = true;
    out.values.assign(rewards.size(), 0.0);
    return out;
  }
  for (int r : rewards) out.values.push_back((static_cast<double>(r) - st.u) / st.sigma);
  return out;
}

inline PosteriorState posterior_update(const PosteriorState& prior, int c, int n) {
  if (!(prior.alpha > 0.0) || !(prior.beta > 0.0))
    throw std::invalid_argument("posterior prior must have positive parameters");
  if (n < 0 || c < 0 || c > n) throw std::invalid_argument("posterior update needs 0 <= c <= n");
  return PosteriorState{prior.alpha + static_cast<double>(c),
                        prior.beta + static_cast<double>(n - c)};
}

inline double posterior_mean(const PosteriorState& state) {
  if (!(state.alpha > 0.0) || !(state.beta > 0.0))
    throw std::invalid_argument("posterior state must have positive parameters");
  return state.alpha / (state.alpha + state.beta);
}

// Advantages from the smoothed rate u~ = (c + alpha0) / (n + alpha0 + beta0)
// with plug-in deviation sqrt(u~ (1 - u~)). Never collapses: u~ is strictly
// inside (0, 1) for any tally, so every advantage is nonzero.
inline AdvantageSet bayesian_advantages_from_tally(const std::vector<int>& kept_rewards,
                                                   int c, int n,
                                                   double alpha0, double beta0) {
  detail::require_binary(kept_rewards);
  const PosteriorState post = posterior_update(make_posterior(alpha0, beta0), c, n);
  const double u = posterior_mean(post);
  const double sigma = std::sqrt(u * (1.0 - u));
  AdvantageSet out;
  out.mode = AdvantageMode::Bayesian;
  out.mean_used = u;
  out.std_used = sigma;
  out.values.reserve(kept_rewards.size());
  for (int r : kept_rewards) out.values.push_back((static_cast<double>(r) - u) / sigma);
  return out;
}

inline AdvantageSet bayesian_advantages(const std::vector<int>& rewards,
                                        double alpha0, double beta0) {
  detail::require_binary(rewards);
  int c = 0;
  for (int r : rewards) c += r;
  return bayesian_advantages_from_tally(rewards, c, static_cast<int>(rewards.size()),
                                        alpha0, beta0);
}

}  // namespace aero
