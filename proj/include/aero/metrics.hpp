// SPDX-License-Identifier: Apache-2.0
//
// Batch-level diagnostics: zero-accuracy ratio, pass/avg at n, Pearson
// correlation, pairwise score normalization, and mean |advantage|.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aero/allocator.hpp"
#include "aero/core.hpp"

namespace aero {

// Fraction of groups whose full observed tally has zero correct rollouts.
inline double zero_accuracy_ratio(const std::vector<GroupObservation>& observations) {
  if (observations.empty()) throw std::invalid_argument("zero_accuracy_ratio needs observations");
  std::size_t zero = 0;
  for (const auto& obs : observations)
    if (obs.c == 0) ++zero;
  return static_cast<double>(zero) / static_cast<double>(observations.size());
}

inline double all_correct_ratio(const std::vector<GroupObservation>& observations) {
  if (observations.empty()) throw std::invalid_argument("all_correct_ratio needs observations");
  std::size_t full = 0;
  for (const auto& obs : observations)
    if (obs.m == 0) ++full;
  return static_cast<double>(full) / static_cast<double>(observations.size());
}

namespace detail {

inline void check_outcomes(const std::vector<std::vector<int>>& outcomes, int n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (outcomes.empty()) throw std::invalid_argument("outcomes must be non-empty");
  for (const auto& row : outcomes) {
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("every problem needs exactly n outcomes");
    for (int r : row)
      if (r != 0 && r != 1) throw std::invalid_argument("outcomes must be 0 or 1");
  }
}

}  // namespace detail

// Fraction of problems with at least one success among their n outcomes.
inline double pass_at_n(const std::vector<std::vector<int>>& outcomes, int n) {
  detail::check_outcomes(outcomes, n);
  std::size_t passed = 0;
  for (const auto& row : outcomes)
    if (std::any_of(row.begin(), row.end(), [](int r) { return r == 1; })) ++passed;
  return static_cast<double>(passed) / static_cast<double>(outcomes.size());
}

// Mean success rate over all problems and outcomes.
inline double avg_at_n(const std::vector<std::vector<int>>& outcomes, int n) {
  detail::check_outcomes(outcomes, n);
  double total = 0.0;
  for (const auto& row : outcomes)
    for (int r : row) total += r;
  return total / (static_cast<double>(outcomes.size()) * static_cast<double>(n));
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson needs equal-length series");
  if (x.size() < 2) throw std::invalid_argument("pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson is undefined for a constant series");
  return sxy / std::sqrt(sxx * syy);
}

// Scales two aligned score series by their pointwise maximum, so at every
// index the better method scores 1.
inline std::pair<std::vector<double>, std::vector<double>> normalized_scores(
    const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("normalized_scores needs aligned series");
  if (a.empty()) throw std::invalid_argument("normalized_scores needs non-empty series");
  std::vector<double> na(a.size()), nb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = std::max(a[i], b[i]);
    if (!(m > 0.0)) throw std::invalid_argument("normalized_scores needs a positive maximum");
    na[i] = a[i] / m;
    nb[i] = b[i] / m;
  }
  return {std::move(na), std::move(nb)};
}

// Mean |advantage| over every kept rollout in the batch.
inline double mean_abs_advantage(const std::vector<CuratedGroup>& groups) {
  if (groups.empty()) throw std::invalid_argument("mean_abs_advantage needs groups");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& g : groups) {
    for (double v : g.advantages.values) {
      total += std::abs(v);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("mean_abs_advantage needs kept rollouts");
  return total / static_cast<double>(count);
}

}  // namespace aero
