// SPDX-License-Identifier: Apache-2.0
//
// Synthetic per-rollout gradient vectors and the closed-form norm identity
// they satisfy. For a group with c correct and m incorrect rollouts under
// advantage normalization, the group gradient reduces to
//
//   G = sqrt(cm) / (c + m) * (vbar_correct - vbar_incorrect)
//
// so ||G||^2 = cm / (c + m)^2 * ||vbar_correct - vbar_incorrect||^2. The
// balance factor cm / (c + m)^2 is maximized exactly when m = c, which is
// what makes 1:1 curated groups the most update-efficient shape.

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aero/rng.hpp"

namespace aero {

struct GradientSample {
  std::vector<std::vector<double>> vectors;  // one per rollout, all length d
  std::vector<int> labels;                   // 1 correct, 0 incorrect
  int d = 0;
};

// Correct rollouts pull toward +separation * e1, incorrect toward the
// opposite, with unit isotropic noise on every coordinate.
inline GradientSample synth_gradients(int c, int m, int d, double separation,
                                      RngStream& rng) {
  if (c < 0 || m < 0 || c + m < 1) throw std::invalid_argument("synth_gradients: need c + m >= 1");
  if (d < 1) throw std::invalid_argument("synth_gradients: d must be >= 1");
  GradientSample s;
  s.d = d;
  s.vectors.reserve(static_cast<std::size_t>(c + m));
  s.labels.reserve(static_cast<std::size_t>(c + m));
  for (int i = 0; i < c + m; ++i) {
    const bool correct = i < c;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] = rng.normal();
    v[0] += correct ? separation : -separation;
    s.vectors.push_back(std::move(v));
    s.labels.push_back(correct ? 1 : 0);
  }
  return s;
}

namespace detail {

inline void check_sample(const GradientSample& s) {
  if (s.vectors.empty() || s.vectors.size() != s.labels.size())
    throw std::invalid_argument("gradient sample is empty or misaligned");
  for (const auto& v : s.vectors)
    if (static_cast<int>(v.size()) != s.d)
      throw std::invalid_argument("gradient sample has inconsistent dimensions");
}

struct ClassMeans {
  std::vector<double> correct;
  std::vector<double> incorrect;
  int c = 0;
  int m = 0;
};

inline ClassMeans class_means(const GradientSample& s) {
  check_sample(s);
  ClassMeans cm;
  cm.correct.assign(static_cast<std::size_t>(s.d), 0.0);
  cm.incorrect.assign(static_cast<std::size_t>(s.d), 0.0);
  for (std::size_t i = 0; i < s.vectors.size(); ++i) {
    auto& acc = s.labels[i] == 1 ? cm.correct : cm.incorrect;
    (s.labels[i] == 1 ? cm.c : cm.m) += 1;
    for (int j = 0; j < s.d; ++j) acc[static_cast<std::size_t>(j)] += s.vectors[i][static_cast<std::size_t>(j)];
  }
  if (cm.c == 0 || cm.m == 0)
    throw std::invalid_argument("group gradient needs both correct and incorrect rollouts");
  for (int j = 0; j < s.d; ++j) {
    cm.correct[static_cast<std::size_t>(j)] /= static_cast<double>(cm.c);
    cm.incorrect[static_cast<std::size_t>(j)] /= static_cast<double>(cm.m);
  }
  return cm;
}

}  // namespace detail

// Advantage-weighted mean gradient: (1/n) * sum_i a_i v_i with
// a_i = (r_i - mu) / sigma, mu = c/n, sigma = sqrt(mu (1 - mu)).
inline std::vector<double> group_gradient(const GradientSample& s) {
  detail::check_sample(s);
  int c = 0;
  for (int l : s.labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("gradient labels must be 0 or 1");
    c += l;
  }
  const int n = static_cast<int>(s.labels.size());
  const int m = n - c;
  if (c == 0 || m == 0)
    throw std::invalid_argument("group gradient needs both correct and incorrect rollouts");
  const double mu = static_cast<double>(c) / static_cast<double>(n);
  const double sigma = std::sqrt(mu * (1.0 - mu));
  const double a_pos = (1.0 - mu) / sigma;
  const double a_neg = -mu / sigma;
  std::vector<double> g(static_cast<std::size_t>(s.d), 0.0);
  for (std::size_t i = 0; i < s.vectors.size(); ++i) {
    const double a = s.labels[i] == 1 ? a_pos : a_neg;
    for (int j = 0; j < s.d; ++j) g[static_cast<std::size_t>(j)] += a * s.vectors[i][static_cast<std::size_t>(j)];
  }
  for (double& x : g) x /= static_cast<double>(n);
  return g;
}

inline double balance_term(int c, int m) {
  if (c < 1 || m < 1) throw std::invalid_argument("balance term needs c >= 1 and m >= 1");
  const double n = static_cast<double>(c + m);
  return static_cast<double>(c) * static_cast<double>(m) / (n * n);
}

struct NormDecomposition {
  double balance = 0.0;       // cm / (c + m)^2
  double mean_diff_sq = 0.0;  // ||vbar_correct - vbar_incorrect||^2
  double norm_sq = 0.0;       // balance * mean_diff_sq
};

// Closed form for ||group_gradient||^2; exact identity, not an estimate.
inline NormDecomposition closed_form_norm(const GradientSample& s) {
  const detail::ClassMeans cm = detail::class_means(s);
  NormDecomposition out;
  out.balance = balance_term(cm.c, cm.m);
  for (int j = 0; j < s.d; ++j) {
    const double diff = cm.correct[static_cast<std::size_t>(j)] - cm.incorrect[static_cast<std::size_t>(j)];
    out.mean_diff_sq += diff * diff;
  }
  out.norm_sq = out.balance * out.mean_diff_sq;
  return out;
}

// Balance factor as a function of m for fixed c.
inline std::vector<std::pair<int, double>> balance_sweep(int c, int m_min, int m_max) {
  if (c < 1 || m_min < 1 || m_max < m_min)
    throw std::invalid_argument("balance sweep needs c >= 1 and 1 <= m_min <= m_max");
  std::vector<std::pair<int, double>> out;
  out.reserve(static_cast<std::size_t>(m_max - m_min + 1));
  for (int m = m_min; m <= m_max; ++m) out.emplace_back(m, balance_term(c, m));
  return out;
}

}  // namespace aero
