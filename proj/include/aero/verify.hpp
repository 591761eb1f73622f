// SPDX-License-Identifier: Apache-2.0
//
// Built-in self-checks: closed-form identities and Monte Carlo estimates the
// implementation must reproduce. Run through the CLI's verify subcommand.

#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "aero/advantage.hpp"
#include "aero/allocator.hpp"
#include "aero/gradproxy.hpp"
#include "aero/metrics.hpp"
#include "aero/oracle.hpp"
#include "aero/rng.hpp"

namespace aero {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

inline CheckResult check_balance_sweep() {
  // cm/(c+m)^2 must peak exactly at m = c with value 1/4, uniquely.
  for (int c = 1; c <= 16; ++c) {
    const auto sweep = balance_sweep(c, 1, 64);
    int argmax = 0;
    double best = -1.0;
    bool unique = true;
    for (const auto& [m, value] : sweep) {
      if (value > best) {
        best = value;
        argmax = m;
        unique = true;
      } else if (value == best) {
        unique = false;
      }
    }
    if (argmax != c || !unique || best != 0.25)
      return {"balance-sweep", false,
              detail::fmt("argmax failed at c=%g (argmax m=%g, peak %g)", static_cast<double>(c),
                          static_cast<double>(argmax), best)};
  }
  return {"balance-sweep", true, "unique argmax at m=c with peak 0.25 for all c in [1,16]"};
}

inline CheckResult check_gradient_identity() {
  RngStream rng = derive_stream(20260813, StreamKind::Misc, 1);
  const int dims[] = {4, 64, 512};
  double max_rel = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 1 + static_cast<int>(rng.below(16));
    const int m = 1 + static_cast<int>(rng.below(16));
    const int d = dims[trial % 3];
    const GradientSample s = synth_gradients(c, m, d, 1.0, rng);
    const std::vector<double> g = group_gradient(s);
    double norm_sq = 0.0;
    for (double x : g) norm_sq += x * x;
    const NormDecomposition closed = closed_form_norm(s);
    const double rel = std::abs(norm_sq - closed.norm_sq) / closed.norm_sq;
    if (rel > max_rel) max_rel = rel;
  }
  return {"gradient-identity", max_rel < 1e-9,
          detail::fmt("max relative error %.3g over 1000 samples (tolerance 1e-9)", max_rel)};
}

inline CheckResult check_posterior_safety() {
  for (int n = 1; n <= 64; ++n) {
    for (int c = 0; c <= n; ++c) {
      const PosteriorState post = posterior_update(make_posterior(1.0, 1.0), c, n);
      const double mean = posterior_mean(post);
      if (!(mean > 0.0 && mean < 1.0))
        return {"posterior-safety", false,
                detail::fmt("mean out of (0,1) at c=%g n=%g", static_cast<double>(c),
                            static_cast<double>(n))};
      if (c == 0 || c == n) {
        std::vector<int> rewards(static_cast<std::size_t>(n), c == 0 ? 0 : 1);
        const AdvantageSet empirical = empirical_advantages(rewards);
        for (double v : empirical.values)
          if (v != 0.0)
            return {"posterior-safety", false,
                    detail::fmt("empirical advantage nonzero on degenerate tally n=%g",
                                static_cast<double>(n))};
        const AdvantageSet bayes = bayesian_advantages(rewards, 1.0, 1.0);
        for (double v : bayes.values)
          if (v == 0.0)
            return {"posterior-safety", false,
                    detail::fmt("bayesian advantage zero at c=%g n=%g", static_cast<double>(c),
                                static_cast<double>(n))};
      }
    }
  }
  return {"posterior-safety", true,
          "posterior mean in (0,1) and nonzero smoothed advantages for all tallies up to n=64"};
}

inline CheckResult check_rescue_probability() {
  // Budget 8 at n_extra=2 allows exactly 4 iterations: the rescue success
  // rate must match 1 - (1-p)^8.
  AeroConfig cfg;
  cfg.n_extra = 2;
  cfg.K_max = 10;
  const int trials = 100000;
  std::string detail_text;
  for (const double p : {0.05, 0.2, 0.5}) {
    const QueryPool pool({QueryEntry{"q", p}});
    SyntheticSource source(pool, TokenSpec::constant_length(16));
    int successes = 0;
    for (int t = 0; t < trials; ++t) {
      BudgetLedger ledger(8);
      RngStream rng = derive_stream(99, StreamKind::Misc, static_cast<std::uint64_t>(t),
                                    static_cast<std::uint64_t>(p * 1000));
      const RescueOutcome out = rescue("q", source, ledger, cfg, rng);
      if (out.status == RescueStatus::RescuedAt) ++successes;
    }
    const double rate = static_cast<double>(successes) / trials;
    const double expected = 1.0 - std::pow(1.0 - p, 8);
    detail_text += detail::fmt("p=%.2f: %.4f vs %.4f; ", p, rate, expected);
    if (std::abs(rate - expected) > 0.01)
      return {"rescue-probability", false, detail_text + "outside +/-0.01"};
  }
  return {"rescue-probability", true, detail_text + "all within +/-0.01"};
}

inline CheckResult check_pass_at_n() {
  RngStream rng = derive_stream(7, StreamKind::Misc, 4);
  std::vector<std::vector<int>> outcomes(100000, std::vector<int>(8));
  for (auto& row : outcomes)
    for (int& r : row) r = rng.bernoulli(0.5) ? 1 : 0;
  const double measured = pass_at_n(outcomes, 8);
  const double expected = 1.0 - std::pow(0.5, 8);
  return {"pass-at-n", std::abs(measured - expected) <= 0.002,
          detail::fmt("measured %.5f vs analytic %.5f (tolerance 0.002)", measured, expected)};
}

}  // namespace detail

inline std::vector<CheckResult> run_verification() {
  return {detail::check_balance_sweep(), detail::check_gradient_identity(),
          detail::check_posterior_safety(), detail::check_rescue_probability(),
          detail::check_pass_at_n()};
}

}  // namespace aero
