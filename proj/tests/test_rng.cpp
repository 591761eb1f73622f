// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "aero/rng.hpp"

using namespace aero;

TEST_CASE("identical seeds replay identical sequences", "[rng]") {
  RngStream a = derive_stream(42, StreamKind::Explore, 7);
  RngStream b = derive_stream(42, StreamKind::Explore, 7);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next() == b.next());
}

TEST_CASE("derived streams with different tags diverge", "[rng]") {
  RngStream a = derive_stream(42, StreamKind::Explore, 7);
  RngStream b = derive_stream(42, StreamKind::Explore, 8);
  RngStream c = derive_stream(42, StreamKind::Rescue, 7);
  RngStream d = derive_stream(43, StreamKind::Explore, 7);
  int same_ab = 0, same_ac = 0, same_ad = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t x = a.next();
    same_ab += x == b.next();
    same_ac += x == c.next();
    same_ad += x == d.next();
  }
  REQUIRE(same_ab == 0);
  REQUIRE(same_ac == 0);
  REQUIRE(same_ad == 0);
}

TEST_CASE("uniform01 stays inside the unit interval", "[rng]") {
  RngStream rng = derive_stream(1, StreamKind::Misc, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.01);
  REQUIRE(hi > 0.99);
}

TEST_CASE("bernoulli respects degenerate probabilities and rejects invalid ones", "[rng]") {
  RngStream rng = derive_stream(2, StreamKind::Misc, 0);
  for (int i = 0; i < 100; ++i) {
    REQUIRE_FALSE(rng.bernoulli(0.0));
    REQUIRE(rng.bernoulli(1.0));
  }
  REQUIRE_THROWS_AS(rng.bernoulli(-0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(rng.bernoulli(1.1), std::invalid_argument);
}

TEST_CASE("below covers its range and rejects zero", "[rng]") {
  RngStream rng = derive_stream(3, StreamKind::Misc, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = rng.below(7);
    REQUIRE(x < 7);
    seen.insert(x);
  }
  REQUIRE(seen.size() == 7);
  REQUIRE_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("sample_indices returns sorted distinct subsets", "[rng]") {
  RngStream rng = derive_stream(4, StreamKind::Misc, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(30));
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 1));
    const std::vector<int> idx = rng.sample_indices(n, k);
    REQUIRE(static_cast<int>(idx.size()) == k);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      REQUIRE(idx[i] >= 0);
      REQUIRE(idx[i] < n);
      if (i > 0) REQUIRE(idx[i] > idx[i - 1]);
    }
  }
  const std::vector<int> all = rng.sample_indices(5, 5);
  REQUIRE(all == std::vector<int>{0, 1, 2, 3, 4});
  REQUIRE_THROWS_AS(rng.sample_indices(3, 4), std::invalid_argument);
}

TEST_CASE("sample_indices is close to uniform over subsets", "[rng]") {
  RngStream rng = derive_stream(5, StreamKind::Misc, 0);
  std::vector<int> hits(8, 0);
  const int trials = 80000;
  for (int t = 0; t < trials; ++t)
    for (int i : rng.sample_indices(8, 4)) hits[static_cast<std::size_t>(i)] += 1;
  for (int h : hits)  // each index kept with probability 1/2
    REQUIRE(std::abs(static_cast<double>(h) / trials - 0.5) < 0.01);
}

TEST_CASE("normal moments match the standard gaussian", "[rng]") {
  RngStream rng = derive_stream(6, StreamKind::Misc, 0);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  REQUIRE(std::abs(sum / n) < 0.01);
  REQUIRE(std::abs(sum_sq / n - 1.0) < 0.02);
}

TEST_CASE("gamma and beta moments match their parameters", "[rng]") {
  RngStream rng = derive_stream(7, StreamKind::Misc, 0);
  const int n = 200000;
  double gamma_sum = 0.0;
  for (int i = 0; i < n; ++i) gamma_sum += rng.gamma(2.5);
  REQUIRE(std::abs(gamma_sum / n - 2.5) < 0.02);

  double gamma_small = 0.0;  // shape < 1 exercises the boost branch
  for (int i = 0; i < n; ++i) gamma_small += rng.gamma(0.6);
  REQUIRE(std::abs(gamma_small / n - 0.6) < 0.02);

  double beta_sum = 0.0;
  for (int i = 0; i < n; ++i) beta_sum += rng.beta(2.0, 6.0);
  REQUIRE(std::abs(beta_sum / n - 0.25) < 0.005);
  REQUIRE_THROWS_AS(rng.gamma(0.0), std::invalid_argument);
}

TEST_CASE("step seeds differ across steps", "[rng]") {
  std::set<std::uint64_t> seeds;
  for (int step = 0; step < 100; ++step) seeds.insert(step_seed(123, step));
  REQUIRE(seeds.size() == 100);
}
