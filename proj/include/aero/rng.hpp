// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random streams. Every stochastic component derives its own
// stream from (seed, purpose tags), so results are bit-identical across runs
// and independent of evaluation order. Distributions are implemented here
// rather than taken from <random> because the standard specifies engines but
// not distributions, and reruns must be byte-identical.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aero {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream purposes. Values are part of the determinism contract: changing them
// changes every downstream draw.
enum class StreamKind : std::uint64_t {
  Pool = 1,
  Explore = 2,
  Rescue = 3,
  Curate = 4,
  Misc = 5,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // (0, 1); safe under log().
  double uniform01_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli: p outside [0,1]");
    return uniform01() < p;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double normal() {
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Marsaglia-Tsang; shape boost for a < 1.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform01_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // k distinct indices from [0, n), ascending. Partial Fisher-Yates.
  std::vector<int> sample_indices(int n, int k) {
    if (k < 0 || n < 0 || k > n) throw std::invalid_argument("sample_indices: need 0 <= k <= n");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t state_;
};

// Canonical way to build a stream: fold purpose tags into the seed.
inline RngStream derive_stream(std::uint64_t seed, StreamKind kind,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ static_cast<std::uint64_t>(kind));
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  return RngStream(s);
}

// Per-step seed for multi-step runs.
inline std::uint64_t step_seed(std::uint64_t run_seed, int step) {
  return mix64(run_seed ^ mix64(static_cast<std::uint64_t>(step) + 0x5bd1e995u));
}

}  // namespace aero
