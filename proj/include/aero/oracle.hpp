// SPDX-License-Identifier: Apache-2.0
//
// Rollout sources. The synthetic source models each query as a Bernoulli
// trial with a latent success rate drawn from a difficulty mixture; the trace
// source replays recorded rollouts. The allocator only ever sees the
// RolloutSource interface plus its own RNG streams, so a trace replay of a
// synthetic run reproduces the exact same step result.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aero/core.hpp"
#include "aero/rng.hpp"

namespace aero {

// --- difficulty mixtures ---------------------------------------------------

struct DifficultyComponent {
  enum class Kind { PointMass, Beta };
  Kind kind = Kind::PointMass;
  double weight = 0.0;
  double p = 0.0;  // PointMass location
  double a = 1.0;  // Beta shape parameters
  double b = 1.0;

  static DifficultyComponent point_mass(double weight, double p) {
    return {Kind::PointMass, weight, p, 1.0, 1.0};
  }
  static DifficultyComponent beta(double weight, double a, double b) {
    return {Kind::Beta, weight, 0.0, a, b};
  }
  bool operator==(const DifficultyComponent&) const = default;
};

// unsolvable_mass is the weight of the p = 0 point mass, kept separate so the
// solvable/unsolvable split is explicit. Component weights plus
// unsolvable_mass must sum to 1.
struct DifficultySpec {
  std::vector<DifficultyComponent> components;
  double unsolvable_mass = 0.0;
  bool operator==(const DifficultySpec&) const = default;
};

inline void validate_spec(const DifficultySpec& spec) {
  if (spec.unsolvable_mass < 0.0 || spec.unsolvable_mass > 1.0)
    throw std::invalid_argument("unsolvable_mass must lie in [0,1]");
  double total = spec.unsolvable_mass;
  for (const auto& c : spec.components) {
    if (c.weight < 0.0) throw std::invalid_argument("component weight must be >= 0");
    if (c.kind == DifficultyComponent::Kind::PointMass) {
      if (c.p < 0.0 || c.p > 1.0) throw std::invalid_argument("point mass p must lie in [0,1]");
    } else {
      if (!(c.a > 0.0) || !(c.b > 0.0))
        throw std::invalid_argument("beta shapes must be positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("difficulty weights must sum to 1");
}

// Difficulty profile calibrated so that with 8 exploratory rollouts roughly
// 35% of queries see zero successes, matching a mid-size model on hard math
// sets. Derivation: E[(1-p)^8] over the mixture = 0.12 + 0.88 * b/(b+8) with
// Beta(1, b); b = 2.83 puts the integral at 0.3500.
inline DifficultySpec paperlike_1p5b() {
  DifficultySpec spec;
  spec.unsolvable_mass = 0.12;
  spec.components.push_back(DifficultyComponent::beta(0.88, 1.0, 2.83));
  return spec;
}

inline std::optional<DifficultySpec> preset_difficulty(const std::string& name) {
  if (name == "paperlike-1.5b") return paperlike_1p5b();
  return std::nullopt;
}

// Exact E_p[(1-p)^n] over the mixture: the probability that n independent
// rollouts of a random query all fail. Beta components use
// B(a, b+n) / B(a, b) evaluated through lgamma.
inline double expected_zero_rate(const DifficultySpec& spec, int n) {
  validate_spec(spec);
  if (n < 0) throw std::invalid_argument("expected_zero_rate: n must be >= 0");
  double total = spec.unsolvable_mass;  // (1-0)^n = 1
  for (const auto& c : spec.components) {
    if (c.kind == DifficultyComponent::Kind::PointMass) {
      total += c.weight * std::pow(1.0 - c.p, n);
    } else {
      const double log_ratio = std::lgamma(c.b + n) - std::lgamma(c.b) +
                               std::lgamma(c.a + c.b) - std::lgamma(c.a + c.b + n);
      total += c.weight * std::exp(log_ratio);
    }
  }
  return total;
}

// --- query pools -------------------------------------------------------------

struct QueryEntry {
  QueryId id;
  double latent_p = 0.0;
  bool operator==(const QueryEntry&) const = default;
};

class QueryPool {
 public:
  QueryPool() = default;
  explicit QueryPool(std::vector<QueryEntry> queries) : queries_(std::move(queries)) {
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      if (!index_.emplace(queries_[i].id, i).second)
        throw std::invalid_argument("duplicate query id in pool: " + queries_[i].id);
      const double p = queries_[i].latent_p;
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("latent_p must lie in [0,1]");
    }
  }

  const std::vector<QueryEntry>& queries() const { return queries_; }
  std::size_t size() const { return queries_.size(); }

  double latent_p(const QueryId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown query id: " + id);
    return queries_[it->second].latent_p;
  }

  std::vector<QueryId> ids() const {
    std::vector<QueryId> out;
    out.reserve(queries_.size());
    for (const auto& q : queries_) out.push_back(q.id);
    return out;
  }

  bool operator==(const QueryPool& other) const { return queries_ == other.queries_; }

 private:
  std::vector<QueryEntry> queries_;
  std::unordered_map<QueryId, std::size_t> index_;
};

// Each query's latent rate comes from its own derived stream, so pools are
// reproducible and insensitive to construction order.
inline QueryPool make_pool(const DifficultySpec& spec, std::size_t size, std::uint64_t seed) {
  validate_spec(spec);
  std::vector<QueryEntry> queries;
  queries.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    RngStream rng = derive_stream(seed, StreamKind::Pool, i);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "q%06zu", i);
    double p = 0.0;
    double x = rng.uniform01();
    if (x >= spec.unsolvable_mass) {
      x -= spec.unsolvable_mass;
      p = 0.0;
      for (const auto& c : spec.components) {
        if (x < c.weight || &c == &spec.components.back()) {
          p = c.kind == DifficultyComponent::Kind::PointMass ? c.p : rng.beta(c.a, c.b);
          break;
        }
        x -= c.weight;
      }
    }
    queries.push_back(QueryEntry{buf, p});
  }
  return QueryPool(std::move(queries));
}

// Latent improvement drift: logit shift by eta * signal, with 0 and 1 fixed
// points (unsolvable queries stay unsolvable). signal is typically the batch
// mean |advantage| from the previous step.
inline QueryPool apply_improvement(const QueryPool& pool, double signal, double eta) {
  std::vector<QueryEntry> queries = pool.queries();
  const double shift = eta * signal;
  for (auto& q : queries) {
    if (q.latent_p <= 0.0 || q.latent_p >= 1.0) continue;
    const double logit = std::log(q.latent_p / (1.0 - q.latent_p));
    q.latent_p = 1.0 / (1.0 + std::exp(-(logit + shift)));
  }
  return QueryPool(std::move(queries));
}

// --- rollout sources ---------------------------------------------------------

struct TokenSpec {
  enum class Kind { Constant, UniformRange };
  Kind kind = Kind::Constant;
  int constant = 512;
  int lo = 1;
  int hi = 1;

  static TokenSpec constant_length(int length) {
    if (length < 1) throw std::invalid_argument("token length must be >= 1");
    TokenSpec t;
    t.kind = Kind::Constant;
    t.constant = length;
    return t;
  }
  static TokenSpec uniform_range(int lo, int hi) {
    if (lo < 1 || hi < lo) throw std::invalid_argument("token range needs 1 <= lo <= hi");
    TokenSpec t;
    t.kind = Kind::UniformRange;
    t.lo = lo;
    t.hi = hi;
    return t;
  }

  int draw(RngStream& rng) const {
    return kind == Kind::Constant ? constant : rng.uniform_int(lo, hi);
  }
  bool operator==(const TokenSpec&) const = default;
};

// A source of rollouts for the allocator. draw() returns nullopt only when a
// replayed trace has no further record for the query at the current step;
// the allocator treats that as a hard cap on further sampling.
class RolloutSource {
 public:
  virtual ~RolloutSource() = default;
  virtual std::optional<RolloutRecord> draw(const QueryId& query, const RolloutPhase& phase,
                                            RngStream& rng) = 0;
  virtual void begin_step(int /*step*/) {}
};

// One Bernoulli(latent_p) outcome plus a token count, all taken from the
// caller's stream: (pool, query, stream) fully determine the record.
inline RolloutRecord sample_rollout(const QueryPool& pool, const QueryId& query,
                                    const TokenSpec& tokens, const RolloutPhase& phase,
                                    RngStream& rng) {
  const double p = pool.latent_p(query);  // throws on unknown query
  const bool correct = rng.bernoulli(p);
  return make_rollout(query, correct, tokens.draw(rng), phase);
}

class SyntheticSource final : public RolloutSource {
 public:
  SyntheticSource(QueryPool pool, TokenSpec tokens)
      : pool_(std::move(pool)), tokens_(tokens) {}

  std::optional<RolloutRecord> draw(const QueryId& query, const RolloutPhase& phase,
                                    RngStream& rng) override {
    return sample_rollout(pool_, query, tokens_, phase, rng);
  }

  const QueryPool& pool() const { return pool_; }

 private:
  QueryPool pool_;
  TokenSpec tokens_;
};

// --- trace files -------------------------------------------------------------
//
// One JSON object per line: {"query_id": "...", "step": 0, "correct": 0|1,
// "tokens": 17}. Records for one (query_id, step) replay in file order; a
// query's step values must be nondecreasing.

struct TraceRecord {
  QueryId query_id;
  int step = 0;
  bool correct = false;
  int tokens = 1;
  bool operator==(const TraceRecord&) const = default;
};

inline std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::unordered_map<QueryId, int> last_step;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                  ": malformed record: " + e.what());
    }
    const auto fail = [lineno](const std::string& what) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + what);
    };
    if (!j.is_object()) fail("record must be an object");
    if (!j.contains("query_id") || !j["query_id"].is_string()) fail("missing string field 'query_id'");
    if (!j.contains("step") || !j["step"].is_number_integer()) fail("missing integer field 'step'");
    if (!j.contains("correct") || !j["correct"].is_number_integer()) fail("missing integer field 'correct'");
    if (!j.contains("tokens") || !j["tokens"].is_number_integer()) fail("missing integer field 'tokens'");
    TraceRecord r;
    r.query_id = j["query_id"].get<std::string>();
    r.step = j["step"].get<int>();
    const int correct = j["correct"].get<int>();
    r.tokens = j["tokens"].get<int>();
    if (r.step < 0) fail("step must be >= 0");
    if (correct != 0 && correct != 1) fail("correct must be 0 or 1");
    if (r.tokens < 1) fail("tokens must be >= 1");
    r.correct = correct == 1;
    const auto it = last_step.find(r.query_id);
    if (it != last_step.end() && r.step < it->second)
      fail("out-of-order step for query '" + r.query_id + "'");
    last_step[r.query_id] = r.step;
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_trace_record(std::ostream& out, const TraceRecord& r) {
  nlohmann::json j;
  j["query_id"] = r.query_id;
  j["step"] = r.step;
  j["correct"] = r.correct ? 1 : 0;
  j["tokens"] = r.tokens;
  out << j.dump() << "\n";
}

// Appends every rollout of every observation, preserving per-query
// generation order, which is exactly the order a replay consumes them in.
inline void write_trace_step(std::ostream& out, int step,
                             const std::vector<GroupObservation>& observations) {
  for (const auto& obs : observations)
    for (const auto& r : obs.rollouts)
      write_trace_record(out, TraceRecord{r.query_id, step, r.correct, r.tokens});
}

class TraceSource final : public RolloutSource {
 public:
  explicit TraceSource(std::vector<TraceRecord> records) {
    for (auto& r : records) {
      auto [it, inserted] = index_.try_emplace(r.query_id);
      if (inserted) order_.push_back(r.query_id);
      it->second.records.push_back(std::move(r));
    }
  }

  void begin_step(int step) override { current_step_ = step; }

  std::optional<RolloutRecord> draw(const QueryId& query, const RolloutPhase& phase,
                                    RngStream& /*rng*/) override {
    const auto it = index_.find(query);
    if (it == index_.end()) throw std::out_of_range("query not present in trace: " + query);
    PerQuery& pq = it->second;
    while (pq.cursor < pq.records.size() && pq.records[pq.cursor].step < current_step_)
      ++pq.cursor;  // skip records an earlier step left unconsumed
    if (pq.cursor >= pq.records.size() || pq.records[pq.cursor].step != current_step_)
      return std::nullopt;
    const TraceRecord& r = pq.records[pq.cursor++];
    return make_rollout(query, r.correct, r.tokens, phase);
  }

  // Distinct query ids with records at the given step, in file order.
  std::vector<QueryId> step_query_ids(int step) const {
    std::vector<QueryId> out;
    for (const auto& id : order_) {
      const auto& recs = index_.at(id).records;
      for (const auto& r : recs)
        if (r.step == step) {
          out.push_back(id);
          break;
        }
    }
    return out;
  }

  int max_step() const {
    int m = -1;
    for (const auto& [id, pq] : index_)
      for (const auto& r : pq.records) m = std::max(m, r.step);
    return m;
  }

 private:
  struct PerQuery {
    std::vector<TraceRecord> records;
    std::size_t cursor = 0;
  };
  std::unordered_map<QueryId, PerQuery> index_;
  std::vector<QueryId> order_;
  int current_step_ = 0;
};

}  // namespace aero
