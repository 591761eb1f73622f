// SPDX-License-Identifier: Apache-2.0
//
// Two-stage adaptive rollout allocation. Stage I draws n_explore rollouts per
// query and stratifies queries by empirical success rate. Stage II spends the
// remaining (n_total - n_explore) * batch budget from a shared ledger:
// near-zero-accuracy queries get iterative rescue increments, partially
// correct groups are downsampled toward a 1:1 correct/incorrect mix, and
// groups with no reward variance are kept alive through posterior-smoothed
// advantages instead of being dropped.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aero/advantage.hpp"
#include "aero/core.hpp"
#include "aero/oracle.hpp"
#include "aero/rng.hpp"

namespace aero {

// Shared stage-II budget plus per-query rollout counts. Exploration counts
// toward the per-query cap but not against the stage-II budget.
class BudgetLedger {
 public:
  BudgetLedger() = default;
  explicit BudgetLedger(std::int64_t total_budget) : total_budget_(total_budget) {
    if (total_budget < 0) throw std::invalid_argument("budget must be >= 0");
  }

  std::int64_t total_budget() const { return total_budget_; }
  std::int64_t spent() const { return spent_; }
  std::int64_t remaining() const { return total_budget_ - spent_; }

  int count(const QueryId& query) const {
    const auto it = per_query_.find(query);
    return it == per_query_.end() ? 0 : it->second;
  }
  const std::unordered_map<QueryId, int>& per_query_counts() const { return per_query_; }

  void note_exploration(const QueryId& query, int n) {
    if (n < 0) throw std::invalid_argument("exploration count must be >= 0");
    per_query_[query] += n;
  }

  // Callers must have checked remaining() and the per-query cap; violating
  // either here is a programming error, not an input error.
  void spend(const QueryId& query, int n, int n_max) {
    if (n < 1) throw std::invalid_argument("spend amount must be >= 1");
    if (spent_ + n > total_budget_) throw std::logic_error("ledger overspend");
    if (count(query) + n > n_max) throw std::logic_error("per-query cap exceeded");
    spent_ += n;
    per_query_[query] += n;
  }

  // Returns rollouts a dried-up source failed to deliver.
  void refund(const QueryId& query, int n) {
    if (n < 0 || n > count(query) || n > spent_)
      throw std::logic_error("invalid ledger refund");
    spent_ -= n;
    per_query_[query] -= n;
  }

  bool operator==(const BudgetLedger&) const = default;

 private:
  std::int64_t total_budget_ = 0;
  std::int64_t spent_ = 0;
  std::unordered_map<QueryId, int> per_query_;
};

struct StratumCounts {
  int rescue = 0;
  int low_partial = 0;
  int high = 0;
  bool operator==(const StratumCounts&) const = default;
};

namespace detail {

// Thresholds compare exact rationals: u <= S/n_explore becomes
// c * n_explore <= S * n, and u >= 1/2 becomes 2c >= n.
inline StratumLabel stratum_for(int c, int n, int S, int n_explore) {
  if (static_cast<long long>(c) * n_explore <= static_cast<long long>(S) * n)
    return StratumLabel::Rescue;
  if (2 * c >= n) return StratumLabel::High;
  return StratumLabel::LowPartial;
}

inline void bump(StratumCounts& counts, StratumLabel label) {
  switch (label) {
    case StratumLabel::Rescue: counts.rescue += 1; break;
    case StratumLabel::LowPartial: counts.low_partial += 1; break;
    case StratumLabel::High: counts.high += 1; break;
  }
}

}  // namespace detail

inline StratumLabel stratify(const GroupObservation& obs, const AeroConfig& cfg) {
  validate_config(cfg);
  if (obs.n() != cfg.n_explore)
    throw std::invalid_argument("stratify requires exactly n_explore rollouts");
  return detail::stratum_for(obs.c, obs.n(), cfg.S, cfg.n_explore);
}

// --- stage II: iterative rescue ---------------------------------------------

enum class RescueStatus { RescuedAt, BudgetExhausted, CapReached };

struct RescueOutcome {
  RescueStatus status = RescueStatus::CapReached;
  int success_iteration = 0;  // 1-based; 0 unless status == RescuedAt
  int iterations_used = 0;
  std::vector<RolloutRecord> drawn;
};

namespace detail {

struct RescueIteration {
  enum class Outcome { Success, Failure, BlockedBudget, BlockedCap, SourceExhausted };
  Outcome outcome = Outcome::Failure;
  std::vector<RolloutRecord> drawn;
};

// One n_extra increment for one query. The ledger charge is committed before
// drawing and partially refunded only if the source dries up mid-iteration,
// so ledger.spent always equals the number of stage-II rollouts that exist.
inline RescueIteration rescue_once(const QueryId& query, RolloutSource& source,
                                   BudgetLedger& ledger, const AeroConfig& cfg,
                                   RngStream& rng, int iteration) {
  RescueIteration out;
  if (ledger.remaining() < cfg.n_extra) {
    out.outcome = RescueIteration::Outcome::BlockedBudget;
    return out;
  }
  if (ledger.count(query) + cfg.n_extra > cfg.n_max) {
    out.outcome = RescueIteration::Outcome::BlockedCap;
    return out;
  }
  ledger.spend(query, cfg.n_extra, cfg.n_max);
  bool success = false;
  bool dry = false;
  for (int i = 0; i < cfg.n_extra; ++i) {
    auto rec = source.draw(query, RolloutPhase::rescue(iteration), rng);
    if (!rec) {
      dry = true;
      break;
    }
    success = success || rec->correct;
    out.drawn.push_back(std::move(*rec));
  }
  if (dry) ledger.refund(query, cfg.n_extra - static_cast<int>(out.drawn.size()));
  out.outcome = success               ? RescueIteration::Outcome::Success
                : dry                 ? RescueIteration::Outcome::SourceExhausted
                                      : RescueIteration::Outcome::Failure;
  return out;
}

}  // namespace detail

// Draws n_extra rollouts per iteration, at most K_max iterations, stopping at
// the first iteration that contains a correct rollout or as soon as the
// ledger, the n_max cap, or the source blocks the next increment.
inline RescueOutcome rescue(const QueryId& query, RolloutSource& source, BudgetLedger& ledger,
                            const AeroConfig& cfg, RngStream& rng) {
  validate_config(cfg);
  RescueOutcome out;
  for (int iteration = 1; iteration <= cfg.K_max; ++iteration) {
    detail::RescueIteration it = detail::rescue_once(query, source, ledger, cfg, rng, iteration);
    for (auto& r : it.drawn) out.drawn.push_back(std::move(r));
    switch (it.outcome) {
      case detail::RescueIteration::Outcome::Success:
        out.status = RescueStatus::RescuedAt;
        out.success_iteration = iteration;
        out.iterations_used = iteration;
        return out;
      case detail::RescueIteration::Outcome::Failure:
        out.iterations_used = iteration;
        break;
      case detail::RescueIteration::Outcome::BlockedBudget:
        out.status = RescueStatus::BudgetExhausted;
        return out;
      case detail::RescueIteration::Outcome::BlockedCap:
        out.status = RescueStatus::CapReached;
        return out;
      case detail::RescueIteration::Outcome::SourceExhausted:
        out.iterations_used = iteration;
        out.status = RescueStatus::CapReached;
        return out;
    }
  }
  out.status = RescueStatus::CapReached;  // K_max iterations, no success
  return out;
}

// --- curation ----------------------------------------------------------------

struct PairSelection {
  std::vector<RolloutRecord> kept;
  bool needs_bayesian = false;  // set when no incorrect rollout exists at all
};

// Curates a successfully rescued query down to a balanced pair: the first
// correct rescue-phase rollout plus one incorrect rollout drawn uniformly
// from both phases.
inline PairSelection pair_rescued(const std::vector<RolloutRecord>& exploration,
                                  const std::vector<RolloutRecord>& rescue_rollouts,
                                  RngStream& rng) {
  const RolloutRecord* first_correct = nullptr;
  for (const auto& r : rescue_rollouts)
    if (r.correct) {
      first_correct = &r;
      break;
    }
  if (first_correct == nullptr)
    throw std::invalid_argument("pair_rescued requires a correct rescue rollout");
  std::vector<const RolloutRecord*> incorrect;
  for (const auto& r : exploration)
    if (!r.correct) incorrect.push_back(&r);
  for (const auto& r : rescue_rollouts)
    if (!r.correct) incorrect.push_back(&r);
  PairSelection out;
  out.kept.push_back(*first_correct);
  if (incorrect.empty()) {
    out.needs_bayesian = true;  // single-rollout group; empirical would collapse
    return out;
  }
  out.kept.push_back(*incorrect[rng.below(incorrect.size())]);
  return out;
}

// Keeps all c correct rollouts plus min(k*c, m) incorrect ones chosen
// uniformly without replacement, preserving original order within each class.
inline std::vector<RolloutRecord> reject_downsample(const GroupObservation& obs, int k,
                                                    RngStream& rng) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (obs.c < 1) throw std::invalid_argument("reject_downsample requires at least one correct rollout");
  std::vector<RolloutRecord> kept;
  for (const auto& r : obs.rollouts)
    if (r.correct) kept.push_back(r);
  const long long want = std::min<long long>(static_cast<long long>(k) * obs.c, obs.m);
  if (want > 0) {
    std::vector<const RolloutRecord*> incorrect;
    incorrect.reserve(static_cast<std::size_t>(obs.m));
    for (const auto& r : obs.rollouts)
      if (!r.correct) incorrect.push_back(&r);
    for (int idx : rng.sample_indices(obs.m, static_cast<int>(want)))
      kept.push_back(*incorrect[static_cast<std::size_t>(idx)]);
  }
  return kept;
}

struct CuratedGroup {
  QueryId query_id;
  StratumLabel stratum = StratumLabel::High;
  std::vector<RolloutRecord> kept_rollouts;
  AdvantageSet advantages;  // aligned with kept_rollouts
  int rescue_iterations_used = 0;
  bool rescued = false;

  bool operator==(const CuratedGroup&) const = default;
};

// A group whose rewards are all identical carries no within-group contrast;
// instead of dropping it, keep a small uniformly chosen subset and give it
// posterior-smoothed advantages computed from the full observed tally (not
// the retained subset, which would overstate the surprise).
inline CuratedGroup curate_dead_zone(const GroupObservation& obs, const AeroConfig& cfg,
                                     RngStream& rng) {
  validate_config(cfg);
  if (!obs.all_same_reward())
    throw std::invalid_argument("curate_dead_zone requires an all-same-reward group");
  const bool all_correct = obs.m == 0;
  CuratedGroup out;
  out.query_id = obs.query_id;
  out.stratum = all_correct ? StratumLabel::High : StratumLabel::Rescue;
  const int keep = std::min(cfg.zero_adv_retain, obs.n());
  for (int idx : rng.sample_indices(obs.n(), keep))
    out.kept_rollouts.push_back(obs.rollouts[static_cast<std::size_t>(idx)]);
  const std::vector<int> kept_rewards(static_cast<std::size_t>(keep), all_correct ? 1 : 0);
  out.advantages =
      bayesian_advantages_from_tally(kept_rewards, obs.c, obs.n(), cfg.alpha0, cfg.beta0);
  return out;
}

// --- full steps ----------------------------------------------------------------

struct StepResult {
  std::vector<CuratedGroup> groups;            // training set, batch order
  std::vector<GroupObservation> observations;  // full post-stage-II tallies, batch order
  BudgetLedger ledger;
  StratumCounts stratum_counts;
  int rescued_count = 0;
  std::int64_t total_rollouts_generated = 0;
  std::int64_t total_rollouts_trained = 0;
  std::int64_t total_tokens_generated = 0;

  bool operator==(const StepResult&) const = default;
};

namespace detail {

inline void check_batch(const std::vector<QueryId>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
  std::unordered_set<QueryId> seen;
  for (const auto& q : batch)
    if (!seen.insert(q).second) throw std::invalid_argument("duplicate query in batch: " + q);
}

inline std::vector<int> rewards_of(const std::vector<RolloutRecord>& rollouts) {
  std::vector<int> r;
  r.reserve(rollouts.size());
  for (const auto& rec : rollouts) r.push_back(rec.correct ? 1 : 0);
  return r;
}

inline std::int64_t token_sum(const std::vector<RolloutRecord>& rollouts) {
  std::int64_t t = 0;
  for (const auto& r : rollouts) t += r.tokens;
  return t;
}

}  // namespace detail

// One full allocation step. All randomness comes from streams derived from
// (cfg.seed, purpose, batch position), so a rerun with the same seed, config,
// and source state reproduces the result bit for bit, and exploration draws
// coincide with a fixed-budget run of the same seed.
inline StepResult run_step_aero(const std::vector<QueryId>& batch, RolloutSource& source,
                                const AeroConfig& cfg) {
  validate_config(cfg);
  detail::check_batch(batch);
  const std::size_t P = batch.size();

  StepResult result;
  result.ledger = BudgetLedger(static_cast<std::int64_t>(cfg.n_total - cfg.n_explore) *
                               static_cast<std::int64_t>(P));

  // Stage I: exploration and stratification.
  std::vector<GroupObservation> exploration(P);
  std::vector<StratumLabel> labels(P);
  for (std::size_t qi = 0; qi < P; ++qi) {
    RngStream ex = derive_stream(cfg.seed, StreamKind::Explore, qi);
    std::vector<RolloutRecord> rollouts;
    rollouts.reserve(static_cast<std::size_t>(cfg.n_explore));
    for (int j = 0; j < cfg.n_explore; ++j) {
      auto rec = source.draw(batch[qi], RolloutPhase::exploration(), ex);
      if (!rec)
        throw std::runtime_error("rollout source exhausted during exploration for query " +
                                 batch[qi]);
      rollouts.push_back(std::move(*rec));
    }
    result.ledger.note_exploration(batch[qi], cfg.n_explore);
    exploration[qi] = observe(batch[qi], std::move(rollouts));
    labels[qi] = detail::stratum_for(exploration[qi].c, exploration[qi].n(), cfg.S, cfg.n_explore);
    detail::bump(result.stratum_counts, labels[qi]);
  }

  // Stage II: round-robin rescue over the shared ledger. Iteration i of every
  // still-active query runs before iteration i+1 of any query, so early
  // successes release budget to the rest of the stratum.
  struct RescueState {
    std::size_t qi = 0;
    RngStream rng{0};
    std::vector<RolloutRecord> drawn;
    int iterations_used = 0;
    bool success = false;
    bool done = false;
  };
  std::vector<RescueState> rescue_states;
  for (std::size_t qi = 0; qi < P; ++qi)
    if (labels[qi] == StratumLabel::Rescue) {
      RescueState st;
      st.qi = qi;
      st.rng = derive_stream(cfg.seed, StreamKind::Rescue, qi);
      rescue_states.push_back(std::move(st));
    }
  std::size_t active = rescue_states.size();
  while (active > 0) {
    for (auto& st : rescue_states) {
      if (st.done) continue;
      if (st.iterations_used >= cfg.K_max) {
        st.done = true;
        --active;
        continue;
      }
      detail::RescueIteration it = detail::rescue_once(
          batch[st.qi], source, result.ledger, cfg, st.rng, st.iterations_used + 1);
      for (auto& r : it.drawn) st.drawn.push_back(std::move(r));
      switch (it.outcome) {
        case detail::RescueIteration::Outcome::Success:
          st.iterations_used += 1;
          st.success = true;
          st.done = true;
          --active;
          break;
        case detail::RescueIteration::Outcome::Failure:
          st.iterations_used += 1;
          break;
        case detail::RescueIteration::Outcome::SourceExhausted:
          st.iterations_used += 1;
          st.done = true;
          --active;
          break;
        case detail::RescueIteration::Outcome::BlockedBudget:
        case detail::RescueIteration::Outcome::BlockedCap:
          st.done = true;
          --active;
          break;
      }
    }
  }
  std::unordered_map<std::size_t, RescueState*> rescue_by_query;
  for (auto& st : rescue_states) rescue_by_query[st.qi] = &st;

  // Stage III: per-query curation.
  result.observations.reserve(P);
  result.groups.reserve(P);
  for (std::size_t qi = 0; qi < P; ++qi) {
    RngStream curate = derive_stream(cfg.seed, StreamKind::Curate, qi);
    GroupObservation full = exploration[qi];
    RescueState* rs = nullptr;
    if (const auto it = rescue_by_query.find(qi); it != rescue_by_query.end()) rs = it->second;
    if (rs != nullptr && !rs->drawn.empty()) {
      std::vector<RolloutRecord> merged = full.rollouts;
      for (const auto& r : rs->drawn) merged.push_back(r);
      full = observe(batch[qi], std::move(merged));
    }

    CuratedGroup group;
    group.query_id = batch[qi];
    group.stratum = labels[qi];
    switch (labels[qi]) {
      case StratumLabel::Rescue: {
        group.rescue_iterations_used = rs ? rs->iterations_used : 0;
        if (rs != nullptr && rs->success) {
          PairSelection pair = pair_rescued(exploration[qi].rollouts, rs->drawn, curate);
          group.kept_rollouts = std::move(pair.kept);
          group.rescued = true;
          result.rescued_count += 1;
          group.advantages =
              pair.needs_bayesian
                  ? bayesian_advantages_from_tally(detail::rewards_of(group.kept_rollouts),
                                                   full.c, full.n(), cfg.alpha0, cfg.beta0)
                  : empirical_advantages(detail::rewards_of(group.kept_rollouts));
        } else if (full.all_same_reward()) {
          group = curate_dead_zone(full, cfg, curate);
          group.rescue_iterations_used = rs ? rs->iterations_used : 0;
        } else {
          // Only reachable with S > 0: exploration held a few successes but
          // no rescue iteration produced one. Downsample like a partial group.
          group.rescue_iterations_used = rs ? rs->iterations_used : 0;
          group.kept_rollouts = reject_downsample(full, cfg.k, curate);
          group.advantages = empirical_advantages(detail::rewards_of(group.kept_rollouts));
        }
        break;
      }
      case StratumLabel::LowPartial: {
        group.kept_rollouts = reject_downsample(full, cfg.k, curate);
        group.advantages = empirical_advantages(detail::rewards_of(group.kept_rollouts));
        break;
      }
      case StratumLabel::High: {
        if (full.all_same_reward()) {
          group = curate_dead_zone(full, cfg, curate);
        } else {
          group.kept_rollouts = full.rollouts;
          group.advantages = empirical_advantages(detail::rewards_of(group.kept_rollouts));
        }
        break;
      }
    }
    result.total_rollouts_trained += static_cast<std::int64_t>(group.kept_rollouts.size());
    result.total_tokens_generated += detail::token_sum(full.rollouts);
    result.groups.push_back(std::move(group));
    result.observations.push_back(std::move(full));
  }
  result.total_rollouts_generated =
      static_cast<std::int64_t>(cfg.n_explore) * static_cast<std::int64_t>(P) +
      result.ledger.spent();
  return result;
}

enum class FixedMode { Grpo, DapoFilter };

// Fixed-budget baseline: N rollouts per query. Grpo keeps everything
// (degenerate groups contribute all-zero advantages); DapoFilter drops
// degenerate groups from the training set but still pays their rollout cost.
// Exploration streams match run_step_aero's, so the first min(N, n_explore)
// draws of a query coincide with the adaptive run at the same seed.
inline StepResult run_step_fixed(const std::vector<QueryId>& batch, RolloutSource& source,
                                 int N, FixedMode mode, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  detail::check_batch(batch);
  const std::size_t P = batch.size();

  StepResult result;
  result.ledger = BudgetLedger(0);
  result.observations.reserve(P);
  for (std::size_t qi = 0; qi < P; ++qi) {
    RngStream ex = derive_stream(seed, StreamKind::Explore, qi);
    std::vector<RolloutRecord> rollouts;
    rollouts.reserve(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
      auto rec = source.draw(batch[qi], RolloutPhase::exploration(), ex);
      if (!rec)
        throw std::runtime_error("rollout source exhausted during generation for query " +
                                 batch[qi]);
      rollouts.push_back(std::move(*rec));
    }
    result.ledger.note_exploration(batch[qi], N);
    GroupObservation obs = observe(batch[qi], std::move(rollouts));
    const StratumLabel label = detail::stratum_for(obs.c, obs.n(), 0, 1);
    detail::bump(result.stratum_counts, label);
    result.total_tokens_generated += detail::token_sum(obs.rollouts);

    const bool degenerate = obs.all_same_reward();
    if (mode == FixedMode::Grpo || !degenerate) {
      CuratedGroup group;
      group.query_id = batch[qi];
      group.stratum = label;
      group.kept_rollouts = obs.rollouts;
      group.advantages = empirical_advantages(detail::rewards_of(group.kept_rollouts));
      result.total_rollouts_trained += static_cast<std::int64_t>(group.kept_rollouts.size());
      result.groups.push_back(std::move(group));
    }
    result.observations.push_back(std::move(obs));
  }
  result.total_rollouts_generated = static_cast<std::int64_t>(N) * static_cast<std::int64_t>(P);
  return result;
}

}  // namespace aero
