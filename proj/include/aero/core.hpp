// SPDX-License-Identifier: Apache-2.0
//
// Core value types shared by the allocator, oracle, and reporting layers.

#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aero {

using QueryId = std::string;

// Where a rollout came from. Rescue iterations are 1-based.
struct RolloutPhase {
  enum class Kind { Exploration, Rescue };
  Kind kind = Kind::Exploration;
  int rescue_iteration = 0;

  static RolloutPhase exploration() { return {Kind::Exploration, 0}; }
  static RolloutPhase rescue(int iteration) {
    if (iteration < 1) throw std::invalid_argument("rescue iteration must be >= 1");
    return {Kind::Rescue, iteration};
  }
  bool operator==(const RolloutPhase&) const = default;
};

struct RolloutRecord {
  QueryId query_id;
  bool correct = false;
  int tokens = 1;  // prompt + response, >= 1
  RolloutPhase phase;

  bool operator==(const RolloutRecord&) const = default;
};

inline RolloutRecord make_rollout(QueryId query_id, bool correct, int tokens,
                                  RolloutPhase phase = RolloutPhase::exploration()) {
  if (tokens < 1) throw std::invalid_argument("rollout tokens must be >= 1");
  return RolloutRecord{std::move(query_id), correct, tokens, phase};
}

// One query's observed rollouts plus the (c, m) tally. The success rate c/n is
// kept exact: threshold comparisons cross-multiply integers, never doubles.
struct GroupObservation {
  QueryId query_id;
  std::vector<RolloutRecord> rollouts;
  int c = 0;  // correct
  int m = 0;  // incorrect

  int n() const { return c + m; }
  double u() const { return static_cast<double>(c) / static_cast<double>(n()); }
  bool all_same_reward() const { return c == 0 || m == 0; }

  bool operator==(const GroupObservation&) const = default;
};

inline GroupObservation observe(QueryId query_id, std::vector<RolloutRecord> rollouts) {
  if (rollouts.empty()) throw std::invalid_argument("group observation needs at least one rollout");
  GroupObservation obs;
  obs.query_id = std::move(query_id);
  for (const auto& r : rollouts) {
    if (r.query_id != obs.query_id)
      throw std::invalid_argument("rollout query_id does not match group");
    (r.correct ? obs.c : obs.m) += 1;
  }
  obs.rollouts = std::move(rollouts);
  return obs;
}

struct PosteriorState {
  double alpha = 1.0;
  double beta = 1.0;
  bool operator==(const PosteriorState&) const = default;
};

inline PosteriorState make_posterior(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("posterior parameters must be positive");
  return PosteriorState{alpha, beta};
}

enum class StratumLabel { Rescue, LowPartial, High };

inline const char* to_string(StratumLabel s) {
  switch (s) {
    case StratumLabel::Rescue: return "rescue";
    case StratumLabel::LowPartial: return "low_partial";
    case StratumLabel::High: return "high";
  }
  return "?";
}

// Allocation parameters. Defaults are the math-domain settings.
struct AeroConfig {
  int n_total = 16;        // per-query generation budget, stage I + II
  int n_explore = 8;       // stage I rollouts per query
  int n_extra = 2;         // rollouts per rescue iteration
  int k = 1;               // kept incorrect per correct in downsampling
  int S = 0;               // rescue threshold numerator: rescue iff u <= S/n_explore
  int K_max = 10;          // max rescue iterations per query
  int n_max = 32;          // hard per-query rollout cap
  int zero_adv_retain = 4; // rollouts kept from a dead-zone group
  double alpha0 = 1.0;     // Beta prior
  double beta0 = 1.0;
  std::uint64_t seed = 1;

  bool operator==(const AeroConfig&) const = default;
};

// Throws std::invalid_argument naming the first violated field.
inline void validate_config(const AeroConfig& cfg) {
  if (cfg.n_explore <= 0) throw std::invalid_argument("n_explore must be positive");
  if (cfg.n_explore >= cfg.n_total) throw std::invalid_argument("n_explore must be < n_total");
  if (cfg.S < 0) throw std::invalid_argument("S must be >= 0");
  if (2 * cfg.S > cfg.n_explore) throw std::invalid_argument("S exceeds n_explore/2");
  if (cfg.n_extra < 1) throw std::invalid_argument("n_extra must be >= 1");
  if (cfg.K_max < 1) throw std::invalid_argument("K_max must be >= 1");
  if (cfg.n_max < cfg.n_total) throw std::invalid_argument("n_max must be >= n_total");
  if (cfg.k < 1) throw std::invalid_argument("k must be >= 1");
  if (cfg.zero_adv_retain < 1) throw std::invalid_argument("zero_adv_retain must be >= 1");
  if (cfg.zero_adv_retain > cfg.n_explore)
    throw std::invalid_argument("zero_adv_retain must be <= n_explore");
  if (!(cfg.alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(cfg.beta0 > 0.0)) throw std::invalid_argument("beta0 must be positive");
}

struct ModelSpec {
  std::uint64_t n_params = 1'500'000'000;  // >= 1
  bool operator==(const ModelSpec&) const = default;
};

// --- flat key-value serialization ----------------------------------------
//
// The canonical config text format: one "key = value" per line, '#' starts a
// comment. Keys are exactly the AeroConfig field names.

inline std::string to_kv(const AeroConfig& cfg) {
  std::ostringstream out;
  out.precision(17);  // doubles must survive the round trip
  out << "n_total = " << cfg.n_total << "\n"
      << "n_explore = " << cfg.n_explore << "\n"
      << "n_extra = " << cfg.n_extra << "\n"
      << "k = " << cfg.k << "\n"
      << "S = " << cfg.S << "\n"
      << "K_max = " << cfg.K_max << "\n"
      << "n_max = " << cfg.n_max << "\n"
      << "zero_adv_retain = " << cfg.zero_adv_retain << "\n"
      << "alpha0 = " << cfg.alpha0 << "\n"
      << "beta0 = " << cfg.beta0 << "\n"
      << "seed = " << cfg.seed << "\n";
  return out.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Parses "key = value" lines into an ordered map; blank lines and comments
// are skipped. Duplicate keys and lines without '=' are errors.
inline std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    }
  return kv;
}

inline long long parse_int_field(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid integer for '" + key + "': " + value);
  }
}

inline double parse_real_field(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid number for '" + key + "': " + value);
  }
}

inline std::uint64_t parse_seed_field(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid integer for '" + key + "': " + value);
  }
}

// Applies one AeroConfig field; returns false if the key is not an AeroConfig
// field (callers with wider schemas handle it themselves).
inline bool apply_aero_field(AeroConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "n_total") cfg.n_total = static_cast<int>(parse_int_field(key, value));
  else if (key == "n_explore") cfg.n_explore = static_cast<int>(parse_int_field(key, value));
  else if (key == "n_extra") cfg.n_extra = static_cast<int>(parse_int_field(key, value));
  else if (key == "k") cfg.k = static_cast<int>(parse_int_field(key, value));
  else if (key == "S") cfg.S = static_cast<int>(parse_int_field(key, value));
  else if (key == "K_max") cfg.K_max = static_cast<int>(parse_int_field(key, value));
  else if (key == "n_max") cfg.n_max = static_cast<int>(parse_int_field(key, value));
  else if (key == "zero_adv_retain") cfg.zero_adv_retain = static_cast<int>(parse_int_field(key, value));
  else if (key == "alpha0") cfg.alpha0 = parse_real_field(key, value);
  else if (key == "beta0") cfg.beta0 = parse_real_field(key, value);
  else if (key == "seed") cfg.seed = parse_seed_field(key, value);
  else return false;
  return true;
}

}  // namespace detail

inline AeroConfig aero_config_from_kv(const std::string& text) {
  AeroConfig cfg;
  for (const auto& [key, value] : detail::parse_kv_text(text)) {
    if (!detail::apply_aero_field(cfg, key, value))
      throw std::invalid_argument("unknown config field '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace aero
