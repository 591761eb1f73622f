// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiment driver behind the CLI: parses the flat key-value
// config format, runs multi-step allocation loops against a synthetic pool or
// a recorded trace, and writes the per-step series CSV plus a summary
// document. Outputs contain no timestamps or other ambient state; a rerun
// with the same config produces byte-identical files.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aero/allocator.hpp"
#include "aero/core.hpp"
#include "aero/cost.hpp"
#include "aero/metrics.hpp"
#include "aero/oracle.hpp"
#include "aero/rng.hpp"

namespace aero {

enum class Method { Aero, Grpo, Dapo, GrpoReduced };

struct ExperimentConfig {
  Method method = Method::Aero;
  int reduced_n = 8;  // generation budget for grpo_reduced(N)
  int batch_size = 256;
  int steps = 1;
  ModelSpec model;
  TokenSpec tokens;
  bool improvement = false;  // logit drift of latent difficulty between steps
  double eta = 0.0;
  std::string out_dir = ".";
  std::optional<DifficultySpec> pool_spec;  // synthetic pool, or:
  std::string trace_path;                   // replayed trace
  AeroConfig aero;                          // allocation knobs plus the run seed

  std::string method_string() const {
    switch (method) {
      case Method::Aero: return "aero";
      case Method::Grpo: return "grpo";
      case Method::Dapo: return "dapo";
      case Method::GrpoReduced: return "grpo_reduced(" + std::to_string(reduced_n) + ")";
    }
    return "?";
  }
};

namespace detail {

// Splits on commas that sit outside parentheses.
inline std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string current;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(trim(current));
  return parts;
}

inline std::vector<double> parse_call_args(const std::string& key, const std::string& term,
                                           const std::string& name, std::size_t arity) {
  const std::string prefix = name + "(";
  if (term.size() < prefix.size() + 1 || term.compare(0, prefix.size(), prefix) != 0 ||
      term.back() != ')')
    throw std::invalid_argument("invalid value for '" + key + "': " + term);
  const std::string inner = term.substr(prefix.size(), term.size() - prefix.size() - 1);
  std::vector<double> args;
  for (const std::string& a : split_top_level(inner))
    args.push_back(parse_real_field(key, a));
  if (args.size() != arity)
    throw std::invalid_argument("invalid value for '" + key + "': " + name + " takes " +
                                std::to_string(arity) + " arguments");
  return args;
}

// "0.88*beta(1.0,2.83), 0.02*point(0.5)"
inline std::vector<DifficultyComponent> parse_components(const std::string& value) {
  std::vector<DifficultyComponent> components;
  for (const std::string& term : split_top_level(value)) {
    const auto star = term.find('*');
    if (star == std::string::npos)
      throw std::invalid_argument("invalid value for 'pool.components': expected weight*kind(...)");
    const double weight = parse_real_field("pool.components", trim(term.substr(0, star)));
    const std::string call = trim(term.substr(star + 1));
    if (call.rfind("beta(", 0) == 0) {
      const auto args = parse_call_args("pool.components", call, "beta", 2);
      components.push_back(DifficultyComponent::beta(weight, args[0], args[1]));
    } else if (call.rfind("point(", 0) == 0) {
      const auto args = parse_call_args("pool.components", call, "point", 1);
      components.push_back(DifficultyComponent::point_mass(weight, args[0]));
    } else {
      throw std::invalid_argument("invalid value for 'pool.components': unknown kind in " + term);
    }
  }
  return components;
}

inline TokenSpec parse_tokens(const std::string& value) {
  if (value.rfind("const:", 0) == 0)
    return TokenSpec::constant_length(
        static_cast<int>(parse_int_field("tokens", trim(value.substr(6)))));
  if (value.rfind("uniform:", 0) == 0) {
    const auto parts = split_top_level(value.substr(8));
    if (parts.size() != 2)
      throw std::invalid_argument("invalid value for 'tokens': uniform needs lo,hi");
    return TokenSpec::uniform_range(static_cast<int>(parse_int_field("tokens", parts[0])),
                                    static_cast<int>(parse_int_field("tokens", parts[1])));
  }
  throw std::invalid_argument("invalid value for 'tokens': " + value);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_kv(const std::string& text) {
  ExperimentConfig cfg;
  bool have_preset = false, have_components = false, have_trace = false;
  std::optional<double> unsolvable_mass;
  std::vector<DifficultyComponent> components;

  for (const auto& [key, value] : detail::parse_kv_text(text)) {
    if (detail::apply_aero_field(cfg.aero, key, value)) continue;
    if (key == "method") {
      if (value == "aero") cfg.method = Method::Aero;
      else if (value == "grpo") cfg.method = Method::Grpo;
      else if (value == "dapo") cfg.method = Method::Dapo;
      else if (value.rfind("grpo_reduced(", 0) == 0 && value.back() == ')') {
        cfg.method = Method::GrpoReduced;
        cfg.reduced_n = static_cast<int>(
            detail::parse_int_field(key, value.substr(13, value.size() - 14)));
      } else {
        throw std::invalid_argument("invalid value for 'method': " + value);
      }
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(detail::parse_int_field(key, value));
    } else if (key == "steps") {
      cfg.steps = static_cast<int>(detail::parse_int_field(key, value));
    } else if (key == "n_params") {
      const double v = detail::parse_real_field(key, value);
      if (!(v >= 1.0) || v > 9e18) throw std::invalid_argument("invalid value for 'n_params': " + value);
      cfg.model.n_params = static_cast<std::uint64_t>(v);
    } else if (key == "tokens") {
      cfg.tokens = detail::parse_tokens(value);
    } else if (key == "improvement") {
      if (value == "off") {
        cfg.improvement = false;
      } else if (value.rfind("logistic(", 0) == 0 && value.back() == ')') {
        cfg.improvement = true;
        cfg.eta = detail::parse_real_field(key, value.substr(9, value.size() - 10));
      } else {
        throw std::invalid_argument("invalid value for 'improvement': " + value);
      }
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "pool.preset") {
      const auto preset = preset_difficulty(value);
      if (!preset) throw std::invalid_argument("unknown pool preset '" + value + "'");
      cfg.pool_spec = *preset;
      have_preset = true;
    } else if (key == "pool.unsolvable_mass") {
      unsolvable_mass = detail::parse_real_field(key, value);
    } else if (key == "pool.components") {
      components = detail::parse_components(value);
      have_components = true;
    } else if (key == "pool.trace") {
      cfg.trace_path = value;
      have_trace = true;
    } else {
      throw std::invalid_argument("unknown config field '" + key + "'");
    }
  }

  const int sources = (have_preset ? 1 : 0) + (have_components ? 1 : 0) + (have_trace ? 1 : 0);
  if (sources > 1) throw std::invalid_argument("config must give exactly one pool source");
  if (have_components) {
    DifficultySpec spec;
    spec.components = std::move(components);
    spec.unsolvable_mass = unsolvable_mass.value_or(0.0);
    validate_spec(spec);
    cfg.pool_spec = std::move(spec);
  } else if (unsolvable_mass) {
    throw std::invalid_argument("pool.unsolvable_mass requires pool.components");
  }
  if (sources == 0) cfg.pool_spec = paperlike_1p5b();  // documented default

  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (cfg.model.n_params < 1) throw std::invalid_argument("n_params must be >= 1");
  if (cfg.improvement && have_trace)
    throw std::invalid_argument("improvement drift requires a synthetic pool");
  switch (cfg.method) {
    case Method::Aero: validate_config(cfg.aero); break;
    case Method::Grpo:
    case Method::Dapo:
      if (cfg.aero.n_total < 1) throw std::invalid_argument("n_total must be >= 1");
      break;
    case Method::GrpoReduced:
      if (cfg.reduced_n < 1) throw std::invalid_argument("grpo_reduced budget must be >= 1");
      break;
  }
  return cfg;
}

// --- running -------------------------------------------------------------------

struct StepStats {
  int step = 0;
  std::string method;
  std::int64_t generated = 0;
  std::int64_t trained = 0;
  double zero_ratio = 0.0;
  double all_correct_ratio = 0.0;
  double mean_abs_adv = 0.0;
  double mean_group_size = 0.0;
  CostReport cost;
};

struct RunOutput {
  std::vector<StepStats> series;
  nlohmann::json summary;
};

inline const char* series_header() {
  return "step,method,generated,trained,zero_ratio,all_correct_ratio,mean_abs_adv,"
         "mean_group_size,rollout_flops,training_flops,total_flops";
}

namespace detail {

inline std::string format_series_row(const StepStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%s,%lld,%lld,%.6f,%.6f,%.6f,%.6f,%.9g,%.9g,%.9g",
                s.step, s.method.c_str(), static_cast<long long>(s.generated),
                static_cast<long long>(s.trained), s.zero_ratio, s.all_correct_ratio,
                s.mean_abs_adv, s.mean_group_size, s.cost.rollout_flops, s.cost.training_flops,
                s.cost.total_flops);
  return buf;
}

inline nlohmann::json config_echo(const AeroConfig& cfg) {
  return nlohmann::json{{"n_total", cfg.n_total},
                        {"n_explore", cfg.n_explore},
                        {"n_extra", cfg.n_extra},
                        {"k", cfg.k},
                        {"S", cfg.S},
                        {"K_max", cfg.K_max},
                        {"n_max", cfg.n_max},
                        {"zero_adv_retain", cfg.zero_adv_retain},
                        {"alpha0", cfg.alpha0},
                        {"beta0", cfg.beta0}};
}

inline nlohmann::json pool_echo(const ExperimentConfig& cfg) {
  if (!cfg.trace_path.empty())
    return nlohmann::json{{"kind", "trace"}, {"path", cfg.trace_path}};
  nlohmann::json components = nlohmann::json::array();
  for (const auto& c : cfg.pool_spec->components) {
    if (c.kind == DifficultyComponent::Kind::PointMass)
      components.push_back({{"kind", "point"}, {"weight", c.weight}, {"p", c.p}});
    else
      components.push_back({{"kind", "beta"}, {"weight", c.weight}, {"a", c.a}, {"b", c.b}});
  }
  return nlohmann::json{{"kind", "synthetic"},
                        {"unsolvable_mass", cfg.pool_spec->unsolvable_mass},
                        {"components", components}};
}

}  // namespace detail

inline RunOutput run_experiment(const ExperimentConfig& cfg) {
  std::unique_ptr<RolloutSource> source;
  TraceSource* trace = nullptr;
  QueryPool pool;
  const bool synthetic = cfg.trace_path.empty();
  if (synthetic) {
    pool = make_pool(*cfg.pool_spec, static_cast<std::size_t>(cfg.batch_size), cfg.aero.seed);
    source = std::make_unique<SyntheticSource>(pool, cfg.tokens);
  } else {
    std::ifstream in(cfg.trace_path);
    if (!in) throw std::invalid_argument("cannot open trace file: " + cfg.trace_path);
    auto owned = std::make_unique<TraceSource>(read_trace(in));
    trace = owned.get();
    source = std::move(owned);
  }

  RunOutput out;
  std::int64_t total_generated = 0, total_trained = 0;
  std::int64_t total_rollout_tokens = 0, total_training_tokens = 0;
  double total_rollout_flops = 0.0, total_training_flops = 0.0;
  double sum_zero = 0.0, sum_all_correct = 0.0, sum_adv = 0.0, sum_group_size = 0.0;
  StratumCounts strata_totals;
  int rescued_total = 0;
  int summary_batch = cfg.batch_size;

  for (int step = 0; step < cfg.steps; ++step) {
    source->begin_step(step);
    std::vector<QueryId> batch = synthetic ? pool.ids() : trace->step_query_ids(step);
    if (batch.empty())
      throw std::runtime_error("trace has no records for step " + std::to_string(step));
    if (!synthetic && step == 0) summary_batch = static_cast<int>(batch.size());

    AeroConfig step_cfg = cfg.aero;
    step_cfg.seed = step_seed(cfg.aero.seed, step);
    StepResult result;
    switch (cfg.method) {
      case Method::Aero:
        result = run_step_aero(batch, *source, step_cfg);
        break;
      case Method::Grpo:
        result = run_step_fixed(batch, *source, cfg.aero.n_total, FixedMode::Grpo, step_cfg.seed);
        break;
      case Method::Dapo:
        result = run_step_fixed(batch, *source, cfg.aero.n_total, FixedMode::DapoFilter,
                                step_cfg.seed);
        break;
      case Method::GrpoReduced:
        result = run_step_fixed(batch, *source, cfg.reduced_n, FixedMode::Grpo, step_cfg.seed);
        break;
    }

    StepStats stats;
    stats.step = step;
    stats.method = cfg.method_string();
    stats.generated = result.total_rollouts_generated;
    stats.trained = result.total_rollouts_trained;
    stats.zero_ratio = zero_accuracy_ratio(result.observations);
    stats.all_correct_ratio = all_correct_ratio(result.observations);
    // An all-dropped DapoFilter step has no groups; report zeros rather than
    // erroring out of a long run.
    stats.mean_abs_adv = result.groups.empty() ? 0.0 : mean_abs_advantage(result.groups);
    stats.mean_group_size =
        result.groups.empty()
            ? 0.0
            : static_cast<double>(result.total_rollouts_trained) /
                  static_cast<double>(result.groups.size());
    stats.cost = step_cost(result, cfg.model);

    total_generated += stats.generated;
    total_trained += stats.trained;
    total_rollout_tokens += stats.cost.rollout_tokens;
    total_training_tokens += stats.cost.training_tokens;
    total_rollout_flops += stats.cost.rollout_flops;
    total_training_flops += stats.cost.training_flops;
    sum_zero += stats.zero_ratio;
    sum_all_correct += stats.all_correct_ratio;
    sum_adv += stats.mean_abs_adv;
    sum_group_size += stats.mean_group_size;
    strata_totals.rescue += result.stratum_counts.rescue;
    strata_totals.low_partial += result.stratum_counts.low_partial;
    strata_totals.high += result.stratum_counts.high;
    rescued_total += result.rescued_count;
    out.series.push_back(std::move(stats));

    if (cfg.improvement && synthetic && step + 1 < cfg.steps) {
      const double signal = out.series.back().mean_abs_adv;
      pool = apply_improvement(pool, signal, cfg.eta);
      source = std::make_unique<SyntheticSource>(pool, cfg.tokens);
    }
  }

  const double steps = static_cast<double>(cfg.steps);
  out.summary = nlohmann::json{
      {"method", cfg.method_string()},
      {"steps", cfg.steps},
      {"batch_size", summary_batch},
      {"seed", cfg.aero.seed},
      {"pool", detail::pool_echo(cfg)},
      {"config", detail::config_echo(cfg.aero)},
      {"model", {{"n_params", cfg.model.n_params}}},
      {"totals",
       {{"rollouts_generated", total_generated},
        {"rollouts_trained", total_trained},
        {"rollout_tokens", total_rollout_tokens},
        {"training_tokens", total_training_tokens},
        {"rollout_flops", total_rollout_flops},
        {"training_flops", total_training_flops},
        {"total_flops", total_rollout_flops + total_training_flops}}},
      {"means",
       {{"zero_accuracy_ratio", sum_zero / steps},
        {"all_correct_ratio", sum_all_correct / steps},
        {"mean_abs_advantage", sum_adv / steps},
        {"mean_group_size", sum_group_size / steps}}},
      {"strata_totals",
       {{"rescue", strata_totals.rescue},
        {"low_partial", strata_totals.low_partial},
        {"high", strata_totals.high}}},
      {"rescued_total", rescued_total}};
  return out;
}

inline void write_run_output(const RunOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream series(std::filesystem::path(dir) / "series.csv", std::ios::binary);
    if (!series) throw std::runtime_error("cannot write series.csv under " + dir);
    series << series_header() << "\n";
    for (const auto& s : out.series) series << detail::format_series_row(s) << "\n";
  }
  {
    std::ofstream summary(std::filesystem::path(dir) / "summary.json", std::ios::binary);
    if (!summary) throw std::runtime_error("cannot write summary.json under " + dir);
    summary << out.summary.dump(2) << "\n";
  }
}

// --- comparison ------------------------------------------------------------------

struct CompareRow {
  std::string method;
  double mean_group_size = 0.0;
  double zero_ratio = 0.0;
  double mean_abs_adv = 0.0;
  double rollout_flops = 0.0;
  double training_flops = 0.0;
  double total_flops = 0.0;
  double rollout_flops_ratio = 1.0;  // vs the first config
  double training_flops_ratio = 1.0;
  double total_flops_ratio = 1.0;
};

inline const char* compare_header() {
  return "method,mean_group_size,zero_ratio,mean_abs_adv,rollout_flops,training_flops,"
         "total_flops,rollout_flops_ratio,training_flops_ratio,total_flops_ratio";
}

// All runs must see the same data: same pool source, seed, and shape.
inline void check_comparable(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() < 2) throw std::invalid_argument("compare needs at least two configs");
  const ExperimentConfig& first = configs.front();
  for (const auto& cfg : configs) {
    if (cfg.pool_spec != first.pool_spec || cfg.trace_path != first.trace_path)
      throw std::invalid_argument("compare configs disagree on the pool");
    if (cfg.aero.seed != first.aero.seed)
      throw std::invalid_argument("compare configs disagree on the seed");
    if (cfg.batch_size != first.batch_size)
      throw std::invalid_argument("compare configs disagree on batch_size");
    if (cfg.steps != first.steps)
      throw std::invalid_argument("compare configs disagree on steps");
    if (!(cfg.model == first.model))
      throw std::invalid_argument("compare configs disagree on the model");
    if (!(cfg.tokens == first.tokens))
      throw std::invalid_argument("compare configs disagree on tokens");
  }
}

inline std::vector<CompareRow> compare_experiments(const std::vector<ExperimentConfig>& configs) {
  check_comparable(configs);
  std::vector<CompareRow> rows;
  for (const auto& cfg : configs) {
    const RunOutput out = run_experiment(cfg);
    CompareRow row;
    row.method = cfg.method_string();
    const auto& totals = out.summary["totals"];
    const auto& means = out.summary["means"];
    row.mean_group_size = means["mean_group_size"].get<double>();
    row.zero_ratio = means["zero_accuracy_ratio"].get<double>();
    row.mean_abs_adv = means["mean_abs_advantage"].get<double>();
    row.rollout_flops = totals["rollout_flops"].get<double>();
    row.training_flops = totals["training_flops"].get<double>();
    row.total_flops = totals["total_flops"].get<double>();
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    row.rollout_flops_ratio = row.rollout_flops / rows.front().rollout_flops;
    row.training_flops_ratio = row.training_flops / rows.front().training_flops;
    row.total_flops_ratio = row.total_flops / rows.front().total_flops;
  }
  return rows;
}

inline std::string format_compare_row(const CompareRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f",
                r.method.c_str(), r.mean_group_size, r.zero_ratio, r.mean_abs_adv,
                r.rollout_flops, r.training_flops, r.total_flops, r.rollout_flops_ratio,
                r.training_flops_ratio, r.total_flops_ratio);
  return buf;
}

inline void write_compare_output(const std::vector<CompareRow>& rows, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "compare.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write compare.csv under " + dir);
  out << compare_header() << "\n";
  for (const auto& r : rows) out << format_compare_row(r) << "\n";
}

}  // namespace aero
