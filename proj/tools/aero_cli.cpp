// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands:
//   run      execute one experiment config, write series.csv + summary.json
//   compare  run several configs against the same pool and seed, write compare.csv
//   verify   run the built-in analytic self-checks
//
// Exit codes: 0 success, 1 config error, 2 runtime or check failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aero/aero.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

aero::ExperimentConfig load_config(const std::string& path,
                                   const std::optional<std::uint64_t>& seed_override,
                                   const std::string& out_override) {
  aero::ExperimentConfig cfg = aero::experiment_config_from_kv(read_file(path));
  if (seed_override) cfg.aero.seed = *seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed_override,
            const std::string& out_override) {
  const aero::ExperimentConfig cfg = load_config(config_path, seed_override, out_override);
  const aero::RunOutput out = aero::run_experiment(cfg);
  aero::write_run_output(out, cfg.out_dir);
  std::cout << "run: " << cfg.method_string() << ", " << out.series.size() << " step(s), "
            << out.summary["totals"]["rollouts_generated"] << " rollouts generated, "
            << out.summary["totals"]["rollouts_trained"] << " trained\n"
            << "wrote " << cfg.out_dir << "/series.csv and " << cfg.out_dir << "/summary.json\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::optional<std::uint64_t>& seed_override, const std::string& out_dir) {
  std::vector<aero::ExperimentConfig> configs;
  for (const auto& path : config_paths)
    configs.push_back(load_config(path, seed_override, ""));
  const std::vector<aero::CompareRow> rows = aero::compare_experiments(configs);
  const std::string dir = out_dir.empty() ? configs.front().out_dir : out_dir;
  aero::write_compare_output(rows, dir);
  std::cout << aero::compare_header() << "\n";
  for (const auto& r : rows) std::cout << aero::format_compare_row(r) << "\n";
  std::cout << "wrote " << dir << "/compare.csv\n";
  return 0;
}

int cmd_verify() {
  bool all_pass = true;
  for (const aero::CheckResult& check : aero::run_verification()) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail
              << "\n";
    all_pass = all_pass && check.pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive rollout budget allocation for group-based RL"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> config_paths;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;

  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--out", out_dir, "output directory (overrides out_dir)");

  CLI::App* compare = app.add_subcommand("compare", "run several configs on one pool and seed");
  compare->add_option("--config", config_paths, "experiment config files (repeatable)")
      ->required()
      ->expected(-2);
  compare->add_option("--seed", seed_override, "override every config's seed");
  compare->add_option("--out", out_dir, "output directory");

  CLI::App* verify = app.add_subcommand("verify", "run built-in analytic self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seed_override, out_dir);
    if (compare->parsed()) return cmd_compare(config_paths, seed_override, out_dir);
    if (verify->parsed()) return cmd_verify();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
