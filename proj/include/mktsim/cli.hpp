#pragma once

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mktsim/config.hpp"
#include "mktsim/studies.hpp"

namespace mktsim {

namespace detail {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> reps;
  std::optional<int> threads;
};

inline void add_common_options(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_path, "scenario config file (.toml/.cfg, .json, or manifest .csv)")
      ->required();
  cmd->add_option("--seed", opts.seed, "master seed override");
  cmd->add_option("--out", opts.out, "output directory override");
  cmd->add_option("--reps", opts.reps, "replication count override");
  cmd->add_option("--threads", opts.threads, "worker thread count (0 = hardware)");
}

inline ScenarioConfig load_with_overrides(const CliOptions& opts) {
  ScenarioConfig cfg = load_scenario(opts.config_path);
  if (opts.seed) cfg.study.seed = *opts.seed;
  if (opts.out) cfg.study.out = *opts.out;
  if (opts.reps) cfg.study.reps = *opts.reps;
  if (opts.threads) cfg.study.threads = *opts.threads;
  return cfg;
}

inline void emit_manifest(const ScenarioConfig& cfg) {
  write_manifest_csv(scenario_manifest(cfg), cfg.study.out + "/manifest.csv");
}

}  // namespace detail

// Entry point shared by the binary and the in-process tests. Exit codes:
// 0 success, 2 configuration/usage error, 1 runtime failure.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"two-sided marketplace experimentation simulator"};
  app.require_subcommand(1);
  detail::CliOptions opts;

  CLI::App* simulate = app.add_subcommand("simulate", "run one assignment end to end");
  CLI::App* bias = app.add_subcommand("bias-study", "Monte Carlo bias per design vs ground truth");
  CLI::App* power = app.add_subcommand("power-curve", "rejection rates over an effect grid");
  CLI::App* oracle = app.add_subcommand("oracle-check", "exact enumeration of the estimator mean");
  CLI::App* assumptions =
      app.add_subcommand("validate-assumptions", "stable-system discrepancy over a K grid");
  for (CLI::App* cmd : {simulate, bias, power, oracle, assumptions})
    detail::add_common_options(cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    const ScenarioConfig cfg = detail::load_with_overrides(opts);
    ensure_out_dir(cfg.study.out);
    const std::string out = cfg.study.out;

    if (simulate->parsed()) {
      const ExperimentResult result = run_simulate(cfg);
      if (result.outcomes) write_outcome_csv(*result.outcomes, out + "/outcomes.csv");
      write_assignment_csv(result.plan, out + "/assignment.csv");
      if (!result.period_totals.empty())
        write_period_csv(result.period_totals, out + "/period_totals.csv");
      write_report_csv({result.delivered, result.revenue}, out + "/report.csv");
      std::ofstream text(out + "/report.txt", std::ios::binary);
      text << report_text(result.delivered) << "\n" << report_text(result.revenue);
      std::cout << report_text(result.delivered);
    } else if (bias->parsed()) {
      const BiasStudyResult result = run_bias_study(cfg);
      write_bias_csv(result, out + "/bias.csv");
      if (!result.exact_rows.empty())
        write_exact_bias_csv(result.exact_rows, out + "/exact_bias.csv");
      for (const auto& row : result.rows) {
        std::cout << row.design << ": mean=" << format_number(row.mean_estimate)
                  << " truth=" << format_number(row.ground_truth)
                  << " bias=" << format_number(row.bias) << " ci=["
                  << format_number(row.ci_lo) << ", " << format_number(row.ci_hi) << "]\n";
      }
    } else if (power->parsed()) {
      const PowerCurveResult result = run_power_curve(cfg);
      write_power_csv(result, out + "/power.csv");
      for (const auto& row : result.rows) {
        std::cout << row.design << " effect=" << format_number(row.effect_size)
                  << " power=" << format_number(row.power) << " (mc_se="
                  << format_number(row.mc_se) << ")\n";
      }
    } else if (oracle->parsed()) {
      const OracleCheckResult result = run_oracle_check(cfg);
      write_oracle_csv(result, out + "/oracle.csv");
      const EnumerationEstimandResult& er = result.estimand == Estimand::kDelivered
                                                ? result.enumeration.delivered
                                                : result.enumeration.revenue;
      std::cout << "design:                " << design_name(result.enumeration.design) << "\n"
                << "assignments evaluated: " << result.enumeration.assignments_evaluated << "\n"
                << "exact mean:            " << format_number(er.exact_mean) << "\n"
                << "ground truth:          " << format_number(er.ground_truth) << "\n"
                << "bias:                  " << format_number(er.bias) << "\n";
    } else if (assumptions->parsed()) {
      const AssumptionResult result = run_validate_assumptions(cfg);
      write_stability_csv(result, out + "/stability.csv");
      for (const auto& row : result.rows) {
        std::cout << "K=" << row.restricted_size
                  << " per-member=" << format_number(row.per_member_value)
                  << " reference=" << format_number(row.reference_value)
                  << " rel-discrepancy=" << format_number(row.relative_discrepancy) << "\n";
      }
    }
    detail::emit_manifest(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mktsim
