#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "mktsim/config.hpp"
#include "mktsim/csv.hpp"
#include "mktsim/experiment.hpp"
#include "mktsim/oracle.hpp"
#include "mktsim/stats.hpp"

// Study drivers behind the CLI subcommands. Every driver writes its CSV
// outputs plus a manifest under the output directory; all results are pure
// functions of (resolved config, master seed), so re-runs are byte-identical
// regardless of worker count.

namespace mktsim {

inline int resolve_threads(int configured) {
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Index-parallel loop; each index owns its output slot, so scheduling order
// cannot affect results.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        body(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

inline void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory: " + dir);
}

inline std::vector<DesignKind> study_designs(const ScenarioConfig& cfg) {
  std::vector<DesignKind> designs;
  if (cfg.study.designs.empty()) {
    designs.push_back(design_kind_from_name(cfg.design.kind));
  } else {
    for (const auto& name : cfg.study.designs) designs.push_back(design_kind_from_name(name));
  }
  return designs;
}

inline Estimand study_estimand(const ScenarioConfig& cfg) {
  return cfg.study.estimand == "revenue" ? Estimand::kRevenue : Estimand::kDelivered;
}

// ---------------------------------------------------------------------------
// Bias study
// ---------------------------------------------------------------------------

struct BiasRow {
  std::string design;
  double mean_estimate = 0.0;
  double ground_truth = 0.0;
  double bias = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int reps = 0;
};

struct ExactBiasRow {
  std::string design;
  std::int64_t assignments_evaluated = 0;
  double exact_mean = 0.0;
  double ground_truth = 0.0;
  double bias = 0.0;
};

struct BiasStudyResult {
  std::vector<BiasRow> rows;
  std::vector<ExactBiasRow> exact_rows;  // filled for analytic models within the guard
};

namespace detail {

inline EnumeratedDesign enumerated_design(const ScenarioConfig& cfg, DesignKind kind) {
  EnumeratedDesign design;
  design.kind = kind;
  const int n = cfg.marketplace.members;
  const int m = cfg.marketplace.campaigns;
  switch (kind) {
    case DesignKind::kMemberCr:
      design.treated_units = cfg.design.treated_units > 0 ? cfg.design.treated_units : n / 2;
      break;
    case DesignKind::kCampaignCr:
      design.treated_units = cfg.design.treated_units > 0 ? cfg.design.treated_units : m / 2;
      break;
    case DesignKind::kSwitchback:
      design.periods = cfg.design.periods > 0 ? cfg.design.periods : cfg.marketplace.horizon;
      design.balanced = cfg.design.balanced;
      break;
    case DesignKind::kBudgetSplit:
      design.coin_p = cfg.design.split_p;
      break;
  }
  return design;
}

}  // namespace detail

inline BiasStudyResult run_bias_study(const ScenarioConfig& cfg) {
  const Estimand estimand = study_estimand(cfg);
  const int reps = cfg.study.reps;
  const int threads = resolve_threads(cfg.study.threads);
  BiasStudyResult result;
  const GroundTruth gt = scenario_ground_truth(cfg);
  const auto designs = study_designs(cfg);
  for (std::size_t d = 0; d < designs.size(); ++d) {
    const DesignKind kind = designs[d];
    std::vector<double> estimates(static_cast<std::size_t>(reps), 0.0);
    parallel_for(reps, threads, [&](std::int64_t rep) {
      const std::uint64_t seed = derive_seed(cfg.study.seed, "bias-study",
                                             static_cast<std::uint64_t>(d),
                                             static_cast<std::uint64_t>(rep));
      const ExperimentResult exp = run_experiment(cfg, kind, seed);
      estimates[static_cast<std::size_t>(rep)] =
          estimand == Estimand::kDelivered ? exp.delivered.total_estimate
                                           : exp.revenue.total_estimate;
    });
    const MeanCi ci = mean_ci95(estimates);
    const double truth = estimand == Estimand::kDelivered ? gt.tau : gt.tau_star;
    BiasRow row;
    row.design = design_name(kind);
    row.mean_estimate = ci.mean;
    row.ground_truth = truth;
    row.bias = ci.mean - truth;
    row.ci_lo = ci.lo;
    row.ci_hi = ci.hi;
    row.reps = reps;
    result.rows.push_back(row);

    if (build_model(cfg).backend == OutcomeModelRef::Backend::kAnalytic) {
      const Marketplace market =
          build_marketplace(cfg, derive_seed(cfg.study.seed, "ground-truth"));
      try {
        const EnumerationResult exact = enumerate_expectation(
            market, build_model(cfg), detail::enumerated_design(cfg, kind),
            build_treatment(cfg));
        const EnumerationEstimandResult& er =
            estimand == Estimand::kDelivered ? exact.delivered : exact.revenue;
        result.exact_rows.push_back({design_name(kind), exact.assignments_evaluated,
                                     er.exact_mean, er.ground_truth, er.bias});
      } catch (const EnumerationGuardError&) {
        // Assignment space too large for the exact check; Monte Carlo only.
      }
    }
  }
  return result;
}

inline void write_bias_csv(const BiasStudyResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.row("design", "mean_estimate", "ground_truth", "bias", "ci_lo", "ci_hi");
  for (const auto& r : result.rows)
    csv.row(r.design, r.mean_estimate, r.ground_truth, r.bias, r.ci_lo, r.ci_hi);
}

inline void write_exact_bias_csv(const std::vector<ExactBiasRow>& rows, const std::string& path) {
  CsvWriter csv(path);
  csv.row("design", "assignments_evaluated", "exact_mean", "ground_truth", "bias");
  for (const auto& r : rows)
    csv.row(r.design, r.assignments_evaluated, r.exact_mean, r.ground_truth, r.bias);
}

// ---------------------------------------------------------------------------
// Power curve
// ---------------------------------------------------------------------------

struct PowerRow {
  double effect_size = 0.0;
  std::string design;
  double power = 0.0;
  int reps = 0;
  double mc_se = 0.0;
};

struct PowerCurveResult {
  std::vector<PowerRow> rows;
};

inline PowerCurveResult run_power_curve(const ScenarioConfig& cfg) {
  if (cfg.study.effects.empty())
    throw ConfigError("power curve requires a non-empty study.effects grid");
  if (cfg.study.reps < 100) throw ConfigError("power curve requires study.reps >= 100");
  const int reps = cfg.study.reps;
  const int threads = resolve_threads(cfg.study.threads);
  const double alpha = cfg.study.alpha;
  const Estimand estimand = study_estimand(cfg);
  PowerCurveResult result;
  const auto designs = study_designs(cfg);
  for (std::size_t d = 0; d < designs.size(); ++d) {
    for (std::size_t e = 0; e < cfg.study.effects.size(); ++e) {
      const double effect = cfg.study.effects[e];
      std::vector<int> rejections(static_cast<std::size_t>(reps), 0);
      parallel_for(reps, threads, [&](std::int64_t rep) {
        const std::uint64_t seed =
            derive_seed(cfg.study.seed, "power-curve", static_cast<std::uint64_t>(d),
                        static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(rep));
        const ExperimentResult exp = run_experiment(cfg, designs[d], seed, false, effect);
        const double p = estimand == Estimand::kDelivered ? exp.delivered.p_value
                                                          : exp.revenue.p_value;
        rejections[static_cast<std::size_t>(rep)] = p <= alpha ? 1 : 0;
      });
      std::int64_t hits = 0;
      for (int r : rejections) hits += r;
      PowerRow row;
      row.effect_size = effect;
      row.design = design_name(designs[d]);
      row.power = static_cast<double>(hits) / static_cast<double>(reps);
      row.reps = reps;
      row.mc_se = std::sqrt(row.power * (1.0 - row.power) / static_cast<double>(reps));
      result.rows.push_back(row);
    }
  }
  return result;
}

inline void write_power_csv(const PowerCurveResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.row("effect_size", "design", "power", "reps", "mc_se");
  for (const auto& r : result.rows) csv.row(r.effect_size, r.design, r.power, r.reps, r.mc_se);
}

// ---------------------------------------------------------------------------
// Oracle check and assumption validation
// ---------------------------------------------------------------------------

struct OracleCheckResult {
  EnumerationResult enumeration;
  Estimand estimand = Estimand::kDelivered;
};

inline OracleCheckResult run_oracle_check(const ScenarioConfig& cfg) {
  OutcomeModelRef model = build_model(cfg);
  if (model.backend == OutcomeModelRef::Backend::kPanel)
    throw ConfigError("oracle-check requires a mechanistic or analytic model");
  const Marketplace market =
      build_marketplace(cfg, derive_seed(cfg.study.seed, "ground-truth"));
  EnumerationOptions options;
  // A mechanistic oracle-check is an explicit request for the slow path.
  options.allow_mechanistic = true;
  options.budget_split_unit = cfg.treatment.side == "campaign" ? BudgetSplitUnit::kCampaign
                                                               : BudgetSplitUnit::kMember;
  OracleCheckResult result;
  result.estimand = study_estimand(cfg);
  result.enumeration =
      enumerate_expectation(market, model,
                            detail::enumerated_design(cfg, design_kind_from_name(cfg.design.kind)),
                            build_treatment(cfg), options);
  return result;
}

inline void write_oracle_csv(const OracleCheckResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.row("design", "assignments_evaluated", "exact_mean", "ground_truth", "bias");
  const EnumerationEstimandResult& er = result.estimand == Estimand::kDelivered
                                            ? result.enumeration.delivered
                                            : result.enumeration.revenue;
  csv.row(design_name(result.enumeration.design), result.enumeration.assignments_evaluated,
          er.exact_mean, er.ground_truth, er.bias);
}

struct AssumptionResult {
  std::vector<StabilityRow> rows;
};

inline AssumptionResult run_validate_assumptions(const ScenarioConfig& cfg) {
  const Marketplace market =
      build_marketplace(cfg, derive_seed(cfg.study.seed, "ground-truth"));
  std::vector<int> grid = cfg.study.k_grid;
  if (grid.empty()) {
    const int n = market.n_members();
    for (int k : {n / 10, n / 4, n / 2, n})
      if (k >= 1) grid.push_back(k);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  AssumptionResult result;
  result.rows = validate_stable_system(market, build_model(cfg), build_treatment(cfg), grid,
                                       cfg.study.reps, cfg.study.seed);
  return result;
}

inline void write_stability_csv(const AssumptionResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.row("k", "per_member_value", "reference_value", "relative_discrepancy", "reps");
  for (const auto& r : result.rows)
    csv.row(r.restricted_size, r.per_member_value, r.reference_value, r.relative_discrepancy,
            r.reps);
}

// ---------------------------------------------------------------------------
// Single simulation run
// ---------------------------------------------------------------------------

inline ExperimentResult run_simulate(const ScenarioConfig& cfg) {
  const DesignKind kind = design_kind_from_name(cfg.design.kind);
  return run_experiment(cfg, kind, derive_seed(cfg.study.seed, "simulate"), true);
}

inline void write_assignment_csv(const AssignmentPlan& plan, const std::string& path) {
  CsvWriter csv(path);
  csv.row("unit_id", "arm");
  switch (plan.kind) {
    case DesignKind::kMemberCr:
      for (std::size_t i = 0; i < plan.member_w.size(); ++i)
        csv.row(static_cast<std::int64_t>(i), plan.member_w[i]);
      break;
    case DesignKind::kCampaignCr:
      for (std::size_t j = 0; j < plan.campaign_w.size(); ++j)
        csv.row(static_cast<std::int64_t>(j), plan.campaign_w[j]);
      break;
    case DesignKind::kSwitchback:
      for (std::size_t t = 0; t < plan.schedule.size(); ++t)
        csv.row(static_cast<std::int64_t>(t), plan.schedule[t]);
      break;
    case DesignKind::kBudgetSplit:
      for (std::size_t i = 0; i < plan.bucket_d.size(); ++i) {
        const int arm = plan.bucket_d[i] == 1 ? plan.coin : 1 - plan.coin;
        csv.row(static_cast<std::int64_t>(i), arm);
      }
      break;
  }
}

}  // namespace mktsim
