#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mktsim/config.hpp"
#include "mktsim/engine.hpp"
#include "mktsim/estimators.hpp"
#include "mktsim/models.hpp"
#include "mktsim/panel.hpp"

// One experiment replication: draw an assignment, realize outcomes under the
// configured backend, estimate, test. The same pipeline serves the simulate
// subcommand (keep_artifacts) and the Monte Carlo studies.

namespace mktsim {

struct ExperimentResult {
  AssignmentPlan plan;
  EstimateReport delivered;
  EstimateReport revenue;
  // Artifacts for the simulate subcommand.
  std::optional<OutcomeMatrix> outcomes;
  std::vector<PeriodTotal> period_totals;
};

namespace detail {

// The study effect grid overrides the treatment strength: the bid/value
// multiplier becomes 1 + effect for mechanistic runs, and the direct lift
// becomes the effect for analytic and panel backends.
inline void apply_effect(double effect, TreatmentSpec& treatment, AnalyticModel& analytic,
                         double& panel_lift) {
  treatment.multiplier = 1.0 + effect;
  analytic.lift = effect;
  panel_lift = effect;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ScenarioConfig& cfg, DesignKind design,
                                       std::uint64_t seed, bool keep_artifacts = false,
                                       std::optional<double> effect = std::nullopt) {
  TreatmentSpec treatment = build_treatment(cfg);
  OutcomeModelRef model = build_model(cfg);
  double panel_lift = cfg.model.analytic.lift;
  if (effect) detail::apply_effect(*effect, treatment, model.analytic, panel_lift);

  ExperimentResult result;
  result.plan = draw_plan(cfg, design, derive_seed(seed, "plan"));
  const std::uint64_t world_seed = derive_seed(seed, "world");

  if (model.backend == OutcomeModelRef::Backend::kPanel) {
    const PanelMarket market = build_panel_market(cfg.marketplace.members,
                                                  cfg.marketplace.campaigns, model.panel,
                                                  cfg.study.seed);
    PanelExperiment exp;
    const char* method = "";
    switch (design) {
      case DesignKind::kMemberCr:
        exp = panel_member_experiment(market, result.plan, panel_lift, world_seed);
        method = "member-cr-plugin";
        break;
      case DesignKind::kBudgetSplit:
        exp = panel_member_experiment(market, result.plan, panel_lift, world_seed);
        method = "budget-split";
        break;
      case DesignKind::kCampaignCr:
        exp = panel_campaign_experiment(market, result.plan, panel_lift, world_seed);
        method = "campaign-cr";
        break;
      case DesignKind::kSwitchback:
        exp = panel_switchback_experiment(market, result.plan, panel_lift, world_seed);
        method = "switchback-paired-permutation";
        break;
    }
    for (EstimateReport* report : {&result.delivered, &result.revenue}) {
      report->method = method;
      report->total_estimate = exp.estimate;
      report->statistic = exp.statistic;
      report->p_value = exp.p_value;
    }
    result.delivered.estimand = Estimand::kDelivered;
    result.revenue.estimand = Estimand::kRevenue;
    return result;
  }

  const bool mechanistic = model.backend == OutcomeModelRef::Backend::kMechanistic;
  Marketplace market = build_marketplace(cfg, world_seed);

  switch (design) {
    case DesignKind::kMemberCr: {
      OutcomeMatrix outcomes =
          mechanistic
              ? simulate_delivery(market, result.plan, treatment)
              : evaluate_analytic_member_plan(market, model.analytic, result.plan.member_w,
                                              world_seed);
      result.delivered = naive_plugin(outcomes, result.plan, Estimand::kDelivered);
      result.revenue = naive_plugin(outcomes, result.plan, Estimand::kRevenue);
      if (keep_artifacts) result.outcomes = std::move(outcomes);
      break;
    }
    case DesignKind::kCampaignCr: {
      OutcomeMatrix outcomes =
          mechanistic
              ? simulate_delivery(market, result.plan, treatment)
              : evaluate_analytic_campaign_plan(market, model.analytic, result.plan.campaign_w,
                                                world_seed);
      result.delivered = campaign_level_estimator(outcomes, result.plan, Estimand::kDelivered);
      result.revenue = campaign_level_estimator(outcomes, result.plan, Estimand::kRevenue);
      if (keep_artifacts) result.outcomes = std::move(outcomes);
      break;
    }
    case DesignKind::kSwitchback: {
      if (mechanistic) {
        if (static_cast<int>(result.plan.schedule.size()) != market.horizon)
          throw ConfigError("switchback periods must equal the marketplace horizon");
        DeliveryResult run = run_delivery(market, result.plan, treatment);
        result.period_totals = run.period_totals;
        if (keep_artifacts) result.outcomes = std::move(run.outcomes);
      } else {
        AnalyticSwitchbackResult run = evaluate_analytic_switchback(
            market, model.analytic, result.plan.schedule, treatment.carryover, world_seed);
        result.period_totals = run.period_totals;
        if (keep_artifacts) result.outcomes = std::move(run.outcomes);
      }
      result.delivered = switchback_estimator(result.period_totals, Estimand::kDelivered,
                                              world_seed);
      result.revenue = switchback_estimator(result.period_totals, Estimand::kRevenue,
                                            world_seed);
      break;
    }
    case DesignKind::kBudgetSplit: {
      const BudgetSplitUnit unit = treatment.side == TreatmentSpec::Side::kCampaign
                                       ? BudgetSplitUnit::kCampaign
                                       : BudgetSplitUnit::kMember;
      OutcomeMatrix b0, b1;
      if (mechanistic) {
        BudgetSplitDelivery run = run_budget_split_delivery(market, result.plan, treatment);
        b0 = std::move(run.bucket[0]);
        b1 = std::move(run.bucket[1]);
      } else {
        AnalyticBudgetSplit run =
            evaluate_analytic_budget_split(market, model.analytic, result.plan, world_seed);
        b0 = std::move(run.bucket[0]);
        b1 = std::move(run.bucket[1]);
      }
      result.delivered = budget_split_estimator(b0, b1, result.plan, Estimand::kDelivered, unit);
      result.revenue = budget_split_estimator(b0, b1, result.plan, Estimand::kRevenue, unit);
      if (keep_artifacts) {
        OutcomeMatrix merged;
        merged.n_members = market.n_members();
        merged.n_campaigns = market.n_campaigns();
        for (const auto& cell : b0.cells) merged.cells.push_back(cell);
        for (const auto& cell : b1.cells) merged.cells.push_back(cell);
        merged.sort_cells();
        result.outcomes = std::move(merged);
      }
      break;
    }
  }
  return result;
}

// Ground truth for the configured scenario at a given effect size.
inline GroundTruth scenario_ground_truth(const ScenarioConfig& cfg,
                                         std::optional<double> effect = std::nullopt) {
  TreatmentSpec treatment = build_treatment(cfg);
  OutcomeModelRef model = build_model(cfg);
  double panel_lift = cfg.model.analytic.lift;
  if (effect) detail::apply_effect(*effect, treatment, model.analytic, panel_lift);
  if (model.backend == OutcomeModelRef::Backend::kPanel) {
    const PanelMarket market = build_panel_market(cfg.marketplace.members,
                                                  cfg.marketplace.campaigns, model.panel,
                                                  cfg.study.seed);
    return panel_ground_truth(market, panel_lift);
  }
  const Marketplace market =
      build_marketplace(cfg, derive_seed(cfg.study.seed, "ground-truth"));
  return ground_truth_tau(market, model, treatment);
}

}  // namespace mktsim
