#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mktsim/assignment.hpp"
#include "mktsim/estimators.hpp"
#include "mktsim/models.hpp"
#include "mktsim/rng.hpp"
#include "mktsim/stats.hpp"

// Member x period panel generator for the power and switchback studies.
// Outcomes for member i of campaign j(i) in period t:
//
//   y_it = c_j * (period_mean + lift * w_it + kappa_t) + c_j * eps_it
//
// with heavy-tailed campaign scales c_j = exp(scale_log_sd * z_j), a
// marketplace-wide period shock kappa_t ~ N(0, period_sd) and idiosyncratic
// noise eps_it ~ N(0, member_sd). Campaigns target disjoint member blocks.
// This reproduces the structural power gaps between designs: campaign-level
// tests carry the between-campaign scale variance, switchback tests carry
// the period shocks, and member-split designs cancel both.
//
// Unit totals are drawn as exact distributional aggregates of the i.i.d.
// member-period sums (sums of independent normals are sampled as one
// normal), which keeps 10^5-member scenarios affordable.

namespace mktsim {

struct PanelMarket {
  int n_members = 0;
  int n_campaigns = 0;
  PanelParams params;
  std::vector<double> scale;        // c_j per campaign
  std::vector<int> campaign_of;     // member -> campaign block
  double scale_sum = 0.0;           // sum_i c_{j(i)}
  double scale_sq_sum = 0.0;        // sum_i c_{j(i)}^2
};

inline PanelMarket build_panel_market(int n_members, int n_campaigns, const PanelParams& params,
                                      std::uint64_t scale_seed) {
  if (n_members < 2 || n_campaigns < 1)
    throw ValidationError("panel market needs at least 2 members and 1 campaign");
  PanelMarket market;
  market.n_members = n_members;
  market.n_campaigns = n_campaigns;
  market.params = params;
  Rng rng(derive_seed(scale_seed, "panel-scales"));
  market.scale.reserve(static_cast<std::size_t>(n_campaigns));
  for (int j = 0; j < n_campaigns; ++j)
    market.scale.push_back(std::exp(params.scale_log_sd * rng.normal()));
  market.campaign_of.resize(static_cast<std::size_t>(n_members));
  for (int i = 0; i < n_members; ++i) {
    const int j = static_cast<int>((static_cast<std::int64_t>(i) * n_campaigns) / n_members);
    market.campaign_of[static_cast<std::size_t>(i)] = j;
    const double c = market.scale[static_cast<std::size_t>(j)];
    market.scale_sum += c;
    market.scale_sq_sum += c * c;
  }
  return market;
}

// Total treatment effect over the horizon: lift enters every member-period.
inline GroundTruth panel_ground_truth(const PanelMarket& market, double lift) {
  GroundTruth gt;
  gt.per_campaign.assign(static_cast<std::size_t>(market.n_campaigns), 0.0);
  for (int i = 0; i < market.n_members; ++i) {
    const int j = market.campaign_of[static_cast<std::size_t>(i)];
    gt.per_campaign[static_cast<std::size_t>(j)] +=
        market.scale[static_cast<std::size_t>(j)] * market.params.periods * lift;
  }
  for (double v : gt.per_campaign) gt.tau += v;
  gt.tau_star = gt.tau;
  gt.per_campaign_star = gt.per_campaign;
  return gt;
}

struct PanelExperiment {
  double estimate = 0.0;
  double p_value = 1.0;
  double statistic = 0.0;
};

// Member-randomized designs (member-cr and budget-split): per-member horizon
// totals, Welch t across arms. The common period shock multiplies each
// member's scale and is retained because it does not cancel exactly when the
// arms' scale mixes differ.
inline PanelExperiment panel_member_experiment(const PanelMarket& market,
                                               const AssignmentPlan& plan, double lift,
                                               std::uint64_t seed) {
  const auto& p = market.params;
  Rng rng(derive_seed(seed, "panel-member"));
  double shock_sum = 0.0;
  for (int t = 0; t < p.periods; ++t) shock_sum += p.period_sd * rng.normal();
  const double horizon = static_cast<double>(p.periods);
  const double noise_sd = p.member_sd * std::sqrt(horizon);
  std::vector<double> treated, control;
  treated.reserve(static_cast<std::size_t>(market.n_members));
  for (int i = 0; i < market.n_members; ++i) {
    const double c = market.scale[static_cast<std::size_t>(market.campaign_of[
        static_cast<std::size_t>(i)])];
    const int w = member_arm(plan, i);
    const double total =
        c * (horizon * p.period_mean + horizon * lift * w + shock_sum + noise_sd * rng.normal());
    (w == 1 ? treated : control).push_back(total);
  }
  if (treated.size() < 2 || control.size() < 2)
    throw UndefinedContrastError("panel member experiment needs both arms");
  PanelExperiment result;
  result.estimate = static_cast<double>(market.n_members) * (mean(treated) - mean(control));
  const TTestResult tt = welch_t_test(treated, control);
  result.statistic = tt.statistic;
  result.p_value = tt.p_value;
  return result;
}

// Campaign-randomized design: per-campaign horizon totals with the member
// noise aggregated into one normal per campaign.
inline PanelExperiment panel_campaign_experiment(const PanelMarket& market,
                                                 const AssignmentPlan& plan, double lift,
                                                 std::uint64_t seed) {
  if (plan.kind != DesignKind::kCampaignCr)
    throw ValidationError("panel campaign experiment requires a campaign-cr plan");
  const auto& p = market.params;
  Rng rng(derive_seed(seed, "panel-campaign"));
  double shock_sum = 0.0;
  for (int t = 0; t < p.periods; ++t) shock_sum += p.period_sd * rng.normal();
  const double horizon = static_cast<double>(p.periods);
  std::vector<double> block(static_cast<std::size_t>(market.n_campaigns), 0.0);
  for (int i = 0; i < market.n_members; ++i)
    block[static_cast<std::size_t>(market.campaign_of[static_cast<std::size_t>(i)])] += 1.0;
  std::vector<double> treated, control;
  for (int j = 0; j < market.n_campaigns; ++j) {
    const double c = market.scale[static_cast<std::size_t>(j)];
    const double members = block[static_cast<std::size_t>(j)];
    const int w = plan.campaign_w[static_cast<std::size_t>(j)];
    const double noise_sd = c * p.member_sd * std::sqrt(members * horizon);
    const double total = c * members * (horizon * p.period_mean + horizon * lift * w + shock_sum) +
                         noise_sd * rng.normal();
    (w == 1 ? treated : control).push_back(total);
  }
  if (treated.size() < 2 || control.size() < 2)
    throw UndefinedContrastError("panel campaign experiment needs two campaigns per arm");
  PanelExperiment result;
  result.estimate = static_cast<double>(market.n_campaigns) * (mean(treated) - mean(control));
  const TTestResult tt = welch_t_test(treated, control);
  result.statistic = tt.statistic;
  result.p_value = tt.p_value;
  return result;
}

// Switchback: marketplace period totals with carryover-adjusted treatment
// levels, analyzed by the paired permutation test.
inline PanelExperiment panel_switchback_experiment(const PanelMarket& market,
                                                   const AssignmentPlan& plan, double lift,
                                                   std::uint64_t seed) {
  if (plan.kind != DesignKind::kSwitchback)
    throw ValidationError("panel switchback experiment requires a switchback plan");
  const auto& p = market.params;
  Rng rng(derive_seed(seed, "panel-switchback"));
  const double agg_noise_sd = p.member_sd * std::sqrt(market.scale_sq_sum);
  std::vector<PeriodTotal> periods;
  double level = 0.0;
  for (std::size_t t = 0; t < plan.schedule.size(); ++t) {
    level = plan.schedule[t] == 1 ? 1.0 : p.carryover * level;
    const double total = market.scale_sum * (p.period_mean + lift * level +
                                             p.period_sd * rng.normal()) +
                         agg_noise_sd * rng.normal();
    periods.push_back({static_cast<int>(t), plan.schedule[t], total, total});
  }
  const EstimateReport report = switchback_estimator(periods, Estimand::kDelivered, seed);
  PanelExperiment result;
  result.estimate = report.total_estimate;
  result.statistic = report.statistic;
  result.p_value = report.p_value;
  return result;
}

}  // namespace mktsim
