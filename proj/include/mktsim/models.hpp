#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mktsim/engine.hpp"
#include "mktsim/marketplace.hpp"
#include "mktsim/outcomes.hpp"
#include "mktsim/rng.hpp"

// Closed-form potential-outcome models. These trade mechanistic realism for
// exactly computable ground truth: the competition externality enters only
// through the treated fraction of the member's own marketplace, so expected
// estimates and biases have closed forms that the enumeration oracle can
// check to arithmetic precision.
//
// Values are reals, not cents, and Gaussian noise can push them negative;
// the hard Eq-style outcome constraints are an engine property and are
// asserted for mechanistic runs only.

namespace mktsim {

enum class AnalyticKind {
  // value = baseline + lift*w - cannibalization * saturation(treated_fraction)
  // where saturation rises from 0 at fraction 0 to 1 at fraction 1. The
  // treatment-control contrast is constant in the treated fraction, so the
  // naive estimator's bias equals `cannibalization` exactly.
  kConstantCannibalization,
  // value = baseline + lift*w - slope * K/(N-1) with K the number of OTHER
  // treated members: universally beneficial treatment whose per-member value
  // decays as the treated group grows. Requires slope < lift so that every
  // control outcome sits below every treatment outcome.
  kDiminishingReturns,
  // A fully budget-constrained campaign: the campaign always spends exactly
  // its (finite) budget, and treatment only tilts each member's share of it:
  // share weight = baseline + lift*w. Total treatment effect is exactly 0.
  kBudgetShare,
};

struct AnalyticModel {
  AnalyticKind kind = AnalyticKind::kConstantCannibalization;
  double baseline = 5.0;
  double lift = 2.0;
  double cannibalization = 1.0;
  double slope = 1.0;
  double noise_sd = 0.0;
};

// Member x period panel with campaign-level scale factors; used by the power
// and switchback studies where the mechanistic engine would be too slow.
struct PanelParams {
  int periods = 14;
  double period_mean = 10.0;    // per-member per-period baseline
  double member_sd = 5.0;       // idiosyncratic noise per member-period
  double period_sd = 2.0;       // marketplace-wide shock per period
  double scale_log_sd = 0.8;    // campaign scales c_j = exp(scale_log_sd * z_j)
  double carryover = 0.0;       // switchback-only residual treatment level
};

struct OutcomeModelRef {
  enum class Backend { kMechanistic, kAnalytic, kPanel };
  Backend backend = Backend::kMechanistic;
  AnalyticModel analytic;
  PanelParams panel;
};

inline double saturation(double treated_fraction) {
  constexpr double inv_e = 0.36787944117144232159552377016146;
  return (std::exp(treated_fraction - 1.0) - inv_e) / (1.0 - inv_e);
}

// Constant-cannibalization potential outcome for one member. `treated_level`
// is the member's own treatment (fractional levels appear in carryover
// scenarios); `treated_fraction` is computed over the member's own
// marketplace: the full population under member-level randomization, the
// member's own bucket under budget-split.
inline double analytic_outcome(const AnalyticModel& model, double treated_level,
                               double treated_fraction, double noise) {
  return model.baseline + model.lift * treated_level -
         model.cannibalization * saturation(treated_fraction) + noise;
}

inline double diminishing_returns_outcome(const AnalyticModel& model, int w,
                                          int treated_count_excl, int n) {
  if (treated_count_excl < 0 || treated_count_excl >= n)
    throw ValidationError("treated count excluding self must lie in [0, N-1]");
  const double crowd = n > 1
      ? static_cast<double>(treated_count_excl) / static_cast<double>(n - 1)
      : 0.0;
  return model.baseline + model.lift * w - model.slope * crowd;
}

namespace detail {

// Shared-noise draw: keyed by (member, campaign) only, so the same epsilon
// appears in every potential outcome of that pair and cancels from
// treatment-control differences at fixed seed.
inline double member_noise(const AnalyticModel& model, std::uint64_t seed, int member,
                           int campaign) {
  if (model.noise_sd <= 0.0) return 0.0;
  Rng rng(derive_seed(seed, "noise", static_cast<std::uint64_t>(member),
                      static_cast<std::uint64_t>(campaign)));
  return model.noise_sd * rng.normal();
}

// Evaluates one marketplace whose members all hold treatment w with a given
// within-marketplace treated fraction.
inline void analytic_fill(const Marketplace& market, const AnalyticModel& model, int w,
                          double treated_fraction, int arm, std::uint64_t noise_seed,
                          const std::vector<int>* member_map, OutcomeMatrix& out) {
  for (int j = 0; j < market.n_campaigns(); ++j) {
    const auto& campaign = market.campaigns[static_cast<std::size_t>(j)];
    if (model.kind == AnalyticKind::kBudgetShare) {
      if (is_unlimited(campaign.budget))
        throw ValidationError("budget-share model requires finite budgets");
      // Uniform arm: every member holds the same share weight, so each gets
      // an equal cut of the fully spent budget.
      for (int local : campaign.target) {
        const int global = member_map ? (*member_map)[static_cast<std::size_t>(local)] : local;
        const double share = static_cast<double>(campaign.budget) /
                             static_cast<double>(campaign.target.size());
        out.cells.push_back({global, campaign.id, arm, share, share});
      }
      continue;
    }
    for (int local : campaign.target) {
      const int global = member_map ? (*member_map)[static_cast<std::size_t>(local)] : local;
      const double noise = member_noise(model, noise_seed, global, campaign.id);
      double value = 0.0;
      if (model.kind == AnalyticKind::kConstantCannibalization) {
        value = analytic_outcome(model, w, treated_fraction, noise);
      } else {
        const int treated_in_market =
            static_cast<int>(std::llround(treated_fraction * market.n_members()));
        const int excl = w == 1 ? treated_in_market - 1 : treated_in_market;
        value = diminishing_returns_outcome(model, w,
                                            std::clamp(excl, 0, market.n_members() - 1),
                                            market.n_members()) + noise;
      }
      out.cells.push_back({global, campaign.id, arm, value, value});
    }
  }
}

}  // namespace detail

// Analytic evaluation under mixed member-level assignment (member-cr).
inline OutcomeMatrix evaluate_analytic_member_plan(const Marketplace& market,
                                                   const AnalyticModel& model,
                                                   const std::vector<int>& member_w,
                                                   std::uint64_t noise_seed) {
  if (static_cast<int>(member_w.size()) != market.n_members())
    throw ConfigError("assignment has wrong member dimension");
  OutcomeMatrix out;
  out.n_members = market.n_members();
  out.n_campaigns = market.n_campaigns();
  const int n = market.n_members();
  int n1 = 0;
  for (int w : member_w) n1 += w;
  const double fraction = static_cast<double>(n1) / static_cast<double>(n);
  for (int j = 0; j < market.n_campaigns(); ++j) {
    const auto& campaign = market.campaigns[static_cast<std::size_t>(j)];
    if (model.kind == AnalyticKind::kBudgetShare) {
      if (is_unlimited(campaign.budget))
        throw ValidationError("budget-share model requires finite budgets");
      double weight_sum = 0.0;
      for (int i : campaign.target)
        weight_sum += model.baseline + model.lift * member_w[static_cast<std::size_t>(i)];
      for (int i : campaign.target) {
        const int w = member_w[static_cast<std::size_t>(i)];
        const double share = static_cast<double>(campaign.budget) *
                             (model.baseline + model.lift * w) / weight_sum;
        out.cells.push_back({i, campaign.id, w, share, share});
      }
      continue;
    }
    for (int i : campaign.target) {
      const int w = member_w[static_cast<std::size_t>(i)];
      const double noise = detail::member_noise(model, noise_seed, i, campaign.id);
      double value = 0.0;
      if (model.kind == AnalyticKind::kConstantCannibalization) {
        value = analytic_outcome(model, w, fraction, noise);
      } else {
        value = diminishing_returns_outcome(model, w, n1 - w, n) + noise;
      }
      out.cells.push_back({i, campaign.id, w, value, value});
    }
  }
  out.sort_cells();
  return out;
}

// Analytic evaluation of one whole marketplace under a uniform arm (the
// budget-split bucket case and the pure counterfactual worlds).
inline OutcomeMatrix evaluate_analytic_uniform(const Marketplace& market,
                                               const AnalyticModel& model, int w, int arm,
                                               std::uint64_t noise_seed) {
  OutcomeMatrix out;
  out.n_members = market.n_members();
  out.n_campaigns = market.n_campaigns();
  detail::analytic_fill(market, model, w, w == 1 ? 1.0 : 0.0, arm, noise_seed, nullptr, out);
  out.sort_cells();
  return out;
}

// Analytic evaluation under campaign-level assignment: a treated campaign
// lifts all of its outcomes, and the externality acts through the treated
// fraction of campaigns.
inline OutcomeMatrix evaluate_analytic_campaign_plan(const Marketplace& market,
                                                     const AnalyticModel& model,
                                                     const std::vector<int>& campaign_w,
                                                     std::uint64_t noise_seed) {
  if (static_cast<int>(campaign_w.size()) != market.n_campaigns())
    throw ConfigError("assignment has wrong campaign dimension");
  OutcomeMatrix out;
  out.n_members = market.n_members();
  out.n_campaigns = market.n_campaigns();
  int m1 = 0;
  for (int w : campaign_w) m1 += w;
  const double fraction = static_cast<double>(m1) / static_cast<double>(market.n_campaigns());
  for (int j = 0; j < market.n_campaigns(); ++j) {
    const auto& campaign = market.campaigns[static_cast<std::size_t>(j)];
    const int w = campaign_w[static_cast<std::size_t>(j)];
    if (model.kind == AnalyticKind::kBudgetShare) {
      if (is_unlimited(campaign.budget))
        throw ValidationError("budget-share model requires finite budgets");
      // Campaign-side treatment cannot move its own fully-spent budget.
      for (int i : campaign.target) {
        const double share = static_cast<double>(campaign.budget) /
                             static_cast<double>(campaign.target.size());
        out.cells.push_back({i, campaign.id, w, share, share});
      }
      continue;
    }
    for (int i : campaign.target) {
      const double noise = detail::member_noise(model, noise_seed, i, campaign.id);
      double value = 0.0;
      if (model.kind == AnalyticKind::kConstantCannibalization) {
        value = analytic_outcome(model, w, fraction, noise);
      } else {
        const int excl = std::clamp(m1 - w, 0, std::max(market.n_campaigns() - 1, 0));
        value = diminishing_returns_outcome(model, w, excl, market.n_campaigns()) + noise;
      }
      out.cells.push_back({i, campaign.id, w, value, value});
    }
  }
  out.sort_cells();
  return out;
}

// Analytic budget-split: split the marketplace, evaluate each bucket as its
// own marketplace at uniform treatment (within-bucket treated fraction 1 or
// 0, which is exactly the limited-interference reading). Outcomes come back
// in parent coordinates.
struct AnalyticBudgetSplit {
  OutcomeMatrix bucket[2];
};

inline AnalyticBudgetSplit evaluate_analytic_budget_split(const Marketplace& market,
                                                          const AnalyticModel& model,
                                                          const AssignmentPlan& plan,
                                                          std::uint64_t noise_seed) {
  if (static_cast<int>(plan.bucket_d.size()) != market.n_members())
    throw ConfigError("assignment has wrong member dimension");
  const SplitMarketplace split = split_marketplace(market, plan.bucket_d);
  AnalyticBudgetSplit out;
  for (int l = 0; l < 2; ++l) {
    const int arm = l == 1 ? plan.coin : 1 - plan.coin;
    out.bucket[l].n_members = market.n_members();
    out.bucket[l].n_campaigns = market.n_campaigns();
    if (split.bucket[l].members.empty()) continue;
    detail::analytic_fill(split.bucket[l], model, arm, arm == 1 ? 1.0 : 0.0, arm, noise_seed,
                          &split.member_map[l], out.bucket[l]);
    out.bucket[l].sort_cells();
  }
  return out;
}

// Analytic switchback: the whole marketplace is treated at level e_t per
// period (carryover may make levels fractional). Member-period values are
// scaled by 1/T so horizon totals stay comparable across designs.
struct AnalyticSwitchbackResult {
  OutcomeMatrix outcomes;
  std::vector<PeriodTotal> period_totals;
};

inline AnalyticSwitchbackResult evaluate_analytic_switchback(const Marketplace& market,
                                                             const AnalyticModel& model,
                                                             const std::vector<int>& schedule,
                                                             double carryover,
                                                             std::uint64_t noise_seed) {
  AnalyticSwitchbackResult result;
  result.outcomes.n_members = market.n_members();
  result.outcomes.n_campaigns = market.n_campaigns();
  const int periods = static_cast<int>(schedule.size());
  const double inv_t = 1.0 / static_cast<double>(periods);
  const double period_noise_sd = model.noise_sd * std::sqrt(inv_t);
  std::vector<double> level(schedule.size(), 0.0);
  double prev = 0.0;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    prev = schedule[t] == 1 ? 1.0 : carryover * prev;
    level[t] = prev;
  }
  std::vector<double> pair_total(
      static_cast<std::size_t>(market.n_members()) * static_cast<std::size_t>(market.n_campaigns()),
      0.0);
  for (int t = 0; t < periods; ++t) {
    PeriodTotal pt;
    pt.period = t;
    pt.arm = schedule[static_cast<std::size_t>(t)];
    for (int j = 0; j < market.n_campaigns(); ++j) {
      const auto& campaign = market.campaigns[static_cast<std::size_t>(j)];
      for (int i : campaign.target) {
        double noise = 0.0;
        if (period_noise_sd > 0.0) {
          Rng rng(derive_seed(noise_seed, "sb-noise", static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(t)));
          noise = period_noise_sd * rng.normal();
        }
        const double value =
            inv_t * analytic_outcome(model, level[static_cast<std::size_t>(t)],
                                     level[static_cast<std::size_t>(t)], 0.0) + noise;
        pt.delivered += value;
        pt.revenue += value;
        pair_total[static_cast<std::size_t>(i) * market.n_campaigns() +
                   static_cast<std::size_t>(j)] += value;
      }
    }
    result.period_totals.push_back(pt);
  }
  for (int i = 0; i < market.n_members(); ++i) {
    for (int j = 0; j < market.n_campaigns(); ++j) {
      const double total =
          pair_total[static_cast<std::size_t>(i) * market.n_campaigns() + static_cast<std::size_t>(j)];
      if (total == 0.0) continue;
      result.outcomes.cells.push_back({i, j, 0, total, total});
    }
  }
  return result;
}

struct GroundTruth {
  double tau = 0.0;       // total delivered-value effect
  double tau_star = 0.0;  // total revenue effect
  std::vector<double> per_campaign;       // delivered, by campaign index
  std::vector<double> per_campaign_star;  // revenue, by campaign index
};

// tau(B): total(all-treated world) - total(all-control world), both worlds
// evaluated with identical seeds so shared noise cancels.
inline GroundTruth ground_truth_tau(const Marketplace& market, const OutcomeModelRef& model,
                                    const TreatmentSpec& treatment) {
  OutcomeMatrix treated, control;
  if (model.backend == OutcomeModelRef::Backend::kMechanistic) {
    treated = simulate_uniform(market, 1, treatment).outcomes;
    control = simulate_uniform(market, 0, treatment).outcomes;
  } else {
    treated = evaluate_analytic_uniform(market, model.analytic, 1, 1, market.seed);
    control = evaluate_analytic_uniform(market, model.analytic, 0, 0, market.seed);
  }
  GroundTruth gt;
  const auto t_d = treated.campaign_totals(Estimand::kDelivered);
  const auto c_d = control.campaign_totals(Estimand::kDelivered);
  const auto t_r = treated.campaign_totals(Estimand::kRevenue);
  const auto c_r = control.campaign_totals(Estimand::kRevenue);
  for (std::size_t j = 0; j < t_d.size(); ++j) {
    gt.per_campaign.push_back(t_d[j] - c_d[j]);
    gt.per_campaign_star.push_back(t_r[j] - c_r[j]);
    gt.tau += t_d[j] - c_d[j];
    gt.tau_star += t_r[j] - c_r[j];
  }
  return gt;
}

}  // namespace mktsim
