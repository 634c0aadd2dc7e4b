#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mktsim/assignment.hpp"
#include "mktsim/engine.hpp"
#include "mktsim/errors.hpp"
#include "mktsim/estimators.hpp"
#include "mktsim/models.hpp"
#include "mktsim/stats.hpp"

// Brute-force machinery, independent of the Monte Carlo drivers: exact
// expectations of estimators by enumerating every admissible assignment, and
// empirical validation of the stable-system assumption via proportionally
// restricted campaigns.

namespace mktsim {

inline std::int64_t binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t result = 1;
  for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return result;
}

// Visits every size-k subset of {0..n-1} in lexicographic order. The visitor
// receives the subset as a 0/1 indicator vector.
template <typename Visitor>
void for_each_combination(int n, int k, Visitor&& visit) {
  std::vector<int> pick(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  std::vector<int> indicator(static_cast<std::size_t>(n), 0);
  for (;;) {
    std::fill(indicator.begin(), indicator.end(), 0);
    for (int i : pick) indicator[static_cast<std::size_t>(i)] = 1;
    visit(const_cast<const std::vector<int>&>(indicator));
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

// Design description for enumeration: which design, and its parameters.
struct EnumeratedDesign {
  DesignKind kind = DesignKind::kMemberCr;
  int treated_units = 1;   // N1 (member-cr) or M1 (campaign-cr)
  int periods = 2;         // switchback
  bool balanced = true;    // switchback
  double coin_p = 0.5;     // budget-split treated-bucket probability
};

struct EnumerationEstimandResult {
  double exact_mean = 0.0;
  double ground_truth = 0.0;
  double bias = 0.0;
  std::vector<double> per_campaign_mean;
  std::vector<double> per_campaign_truth;
};

struct EnumerationResult {
  DesignKind design = DesignKind::kMemberCr;
  std::int64_t assignments_evaluated = 0;
  EnumerationEstimandResult delivered;
  EnumerationEstimandResult revenue;
};

struct EnumerationOptions {
  std::int64_t size_guard = 1'000'000;
  // Mechanistic backends need one simulation per assignment; require an
  // explicit opt-in for that cost.
  bool allow_mechanistic = false;
  // Default draws a fresh engine stream per assignment rank; the paired mode
  // holds the stream fixed across assignments (common random numbers).
  bool common_random_numbers = false;
  BudgetSplitUnit budget_split_unit = BudgetSplitUnit::kMember;
};

namespace detail {

struct WeightedMean {
  KahanSum sum;
  KahanSum weight;
  void add(double value, double w) {
    sum.add(value * w);
    weight.add(w);
  }
  double value() const { return weight.value() > 0.0 ? sum.value() / weight.value() : 0.0; }
};

struct EnumerationAccumulator {
  WeightedMean total_delivered;
  WeightedMean total_revenue;
  std::vector<WeightedMean> campaign_delivered;
  std::vector<WeightedMean> campaign_revenue;

  void init(std::size_t campaigns) {
    campaign_delivered.resize(campaigns);
    campaign_revenue.resize(campaigns);
  }
  void add(const EstimateReport& delivered, const EstimateReport& revenue, double w) {
    total_delivered.add(delivered.total_estimate, w);
    total_revenue.add(revenue.total_estimate, w);
    for (std::size_t j = 0; j < delivered.per_campaign.size(); ++j)
      campaign_delivered[j].add(delivered.per_campaign[j].second, w);
    for (std::size_t j = 0; j < revenue.per_campaign.size(); ++j)
      campaign_revenue[j].add(revenue.per_campaign[j].second, w);
  }
};

}  // namespace detail

// Exact expectation of a design's estimator over every admissible
// assignment, compared against the all-worlds ground truth. Analytic models
// evaluate in closed form; mechanistic backends re-simulate per assignment
// (behind the allow_mechanistic flag).
inline EnumerationResult enumerate_expectation(const Marketplace& market,
                                               const OutcomeModelRef& model,
                                               const EnumeratedDesign& design,
                                               const TreatmentSpec& treatment,
                                               const EnumerationOptions& options = {}) {
  const bool mechanistic = model.backend == OutcomeModelRef::Backend::kMechanistic;
  if (mechanistic && !options.allow_mechanistic)
    throw EnumerationGuardError(
        "mechanistic enumeration simulates per assignment; pass allow_mechanistic");
  if (model.backend == OutcomeModelRef::Backend::kPanel)
    throw ValidationError("panel models are Monte Carlo generators; enumeration unsupported");

  const int n = market.n_members();
  const int m = market.n_campaigns();
  std::int64_t count = 0;
  switch (design.kind) {
    case DesignKind::kMemberCr:
      count = binomial_coefficient(n, design.treated_units);
      break;
    case DesignKind::kCampaignCr:
      count = binomial_coefficient(m, design.treated_units);
      break;
    case DesignKind::kBudgetSplit:
      count = binomial_coefficient(n, (n + 1) / 2) * 2;
      break;
    case DesignKind::kSwitchback:
      count = design.balanced ? binomial_coefficient(design.periods, design.periods / 2)
                              : (std::int64_t{1} << design.periods);
      break;
  }
  if (count <= 0) throw ValidationError("empty assignment space");
  if (count > options.size_guard)
    throw EnumerationGuardError("assignment space of size " + std::to_string(count) +
                                " exceeds the enumeration guard of " +
                                std::to_string(options.size_guard) +
                                "; raise size_guard explicitly to proceed");

  detail::EnumerationAccumulator acc;
  acc.init(static_cast<std::size_t>(m));
  std::int64_t rank = 0;

  auto engine_market = [&](std::int64_t assignment_rank) {
    Marketplace mp = market;
    if (!options.common_random_numbers)
      mp.seed = derive_seed(market.seed, "enumeration", static_cast<std::uint64_t>(assignment_rank));
    return mp;
  };

  switch (design.kind) {
    case DesignKind::kMemberCr: {
      if (design.treated_units < 1 || design.treated_units > n)
        throw ValidationError("member-cr enumeration requires 1 <= N1 <= N");
      for_each_combination(n, design.treated_units, [&](const std::vector<int>& w) {
        AssignmentPlan plan;
        plan.kind = DesignKind::kMemberCr;
        plan.member_w = w;
        OutcomeMatrix outcomes =
            mechanistic
                ? simulate_delivery(engine_market(rank), plan, treatment)
                : evaluate_analytic_member_plan(market, model.analytic, w, market.seed);
        acc.add(naive_plugin(outcomes, plan, Estimand::kDelivered),
                naive_plugin(outcomes, plan, Estimand::kRevenue), 1.0);
        ++rank;
      });
      break;
    }
    case DesignKind::kCampaignCr: {
      if (design.treated_units < 1 || design.treated_units > m)
        throw ValidationError("campaign-cr enumeration requires 1 <= M1 <= M");
      for_each_combination(m, design.treated_units, [&](const std::vector<int>& w) {
        AssignmentPlan plan;
        plan.kind = DesignKind::kCampaignCr;
        plan.campaign_w = w;
        OutcomeMatrix outcomes =
            mechanistic
                ? simulate_delivery(engine_market(rank), plan, treatment)
                : evaluate_analytic_campaign_plan(market, model.analytic, w, market.seed);
        acc.add(campaign_level_estimator(outcomes, plan, Estimand::kDelivered),
                campaign_level_estimator(outcomes, plan, Estimand::kRevenue), 1.0);
        ++rank;
      });
      break;
    }
    case DesignKind::kBudgetSplit: {
      for_each_combination(n, (n + 1) / 2, [&](const std::vector<int>& d) {
        for (int coin = 0; coin < 2; ++coin) {
          AssignmentPlan plan;
          plan.kind = DesignKind::kBudgetSplit;
          plan.bucket_d = d;
          plan.coin = coin;
          const double weight = coin == 1 ? design.coin_p : 1.0 - design.coin_p;
          OutcomeMatrix b0, b1;
          if (mechanistic) {
            const BudgetSplitDelivery run =
                run_budget_split_delivery(engine_market(rank), plan, treatment);
            b0 = run.bucket[0];
            b1 = run.bucket[1];
          } else {
            AnalyticBudgetSplit run =
                evaluate_analytic_budget_split(market, model.analytic, plan, market.seed);
            b0 = std::move(run.bucket[0]);
            b1 = std::move(run.bucket[1]);
          }
          acc.add(budget_split_estimator(b0, b1, plan, Estimand::kDelivered,
                                         options.budget_split_unit),
                  budget_split_estimator(b0, b1, plan, Estimand::kRevenue,
                                         options.budget_split_unit),
                  weight);
          ++rank;
        }
      });
      break;
    }
    case DesignKind::kSwitchback: {
      auto evaluate_schedule = [&](const std::vector<int>& schedule) {
        std::vector<PeriodTotal> periods;
        if (mechanistic) {
          AssignmentPlan plan;
          plan.kind = DesignKind::kSwitchback;
          plan.schedule = schedule;
          periods = run_delivery(engine_market(rank), plan, treatment).period_totals;
        } else {
          periods = evaluate_analytic_switchback(market, model.analytic, schedule,
                                                 treatment.carryover, market.seed)
                        .period_totals;
        }
        acc.add(switchback_estimator(periods, Estimand::kDelivered, market.seed),
                switchback_estimator(periods, Estimand::kRevenue, market.seed), 1.0);
        ++rank;
      };
      if (design.balanced) {
        for_each_combination(design.periods, design.periods / 2, evaluate_schedule);
      } else {
        const std::int64_t patterns = std::int64_t{1} << design.periods;
        std::vector<int> schedule(static_cast<std::size_t>(design.periods));
        for (std::int64_t mask = 0; mask < patterns; ++mask) {
          for (int t = 0; t < design.periods; ++t)
            schedule[static_cast<std::size_t>(t)] = static_cast<int>((mask >> t) & 1);
          evaluate_schedule(schedule);
        }
      }
      break;
    }
  }

  const GroundTruth gt = ground_truth_tau(market, model, treatment);
  EnumerationResult result;
  result.design = design.kind;
  result.assignments_evaluated = rank;
  result.delivered.exact_mean = acc.total_delivered.value();
  result.delivered.ground_truth = gt.tau;
  result.delivered.bias = result.delivered.exact_mean - gt.tau;
  result.revenue.exact_mean = acc.total_revenue.value();
  result.revenue.ground_truth = gt.tau_star;
  result.revenue.bias = result.revenue.exact_mean - gt.tau_star;
  for (std::size_t j = 0; j < acc.campaign_delivered.size(); ++j) {
    result.delivered.per_campaign_mean.push_back(acc.campaign_delivered[j].value());
    result.revenue.per_campaign_mean.push_back(acc.campaign_revenue[j].value());
  }
  result.delivered.per_campaign_truth = gt.per_campaign;
  result.revenue.per_campaign_truth = gt.per_campaign_star;
  return result;
}

// Proportionally restricted campaign: targets K members sampled completely
// at random (all campaigns coupled to the same set) with budget K*B/N under
// the bucket-0 rounding rule.
struct RestrictedCampaignView {
  int parent = 0;
  int restricted_size = 0;   // K
  Cents budget = 0;
  std::vector<int> members;  // the K sampled original member indices
};

struct RestrictedMarketplace {
  Marketplace market;                        // members renumbered 0..K-1
  std::vector<int> member_map;               // local -> original index
  std::vector<RestrictedCampaignView> views;
};

inline RestrictedMarketplace build_restricted_marketplace(const Marketplace& parent,
                                                          std::vector<int> members) {
  std::sort(members.begin(), members.end());
  const int k = static_cast<int>(members.size());
  if (k < 1 || k > parent.n_members())
    throw ValidationError("restriction size must lie in [1, N]");
  RestrictedMarketplace out;
  out.member_map = members;
  out.market.horizon = parent.horizon;
  out.market.seed = parent.seed;
  out.market.mechanism = parent.mechanism;
  out.market.reserve_price = parent.reserve_price;
  out.market.fixed_requests = parent.fixed_requests;
  std::vector<int> local(static_cast<std::size_t>(parent.n_members()), -1);
  for (int i = 0; i < k; ++i) {
    const int original = members[static_cast<std::size_t>(i)];
    local[static_cast<std::size_t>(original)] = i;
    MemberProfile copy = parent.members[static_cast<std::size_t>(original)];
    copy.id = i;
    out.market.members.push_back(std::move(copy));
  }
  for (const auto& c : parent.campaigns) {
    Campaign clone;
    clone.id = c.id;
    clone.params = c.params;
    clone.budget = proportional_share(c.budget, k, parent.n_members());
    for (int i : c.target)
      if (local[static_cast<std::size_t>(i)] >= 0)
        clone.target.push_back(local[static_cast<std::size_t>(i)]);
    RestrictedCampaignView view;
    view.parent = c.id;
    view.restricted_size = k;
    view.budget = clone.budget;
    view.members = members;
    out.views.push_back(view);
    if (!clone.target.empty()) out.market.campaigns.push_back(std::move(clone));
  }
  return out;
}

struct StabilityRow {
  int restricted_size = 0;       // K
  double per_member_value = 0.0; // E_d[(1/K) sum of restricted all-treated outcomes]
  double reference_value = 0.0;  // (1/N) sum of unrestricted all-treated outcomes
  double relative_discrepancy = 0.0;
  int reps = 0;
};

// Measures how far proportionally restricted marketplaces drift from the
// full system: for each K, the per-member all-treated delivered value under
// random restrictions versus the unrestricted per-member value. The engine
// stream is held fixed per restriction draw.
inline std::vector<StabilityRow> validate_stable_system(const Marketplace& market,
                                                        const OutcomeModelRef& model,
                                                        const TreatmentSpec& treatment,
                                                        const std::vector<int>& k_grid, int reps,
                                                        std::uint64_t seed) {
  auto all_treated_total = [&](const Marketplace& mp) -> double {
    if (model.backend == OutcomeModelRef::Backend::kMechanistic)
      return simulate_uniform(mp, 1, treatment).outcomes.total(Estimand::kDelivered);
    return evaluate_analytic_uniform(mp, model.analytic, 1, 1, mp.seed)
        .total(Estimand::kDelivered);
  };
  const double reference =
      all_treated_total(market) / static_cast<double>(market.n_members());
  std::vector<StabilityRow> rows;
  for (int k : k_grid) {
    if (k < 1 || k > market.n_members())
      throw ValidationError("stability grid entries must lie in [1, N]");
    StabilityRow row;
    row.restricted_size = k;
    row.reference_value = reference;
    row.reps = k == market.n_members() ? 1 : reps;
    KahanSum acc;
    for (int rep = 0; rep < row.reps; ++rep) {
      Rng rng(derive_seed(seed, "restriction", static_cast<std::uint64_t>(k),
                          static_cast<std::uint64_t>(rep)));
      RestrictedMarketplace restricted =
          build_restricted_marketplace(market, sample_indices(market.n_members(), k, rng));
      // K = N is the identity restriction; keep the reference stream so the
      // discrepancy is exactly zero.
      if (k < market.n_members()) {
        restricted.market.seed =
            derive_seed(seed, "restriction-engine", static_cast<std::uint64_t>(k),
                        static_cast<std::uint64_t>(rep));
      }
      acc.add(all_treated_total(restricted.market) / static_cast<double>(k));
    }
    row.per_member_value = acc.value() / static_cast<double>(row.reps);
    const double denom = std::max(std::abs(reference), 1e-12);
    row.relative_discrepancy = std::abs(row.per_member_value - reference) / denom;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mktsim
