#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "mktsim/assignment.hpp"
#include "mktsim/marketplace.hpp"
#include "mktsim/outcomes.hpp"
#include "mktsim/rng.hpp"

// Mechanistic delivery engine: per tick, members issue ad requests, paced
// campaigns bid in single-slot auctions, winners are charged against their
// budget, and a tracker tallies spend per (campaign, arm). One run is
// strictly sequential and deterministic; all randomness comes from streams
// keyed by (run seed, member, tick, slot), so outcomes never depend on the
// treatment assignment through draw-ordering side effects.

namespace mktsim {

struct AdRequest {
  int member = 0;
  int tick = 0;
  int slot = 0;
};

struct CampaignBidState {
  int campaign = 0;
  double bid = 0.0;
};

struct AuctionResult {
  bool has_winner = false;
  int winner = -1;
  double price = 0.0;
};

// Single-slot auction over the eligible bids. Bids below the reserve are
// excluded. Ties go to the lowest campaign id; a seeded coin backs that rule
// up in case of id collisions. An empty field is a no-winner result.
inline AuctionResult run_auction(const AdRequest& request,
                                 const std::vector<CampaignBidState>& eligible,
                                 AuctionMechanism mechanism, Cents reserve,
                                 std::uint64_t seed) {
  AuctionResult result;
  const double floor_price = static_cast<double>(reserve);
  double best = -1.0, second = -1.0;
  int best_id = -1;
  for (const auto& bid : eligible) {
    if (bid.bid < floor_price) continue;
    if (bid.bid > best || (bid.bid == best && bid.campaign < best_id) ||
        (bid.bid == best && bid.campaign == best_id &&
         keyed_uniform(seed, "tie", static_cast<std::uint64_t>(request.member),
                       static_cast<std::uint64_t>(request.tick),
                       static_cast<std::uint64_t>(request.slot)) < 0.5)) {
      if (bid.campaign != best_id) second = std::max(second, best);
      best = bid.bid;
      best_id = bid.campaign;
    } else {
      second = std::max(second, bid.bid);
    }
  }
  if (best_id < 0) return result;
  result.has_winner = true;
  result.winner = best_id;
  result.price = mechanism == AuctionMechanism::kFirstPrice
                     ? best
                     : std::max(second, floor_price);
  return result;
}

// Multiplicative pacing feedback against the linear spend schedule
// spend(t) = budget * t / horizon. Behind schedule: rate * (1 + step);
// ahead: rate * (1 - step); exactly on schedule: hold. The rate is clamped
// to [0,1], starts at the configured initial rate, and drops to 0 for good
// once the arm budget is spent. Unlimited budgets never throttle.
inline double pacing_step(double prev_rate, Cents spend, Cents arm_budget, int tick, int horizon,
                          const CampaignParams& params) {
  if (is_unlimited(arm_budget)) return 1.0;
  if (spend >= arm_budget) return 0.0;
  if (tick <= 0) return std::clamp(params.pacing_initial_rate, 0.0, 1.0);
  // Exact integer comparison of spend/budget against tick/horizon.
  const __int128 lhs = static_cast<__int128>(spend) * horizon;
  const __int128 rhs = static_cast<__int128>(arm_budget) * tick;
  double rate = prev_rate;
  if (lhs < rhs)
    rate *= 1.0 + params.pacing_step;
  else if (lhs > rhs)
    rate *= 1.0 - params.pacing_step;
  return std::clamp(rate, 0.0, 1.0);
}

// Cumulative spend and impression counts keyed by (campaign id, arm).
struct TrackerState {
  std::map<std::pair<int, int>, Cents> spend;
  std::map<std::pair<int, int>, std::int64_t> impressions;

  void record(int campaign, int arm, Cents charge) {
    spend[{campaign, arm}] += charge;
    impressions[{campaign, arm}] += 1;
  }

  Cents campaign_spend(int campaign) const {
    Cents total = 0;
    for (const auto& [key, value] : spend)
      if (key.first == campaign) total += value;
    return total;
  }
};

struct DeliveryResult {
  OutcomeMatrix outcomes;
  std::vector<PeriodTotal> period_totals;  // filled for switchback runs
  TrackerState tracker;
};

namespace detail {

// Per-tick treatment level with geometric carryover: a period inherits
// `carryover` times the previous level when its own assignment is control.
inline std::vector<double> treatment_levels(const std::vector<int>& schedule, double carryover) {
  std::vector<double> level(schedule.size(), 0.0);
  double prev = 0.0;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    prev = schedule[t] == 1 ? 1.0 : carryover * prev;
    level[t] = prev;
  }
  return level;
}

struct EngineRun {
  const Marketplace& market;
  const TreatmentSpec& treatment;
  // Per-member arm (member-side plans), per-campaign arm (campaign-side
  // plans), or a per-tick schedule (switchback). Unused vectors stay empty.
  std::vector<int> member_arms;
  std::vector<int> campaign_arms;
  std::vector<int> schedule;

  DeliveryResult run() const {
    validate(market);
    const int n = market.n_members();
    const int m = market.n_campaigns();
    const int horizon = market.horizon;
    const double lift = treatment.multiplier - 1.0;

    std::vector<double> tick_level;
    if (!schedule.empty()) tick_level = treatment_levels(schedule, treatment.carryover);

    DeliveryResult result;
    result.outcomes.n_members = n;
    result.outcomes.n_campaigns = m;

    std::vector<std::int64_t> delivered(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0);
    std::vector<std::int64_t> revenue(delivered.size(), 0);
    std::vector<Cents> spend(static_cast<std::size_t>(m), 0);
    std::vector<double> rate(static_cast<std::size_t>(m), 0.0);
    std::vector<std::vector<int>> targeting(static_cast<std::size_t>(n));
    for (int j = 0; j < m; ++j) {
      for (int i : market.campaigns[static_cast<std::size_t>(j)].target)
        targeting[static_cast<std::size_t>(i)].push_back(j);
    }

    auto arm_of = [&](int member, int tick, int campaign) -> int {
      if (!member_arms.empty()) return member_arms[static_cast<std::size_t>(member)];
      if (!campaign_arms.empty()) return campaign_arms[static_cast<std::size_t>(campaign)];
      if (!schedule.empty()) return schedule[static_cast<std::size_t>(tick)];
      return 0;
    };
    auto bid_multiplier = [&](int member, int tick, int campaign) -> double {
      if (!schedule.empty()) return 1.0 + lift * tick_level[static_cast<std::size_t>(tick)];
      return arm_of(member, tick, campaign) == 1 ? treatment.multiplier : 1.0;
    };

    for (int tick = 0; tick < horizon; ++tick) {
      for (int j = 0; j < m; ++j) {
        const auto& c = market.campaigns[static_cast<std::size_t>(j)];
        rate[static_cast<std::size_t>(j)] = pacing_step(
            tick == 0 ? c.params.pacing_initial_rate : rate[static_cast<std::size_t>(j)],
            spend[static_cast<std::size_t>(j)], c.budget, tick, horizon, c.params);
      }
      std::int64_t tick_delivered = 0;
      std::int64_t tick_revenue = 0;
      for (int i = 0; i < n; ++i) {
        const auto& member = market.members[static_cast<std::size_t>(i)];
        int requests;
        if (market.fixed_requests) {
          requests = static_cast<int>(std::llround(member.request_rate));
        } else {
          Rng req_rng(derive_seed(market.seed, "requests", static_cast<std::uint64_t>(i),
                                  static_cast<std::uint64_t>(tick)));
          requests = static_cast<int>(req_rng.poisson(member.request_rate));
        }
        for (int slot = 0; slot < requests; ++slot) {
          const AdRequest request{i, tick, slot};
          Rng gate_rng(derive_seed(market.seed, "gate", static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(tick),
                                   static_cast<std::uint64_t>(slot)));
          std::vector<CampaignBidState> eligible;
          for (int j : targeting[static_cast<std::size_t>(i)]) {
            // One draw per targeting campaign, consumed unconditionally so
            // the stream stays aligned across counterfactual assignments.
            const double u = gate_rng.next_double();
            const auto& c = market.campaigns[static_cast<std::size_t>(j)];
            if (!is_unlimited(c.budget) && spend[static_cast<std::size_t>(j)] >= c.budget)
              continue;
            const double mult = bid_multiplier(i, tick, j);
            const double bid =
                static_cast<double>(c.params.value_rate) * member_affinity(member, j) * mult;
            // Value-weighted throttling: when budget pressure pushes the
            // participation rate below 1, relatively valuable requests keep
            // a proportionally larger share of the campaign's auctions.
            double weight = 1.0;
            if (c.params.pacing_selectivity != 0.0 && c.params.value_rate > 0) {
              weight = std::pow(bid / static_cast<double>(c.params.value_rate),
                                c.params.pacing_selectivity);
            }
            const double participation =
                std::min(1.0, rate[static_cast<std::size_t>(j)] * weight);
            if (participation <= 0.0) continue;
            if (participation < 1.0 && u >= participation) continue;
            eligible.push_back({j, bid});
          }
          const AuctionResult auction = run_auction(request, eligible, market.mechanism,
                                                    market.reserve_price, market.seed);
          if (!auction.has_winner) continue;
          const int j = auction.winner;
          const auto& c = market.campaigns[static_cast<std::size_t>(j)];
          const double win_bid =
              static_cast<double>(c.params.value_rate) * member_affinity(member, j) *
              bid_multiplier(i, tick, j);
          const Cents value = std::llround(win_bid);
          Cents charge = std::llround(auction.price);
          if (!is_unlimited(c.budget)) {
            // Revenue is capped at the remaining budget; the delivered value
            // of the final impression may overshoot (over-delivery).
            charge = std::min(charge, c.budget - spend[static_cast<std::size_t>(j)]);
          }
          const std::size_t cell =
              static_cast<std::size_t>(i) * static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
          delivered[cell] += value;
          revenue[cell] += charge;
          spend[static_cast<std::size_t>(j)] += charge;
          tick_delivered += value;
          tick_revenue += charge;
          result.tracker.record(c.id, arm_of(i, tick, j), charge);
        }
      }
      if (!schedule.empty()) {
        result.period_totals.push_back({tick, schedule[static_cast<std::size_t>(tick)],
                                        static_cast<double>(tick_delivered),
                                        static_cast<double>(tick_revenue)});
      }
    }

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const std::size_t cell =
            static_cast<std::size_t>(i) * static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
        if (delivered[cell] == 0 && revenue[cell] == 0) continue;
        // Switchback rows have no single arm; per-period arms live in
        // period_totals.
        const int arm = schedule.empty() ? arm_of(i, 0, j) : 0;
        result.outcomes.cells.push_back({i, j, arm,
                                         static_cast<double>(delivered[cell]),
                                         static_cast<double>(revenue[cell])});
      }
    }
    // Hard outcome constraints are checked after every run: revenue within
    // delivered value per cell, campaign revenue within budget.
    std::vector<Cents> budgets;
    for (const auto& c : market.campaigns) budgets.push_back(c.budget);
    if (count_invariant_violations(result.outcomes, budgets) != 0)
      throw std::logic_error("engine produced an outcome constraint violation");
    return result;
  }
};

}  // namespace detail

// Simulates one marketplace with every member pinned to `arm`; the building
// block for ground-truth worlds and budget-split buckets.
inline DeliveryResult simulate_uniform(const Marketplace& market, int arm,
                                       const TreatmentSpec& treatment) {
  detail::EngineRun run{market, treatment, std::vector<int>(
      static_cast<std::size_t>(market.n_members()), arm), {}, {}};
  return run.run();
}

// Budget-split delivery: two isolated sub-marketplaces (split budgets, split
// members, per-clone pacing). Nothing is shared between the buckets, so
// limited-interference isolation holds by construction. Per-bucket outcomes
// are reported in parent coordinates (original member ids, parent campaign
// ids, parent dimensions).
struct BudgetSplitDelivery {
  OutcomeMatrix bucket[2];
  TrackerState tracker[2];
};

inline BudgetSplitDelivery run_budget_split_delivery(const Marketplace& market,
                                                     const AssignmentPlan& plan,
                                                     const TreatmentSpec& treatment) {
  if (static_cast<int>(plan.bucket_d.size()) != market.n_members())
    throw ConfigError("assignment has wrong member dimension");
  const SplitMarketplace split = split_marketplace(market, plan.bucket_d);
  BudgetSplitDelivery out;
  for (int l = 0; l < 2; ++l) {
    out.bucket[l].n_members = market.n_members();
    out.bucket[l].n_campaigns = market.n_campaigns();
    const int arm = l == 1 ? plan.coin : 1 - plan.coin;
    Marketplace bucket = split.bucket[l];
    if (bucket.members.empty() || bucket.campaigns.empty()) continue;
    bucket.seed = derive_seed(market.seed, "bucket", static_cast<std::uint64_t>(l));
    const DeliveryResult sub = simulate_uniform(bucket, arm, treatment);
    for (const auto& cell : sub.outcomes.cells) {
      OutcomeMatrix::Cell c = cell;
      c.member = split.member_map[l][static_cast<std::size_t>(cell.member)];
      c.campaign = bucket.campaigns[static_cast<std::size_t>(cell.campaign)].id;
      out.bucket[l].cells.push_back(c);
    }
    out.bucket[l].sort_cells();
    out.tracker[l] = sub.tracker;
  }
  return out;
}

// Full delivery simulation under an assignment plan.
inline DeliveryResult run_delivery(const Marketplace& market, const AssignmentPlan& plan,
                                   const TreatmentSpec& treatment) {
  validate(plan);
  switch (plan.kind) {
    case DesignKind::kMemberCr: {
      if (static_cast<int>(plan.member_w.size()) != market.n_members())
        throw ConfigError("assignment has wrong member dimension");
      detail::EngineRun run{market, treatment, plan.member_w, {}, {}};
      return run.run();
    }
    case DesignKind::kCampaignCr: {
      if (static_cast<int>(plan.campaign_w.size()) != market.n_campaigns())
        throw ConfigError("assignment has wrong campaign dimension");
      TreatmentSpec t = treatment;
      t.side = TreatmentSpec::Side::kCampaign;
      detail::EngineRun run{market, t, {}, plan.campaign_w, {}};
      return run.run();
    }
    case DesignKind::kSwitchback: {
      if (static_cast<int>(plan.schedule.size()) != market.horizon)
        throw ConfigError("switchback schedule length must equal the horizon");
      detail::EngineRun run{market, treatment, {}, {}, plan.schedule};
      return run.run();
    }
    case DesignKind::kBudgetSplit: {
      const BudgetSplitDelivery split = run_budget_split_delivery(market, plan, treatment);
      DeliveryResult merged;
      merged.outcomes.n_members = market.n_members();
      merged.outcomes.n_campaigns = market.n_campaigns();
      for (int l = 0; l < 2; ++l) {
        for (const auto& cell : split.bucket[l].cells) merged.outcomes.cells.push_back(cell);
        for (const auto& [key, value] : split.tracker[l].spend) merged.tracker.spend[key] += value;
        for (const auto& [key, value] : split.tracker[l].impressions)
          merged.tracker.impressions[key] += value;
      }
      merged.outcomes.sort_cells();
      return merged;
    }
  }
  throw ValidationError("unknown design kind");
}

inline OutcomeMatrix simulate_delivery(const Marketplace& market, const AssignmentPlan& plan,
                                       const TreatmentSpec& treatment) {
  return run_delivery(market, plan, treatment).outcomes;
}

inline std::vector<Cents> campaign_budgets(const Marketplace& market) {
  std::vector<Cents> budgets;
  budgets.reserve(market.campaigns.size());
  for (const auto& c : market.campaigns) budgets.push_back(c.budget);
  return budgets;
}

}  // namespace mktsim
