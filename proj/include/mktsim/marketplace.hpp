#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mktsim/errors.hpp"
#include "mktsim/money.hpp"

namespace mktsim {

struct MemberProfile {
  int id = 0;
  double request_rate = 1.0;           // expected ad requests per tick
  std::vector<double> affinity;        // per-campaign multiplicative value weight
};

// Per-campaign behavior knobs: bidding value and pacing controller gains.
struct CampaignParams {
  Cents value_rate = 100;              // advertiser value per impression at affinity 1
  double pacing_initial_rate = 1.0;    // participation rate at flight start
  double pacing_step = 0.1;            // multiplicative feedback step
  double pacing_selectivity = 1.0;     // 0: value-blind throttling; 1: linear value weighting
};

struct Campaign {
  int id = 0;
  Cents budget = kUnlimitedBudget;
  std::vector<int> target;             // sorted member indices
  CampaignParams params;
};

enum class AuctionMechanism { kSecondPrice, kFirstPrice };

// What the experiment actually changes. A member-side treatment scales the
// value of impressions on treated members (e.g. better ranking); a
// campaign-side treatment scales a treated campaign's bids.
struct TreatmentSpec {
  enum class Side { kMember, kCampaign };
  Side side = Side::kMember;
  double multiplier = 1.0;
  // Fraction of the previous period's treatment level that lingers into the
  // next period in switchback runs. 0 = clean periods.
  double carryover = 0.0;
};

struct Marketplace {
  std::vector<MemberProfile> members;
  std::vector<Campaign> campaigns;
  int horizon = 1;                     // simulation ticks
  std::uint64_t seed = 0;
  AuctionMechanism mechanism = AuctionMechanism::kSecondPrice;
  Cents reserve_price = 0;
  // When set, each member issues exactly round(request_rate) requests per
  // tick instead of a Poisson draw; used by the exact-arithmetic checks.
  bool fixed_requests = false;

  int n_members() const { return static_cast<int>(members.size()); }
  int n_campaigns() const { return static_cast<int>(campaigns.size()); }
};

inline void validate(const Marketplace& m) {
  if (m.members.empty()) throw ValidationError("marketplace needs at least one member");
  if (m.campaigns.empty()) throw ValidationError("marketplace needs at least one campaign");
  if (m.horizon < 1) throw ValidationError("horizon must be positive");
  for (const auto& member : m.members) {
    if (member.request_rate < 0.0) throw ValidationError("negative request rate");
    for (double a : member.affinity) {
      if (a < 0.0) throw ValidationError("negative affinity");
    }
  }
  for (const auto& c : m.campaigns) {
    if (c.budget < 0) throw ValidationError("negative budget");
    if (c.target.empty()) throw ValidationError("campaign target set is empty");
    for (int i : c.target) {
      if (i < 0 || i >= m.n_members())
        throw ValidationError("campaign targets out-of-range member " + std::to_string(i));
    }
  }
}

inline double member_affinity(const MemberProfile& member, int campaign_index) {
  if (member.affinity.empty()) return 1.0;
  if (campaign_index < static_cast<int>(member.affinity.size()))
    return member.affinity[static_cast<std::size_t>(campaign_index)];
  return member.affinity.back();
}

// Splits a marketplace along a member bucket vector d into two isolated
// marketplaces. Campaign clones keep the parent id and parameters; budgets
// are divided proportionally to bucket sizes with any odd cent assigned to
// bucket 1, so the two budgets always sum exactly to the original. Member
// indices are renumbered within each bucket; `member_map` recovers the
// original ids.
struct SplitMarketplace {
  Marketplace bucket[2];
  std::vector<int> member_map[2];      // local index -> original member index
};

inline SplitMarketplace split_marketplace(const Marketplace& parent,
                                          const std::vector<int>& bucket_of) {
  if (static_cast<int>(bucket_of.size()) != parent.n_members())
    throw ValidationError("bucket vector length does not match member count");
  SplitMarketplace out;
  std::vector<int> local(bucket_of.size(), -1);
  for (int i = 0; i < parent.n_members(); ++i) {
    const int l = bucket_of[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) throw ValidationError("bucket vector entries must be 0 or 1");
    auto& mp = out.bucket[l];
    local[static_cast<std::size_t>(i)] = mp.n_members();
    MemberProfile copy = parent.members[static_cast<std::size_t>(i)];
    copy.id = mp.n_members();
    mp.members.push_back(std::move(copy));
    out.member_map[l].push_back(i);
  }
  const std::int64_t n = parent.n_members();
  const std::int64_t n0 = out.bucket[0].n_members();
  for (int l = 0; l < 2; ++l) {
    auto& mp = out.bucket[l];
    mp.horizon = parent.horizon;
    mp.mechanism = parent.mechanism;
    mp.reserve_price = parent.reserve_price;
    mp.fixed_requests = parent.fixed_requests;
    // Sub-runs draw from streams keyed by the bucket index so that editing
    // one bucket can never perturb the other.
    mp.seed = parent.seed;
    for (const auto& c : parent.campaigns) {
      Campaign clone;
      clone.id = c.id;
      clone.params = c.params;
      const Cents share0 = proportional_share(c.budget, n0, n);
      clone.budget = is_unlimited(c.budget) ? kUnlimitedBudget
                                            : (l == 0 ? share0 : c.budget - share0);
      for (int i : c.target) {
        if (bucket_of[static_cast<std::size_t>(i)] == l)
          clone.target.push_back(local[static_cast<std::size_t>(i)]);
      }
      if (!clone.target.empty()) mp.campaigns.push_back(std::move(clone));
    }
  }
  return out;
}

}  // namespace mktsim
