#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mktsim/errors.hpp"
#include "mktsim/rng.hpp"

namespace mktsim {

enum class DesignKind { kMemberCr, kCampaignCr, kSwitchback, kBudgetSplit };

inline const char* design_name(DesignKind k) {
  switch (k) {
    case DesignKind::kMemberCr: return "member-cr";
    case DesignKind::kCampaignCr: return "campaign-cr";
    case DesignKind::kSwitchback: return "switchback";
    case DesignKind::kBudgetSplit: return "budget-split";
  }
  return "?";
}

// Output of a randomization: exactly the fields required by `kind` are
// populated. All generators are pure functions of (parameters, seed).
struct AssignmentPlan {
  DesignKind kind = DesignKind::kMemberCr;
  std::vector<int> member_w;    // member-cr: length N, exactly N1 ones
  std::vector<int> campaign_w;  // campaign-cr: length M, exactly M1 ones
  std::vector<int> schedule;    // switchback: length T
  std::vector<int> bucket_d;    // budget-split: length N, half split
  int coin = 0;                 // budget-split: arm of bucket 1
  std::uint64_t seed = 0;

  int treated_count(const std::vector<int>& v) const {
    return std::accumulate(v.begin(), v.end(), 0);
  }
};

inline void validate(const AssignmentPlan& p) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
  };
  const bool has_member = !p.member_w.empty();
  const bool has_campaign = !p.campaign_w.empty();
  const bool has_schedule = !p.schedule.empty();
  const bool has_bucket = !p.bucket_d.empty();
  switch (p.kind) {
    case DesignKind::kMemberCr:
      require(has_member && !has_campaign && !has_schedule && !has_bucket,
              "member-cr plan must carry exactly the member vector");
      break;
    case DesignKind::kCampaignCr:
      require(has_campaign && !has_member && !has_schedule && !has_bucket,
              "campaign-cr plan must carry exactly the campaign vector");
      break;
    case DesignKind::kSwitchback:
      require(has_schedule && !has_member && !has_campaign && !has_bucket,
              "switchback plan must carry exactly the schedule");
      break;
    case DesignKind::kBudgetSplit: {
      require(has_bucket && !has_member && !has_campaign && !has_schedule,
              "budget-split plan must carry exactly the bucket vector");
      const int n = static_cast<int>(p.bucket_d.size());
      int ones = 0;
      for (int d : p.bucket_d) {
        require(d == 0 || d == 1, "bucket entries must be 0 or 1");
        ones += d;
      }
      require(ones == n / 2 || ones == (n + 1) / 2, "budget-split must be a half split");
      require(p.coin == 0 || p.coin == 1, "coin must be 0 or 1");
      break;
    }
  }
}

namespace detail {

// Uniform 0/1 vector with exactly k ones, via partial Fisher-Yates.
inline std::vector<int> completely_randomized(int n, int k, Rng& rng) {
  std::vector<int> w(static_cast<std::size_t>(n), 0);
  for (int i : sample_indices(n, k, rng)) w[static_cast<std::size_t>(i)] = 1;
  return w;
}

}  // namespace detail

// Member-level completely randomized design: uniform over all length-N
// vectors with exactly N1 ones.
inline AssignmentPlan member_cr(int n, int n1, std::uint64_t seed) {
  if (n < 1 || n1 < 1 || n1 > n) throw ValidationError("member-cr requires 1 <= N1 <= N");
  Rng rng(derive_seed(seed, "design.member-cr"));
  AssignmentPlan p;
  p.kind = DesignKind::kMemberCr;
  p.seed = seed;
  p.member_w = detail::completely_randomized(n, n1, rng);
  return p;
}

inline AssignmentPlan campaign_cr(int m, int m1, std::uint64_t seed) {
  if (m < 1 || m1 < 1 || m1 > m) throw ValidationError("campaign-cr requires 1 <= M1 <= M");
  Rng rng(derive_seed(seed, "design.campaign-cr"));
  AssignmentPlan p;
  p.kind = DesignKind::kCampaignCr;
  p.seed = seed;
  p.campaign_w = detail::completely_randomized(m, m1, rng);
  return p;
}

// Whole-marketplace randomization over T time periods. Balanced schedules
// carry exactly floor(T/2) or ceil(T/2) treated periods (a seeded coin picks
// the count for odd T); unbalanced schedules are i.i.d. Bernoulli(0.5).
inline AssignmentPlan switchback(int periods, std::uint64_t seed, bool balanced = true) {
  if (periods < 2) throw ValidationError("switchback requires at least 2 periods");
  Rng rng(derive_seed(seed, "design.switchback"));
  AssignmentPlan p;
  p.kind = DesignKind::kSwitchback;
  p.seed = seed;
  if (balanced) {
    int treated = periods / 2;
    if (periods % 2 == 1 && rng.bernoulli(0.5)) treated = periods - treated;
    p.schedule = detail::completely_randomized(periods, treated, rng);
  } else {
    p.schedule.resize(static_cast<std::size_t>(periods));
    for (auto& s : p.schedule) s = rng.bernoulli(0.5) ? 1 : 0;
  }
  return p;
}

// Budget-split randomization: a uniform half split of members into buckets
// plus an independent Bernoulli(p) coin naming the treated bucket. The
// unbiasedness guarantee covers p = 0.5 with an even split; other settings
// are allowed for exploration. Odd N places the extra member in bucket 1.
inline AssignmentPlan budget_split(int n, double p, std::uint64_t seed) {
  if (n < 2) throw ValidationError("budget-split requires at least 2 members");
  if (p < 0.0 || p > 1.0) throw ValidationError("bucket treatment probability must be in [0,1]");
  Rng rng(derive_seed(seed, "design.budget-split"));
  AssignmentPlan plan;
  plan.kind = DesignKind::kBudgetSplit;
  plan.seed = seed;
  plan.bucket_d = detail::completely_randomized(n, (n + 1) / 2, rng);
  plan.coin = rng.bernoulli(p) ? 1 : 0;
  return plan;
}

// Arm that a member-side unit ends up in, for plans that define one.
inline int member_arm(const AssignmentPlan& p, int member) {
  switch (p.kind) {
    case DesignKind::kMemberCr: return p.member_w[static_cast<std::size_t>(member)];
    case DesignKind::kBudgetSplit: {
      const int l = p.bucket_d[static_cast<std::size_t>(member)];
      return l == 1 ? p.coin : 1 - p.coin;
    }
    default: return 0;
  }
}

}  // namespace mktsim
