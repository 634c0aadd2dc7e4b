#pragma once

#include <cstdint>
#include <limits>

namespace mktsim {

// All budgets and charged amounts are integer cents so conservation laws can
// be tested with equality.
using Cents = std::int64_t;

// Sentinel for an unlimited budget: disables the pacing stop and the revenue
// cap for that campaign.
inline constexpr Cents kUnlimitedBudget = std::numeric_limits<Cents>::max();

inline constexpr bool is_unlimited(Cents b) { return b == kUnlimitedBudget; }

// Bucket-0 share of a proportional budget split, rounded down; the partner
// bucket receives the remainder, so the two shares always sum exactly.
inline constexpr Cents proportional_share(Cents budget, std::int64_t part, std::int64_t whole) {
  if (is_unlimited(budget)) return kUnlimitedBudget;
  return static_cast<Cents>((static_cast<__int128>(budget) * part) / whole);
}

}  // namespace mktsim
