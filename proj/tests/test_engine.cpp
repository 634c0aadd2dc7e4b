#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <vector>

#include "mktsim/engine.hpp"
#include "mktsim/models.hpp"

using namespace mktsim;

namespace {

Marketplace single_campaign_market(int members, Cents budget, Cents value_rate, Cents reserve,
                                   double rate0, int horizon, double request_rate,
                                   std::uint64_t seed) {
  Marketplace market;
  market.horizon = horizon;
  market.seed = seed;
  market.reserve_price = reserve;
  Campaign c;
  c.id = 0;
  c.budget = budget;
  c.params.value_rate = value_rate;
  c.params.pacing_initial_rate = rate0;
  for (int i = 0; i < members; ++i) {
    MemberProfile m;
    m.id = i;
    m.request_rate = request_rate;
    market.members.push_back(m);
    c.target.push_back(i);
  }
  market.campaigns.push_back(c);
  return market;
}

}  // namespace

TEST_CASE("second-price auction basics") {
  const AdRequest request{0, 0, 0};
  SECTION("highest bidder pays second price") {
    const std::vector<CampaignBidState> bids{{0, 10.0}, {1, 6.0}, {2, 4.0}};
    const AuctionResult r = run_auction(request, bids, AuctionMechanism::kSecondPrice, 0, 1);
    REQUIRE(r.has_winner);
    CHECK(r.winner == 0);
    CHECK(r.price == 6.0);
  }
  SECTION("single bidder pays the reserve") {
    const std::vector<CampaignBidState> bids{{0, 10.0}};
    const AuctionResult r = run_auction(request, bids, AuctionMechanism::kSecondPrice, 1, 1);
    REQUIRE(r.has_winner);
    CHECK(r.price == 1.0);
  }
  SECTION("empty field is a no-winner result") {
    const AuctionResult r = run_auction(request, {}, AuctionMechanism::kSecondPrice, 0, 1);
    CHECK_FALSE(r.has_winner);
  }
  SECTION("bids below reserve are excluded") {
    const std::vector<CampaignBidState> bids{{0, 10.0}, {1, 3.0}};
    const AuctionResult r = run_auction(request, bids, AuctionMechanism::kSecondPrice, 5, 1);
    REQUIRE(r.has_winner);
    CHECK(r.winner == 0);
    CHECK(r.price == 5.0);  // the 3.0 bid never entered
  }
  SECTION("three-way tie goes to the lowest campaign id, any seed") {
    const std::vector<CampaignBidState> bids{{2, 7.0}, {0, 7.0}, {1, 7.0}};
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
      const AuctionResult r = run_auction(request, bids, AuctionMechanism::kSecondPrice, 0, seed);
      REQUIRE(r.has_winner);
      CHECK(r.winner == 0);
      CHECK(r.price == 7.0);
    }
  }
  SECTION("first-price variant charges the winning bid") {
    const std::vector<CampaignBidState> bids{{0, 10.0}, {1, 6.0}};
    const AuctionResult r = run_auction(request, bids, AuctionMechanism::kFirstPrice, 0, 1);
    CHECK(r.price == 10.0);
  }
}

TEST_CASE("pacing controller") {
  CampaignParams params;  // rate0 = 1.0, step = 0.1

  SECTION("budget exhausted means stop") {
    CHECK(pacing_step(0.7, 1000, 1000, 5, 10, params) == 0.0);
    CHECK(pacing_step(0.7, 1200, 1000, 5, 10, params) == 0.0);
  }
  SECTION("nothing spent at tick zero gives the initial rate") {
    CHECK(pacing_step(0.5, 0, 1000, 0, 10, params) == 1.0);
    params.pacing_initial_rate = 0.25;
    CHECK(pacing_step(0.5, 0, 1000, 0, 10, params) == 0.25);
  }
  SECTION("tracking the linear schedule exactly holds the rate in the step band") {
    const Cents budget = 1000;
    const int horizon = 10;
    double rate = params.pacing_initial_rate;
    for (int tick = 1; tick < horizon; ++tick) {
      const Cents on_schedule = budget * tick / horizon;  // exact: 100 * tick
      rate = pacing_step(rate, on_schedule, budget, tick, horizon, params);
      CHECK(rate >= params.pacing_initial_rate * (1.0 - params.pacing_step));
      CHECK(rate <= params.pacing_initial_rate * (1.0 + params.pacing_step));
    }
  }
  SECTION("behind schedule speeds up, ahead slows down") {
    CHECK(pacing_step(0.5, 10, 1000, 5, 10, params) == Catch::Approx(0.55));
    CHECK(pacing_step(0.5, 900, 1000, 5, 10, params) == Catch::Approx(0.45));
  }
  SECTION("unlimited budget never throttles") {
    CHECK(pacing_step(0.1, 999999, kUnlimitedBudget, 5, 10, params) == 1.0);
  }
}

TEST_CASE("split_marketplace budget arithmetic") {
  Marketplace market = single_campaign_market(10, 100, 100, 0, 1.0, 1, 1.0, 1);

  SECTION("even split halves the budget") {
    Marketplace big = single_campaign_market(1000, 100, 100, 0, 1.0, 1, 1.0, 1);
    std::vector<int> d(1000, 0);
    for (int i = 500; i < 1000; ++i) d[static_cast<std::size_t>(i)] = 1;
    const SplitMarketplace split = split_marketplace(big, d);
    CHECK(split.bucket[0].campaigns[0].budget == 50);
    CHECK(split.bucket[1].campaigns[0].budget == 50);
  }
  SECTION("uneven split follows bucket sizes: 3 of 10 members -> 30/70") {
    std::vector<int> d(10, 1);
    d[0] = d[1] = d[2] = 0;
    const SplitMarketplace split = split_marketplace(market, d);
    CHECK(split.bucket[0].campaigns[0].budget == 30);
    CHECK(split.bucket[1].campaigns[0].budget == 70);
  }
  SECTION("zero budget splits to zeros") {
    market.campaigns[0].budget = 0;
    std::vector<int> d(10, 0);
    for (int i = 5; i < 10; ++i) d[static_cast<std::size_t>(i)] = 1;
    const SplitMarketplace split = split_marketplace(market, d);
    CHECK(split.bucket[0].campaigns[0].budget == 0);
    CHECK(split.bucket[1].campaigns[0].budget == 0);
  }
  SECTION("odd cent goes to bucket 1 and the sum is exact") {
    market.campaigns[0].budget = 101;
    std::vector<int> d(10, 0);
    for (int i = 5; i < 10; ++i) d[static_cast<std::size_t>(i)] = 1;
    const SplitMarketplace split = split_marketplace(market, d);
    CHECK(split.bucket[0].campaigns[0].budget == 50);
    CHECK(split.bucket[1].campaigns[0].budget == 51);
  }
  SECTION("conservation and target partition hold for random splits") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      Marketplace m = single_campaign_market(
          7, static_cast<Cents>(rng.bounded(100000)), 100, 0, 1.0, 1, 1.0, 1);
      std::vector<int> d(7);
      for (auto& x : d) x = rng.bernoulli(0.5) ? 1 : 0;
      if (std::count(d.begin(), d.end(), 0) == 7 || std::count(d.begin(), d.end(), 1) == 7)
        continue;
      const SplitMarketplace split = split_marketplace(m, d);
      CHECK(split.bucket[0].campaigns[0].budget + split.bucket[1].campaigns[0].budget ==
            m.campaigns[0].budget);
      CHECK(split.bucket[0].n_members() + split.bucket[1].n_members() == 7);
      CHECK(split.bucket[0].campaigns[0].target.size() +
                split.bucket[1].campaigns[0].target.size() ==
            7);
    }
  }
  SECTION("length mismatch is rejected") {
    std::vector<int> d(9, 0);
    CHECK_THROWS_AS(split_marketplace(market, d), ValidationError);
  }
}

TEST_CASE("hand-traced two-campaign delivery") {
  // Deterministic setup (fixed requests, full participation): every number
  // below is traced by hand through the tick loop.
  //   members 0..3, affinity 1.0/1.1/1.2/1.3, one request per tick
  //   C0: rate 1000, budget 2500, targets all; C1: rate 900, budget 2000,
  //   targets {1,2}; reserve 500, second price, 2 ticks, no-op treatment.
  Marketplace market;
  market.horizon = 2;
  market.seed = 42;
  market.reserve_price = 500;
  market.fixed_requests = true;
  for (int i = 0; i < 4; ++i) {
    MemberProfile m;
    m.id = i;
    m.request_rate = 1.0;
    m.affinity = {1.0 + 0.1 * i};
    market.members.push_back(m);
  }
  Campaign c0;
  c0.id = 0;
  c0.budget = 2500;
  c0.params.value_rate = 1000;
  c0.target = {0, 1, 2, 3};
  Campaign c1;
  c1.id = 1;
  c1.budget = 2000;
  c1.params.value_rate = 900;
  c1.target = {1, 2};
  market.campaigns = {c0, c1};

  AssignmentPlan plan;
  plan.kind = DesignKind::kMemberCr;
  plan.member_w = {1, 0, 0, 1};
  TreatmentSpec treatment;  // multiplier 1.0: treatment is a no-op

  const DeliveryResult run = run_delivery(market, plan, treatment);
  const auto& cells = run.outcomes.cells;
  // Trace: tick 0: m0 -> C0 at reserve 500; m1 -> C0 beats C1, pays 990;
  // m2 -> C0 pays min(1080, remaining 1010); C0 exhausted. tick 1: C1 alone
  // takes m1 and m2 at the reserve.
  REQUIRE(cells.size() == 5);
  const std::vector<OutcomeMatrix::Cell> expected = {
      {0, 0, 1, 1000.0, 500.0},  {1, 0, 0, 1100.0, 990.0}, {1, 1, 0, 990.0, 500.0},
      {2, 0, 0, 1200.0, 1010.0}, {2, 1, 0, 1080.0, 500.0},
  };
  for (std::size_t k = 0; k < expected.size(); ++k) {
    CHECK(cells[k].member == expected[k].member);
    CHECK(cells[k].campaign == expected[k].campaign);
    CHECK(cells[k].arm == expected[k].arm);
    CHECK(cells[k].delivered == expected[k].delivered);
    CHECK(cells[k].revenue == expected[k].revenue);
  }
  CHECK(run.tracker.campaign_spend(0) == 2500);
  CHECK(run.tracker.campaign_spend(1) == 1000);
  CHECK(count_invariant_violations(run.outcomes, campaign_budgets(market)) == 0);
}

TEST_CASE("full-budget scenario charges exactly the budget") {
  // One buyer, value 2000 cents per impression at a 2000-cent reserve,
  // budget 10000: exactly five impressions are charged.
  Marketplace market = single_campaign_market(20, 10000, 2000, 2000, 0.15, 30, 1.0, 7);
  const DeliveryResult run = simulate_uniform(market, 0, TreatmentSpec{});
  CHECK(run.outcomes.total(Estimand::kRevenue) == 10000.0);
  CHECK(count_invariant_violations(run.outcomes, campaign_budgets(market)) == 0);
}

TEST_CASE("zero budgets produce an all-zero outcome matrix") {
  Marketplace market = single_campaign_market(5, 0, 1000, 0, 1.0, 5, 2.0, 3);
  const OutcomeMatrix out = simulate_uniform(market, 0, TreatmentSpec{}).outcomes;
  CHECK(out.cells.empty());
  CHECK(out.total(Estimand::kDelivered) == 0.0);
}

TEST_CASE("runs are deterministic given the seed") {
  Marketplace market = single_campaign_market(8, 5000, 700, 100, 0.8, 12, 1.5, 11);
  AssignmentPlan plan = member_cr(8, 4, 99);
  TreatmentSpec treatment;
  treatment.multiplier = 1.3;
  const DeliveryResult a = run_delivery(market, plan, treatment);
  const DeliveryResult b = run_delivery(market, plan, treatment);
  REQUIRE(a.outcomes.cells.size() == b.outcomes.cells.size());
  for (std::size_t k = 0; k < a.outcomes.cells.size(); ++k) {
    CHECK(a.outcomes.cells[k].delivered == b.outcomes.cells[k].delivered);
    CHECK(a.outcomes.cells[k].revenue == b.outcomes.cells[k].revenue);
  }
}

TEST_CASE("budget-split buckets are isolated") {
  Marketplace market = single_campaign_market(10, 8000, 900, 100, 0.5, 10, 1.2, 21);
  market.campaigns[0].params.pacing_selectivity = 1.0;
  AssignmentPlan plan = budget_split(10, 0.5, 5);
  TreatmentSpec treatment;
  treatment.multiplier = 1.4;

  const BudgetSplitDelivery base = run_budget_split_delivery(market, plan, treatment);

  // Differential run: perturb a bucket-0 member's profile; bucket 1 must not
  // move at all.
  Marketplace perturbed = market;
  for (int i = 0; i < 10; ++i) {
    if (plan.bucket_d[static_cast<std::size_t>(i)] == 0) {
      perturbed.members[static_cast<std::size_t>(i)].affinity = {9.0};
      perturbed.members[static_cast<std::size_t>(i)].request_rate = 4.0;
      break;
    }
  }
  const BudgetSplitDelivery alt = run_budget_split_delivery(perturbed, plan, treatment);
  REQUIRE(alt.bucket[1].cells.size() == base.bucket[1].cells.size());
  for (std::size_t k = 0; k < base.bucket[1].cells.size(); ++k) {
    CHECK(alt.bucket[1].cells[k].member == base.bucket[1].cells[k].member);
    CHECK(alt.bucket[1].cells[k].delivered == base.bucket[1].cells[k].delivered);
    CHECK(alt.bucket[1].cells[k].revenue == base.bucket[1].cells[k].revenue);
  }
}

TEST_CASE("engine invariants hold across randomized marketplaces") {
  Rng scenario_rng(4242);
  for (int trial = 0; trial < 150; ++trial) {
    Marketplace market;
    const int n = 2 + static_cast<int>(scenario_rng.bounded(8));
    const int m = 1 + static_cast<int>(scenario_rng.bounded(3));
    market.horizon = 2 + static_cast<int>(scenario_rng.bounded(8));
    market.seed = scenario_rng.next_u64();
    market.reserve_price = static_cast<Cents>(scenario_rng.bounded(300));
    for (int i = 0; i < n; ++i) {
      MemberProfile member;
      member.id = i;
      member.request_rate = scenario_rng.next_double() * 2.0;
      member.affinity = {0.2 + scenario_rng.next_double()};
      market.members.push_back(member);
    }
    for (int j = 0; j < m; ++j) {
      Campaign c;
      c.id = j;
      const auto kind = scenario_rng.bounded(4);
      c.budget = kind == 0 ? 0
                 : kind == 1 ? kUnlimitedBudget
                             : static_cast<Cents>(scenario_rng.bounded(20000));
      c.params.value_rate = 100 + static_cast<Cents>(scenario_rng.bounded(2000));
      c.params.pacing_initial_rate = 0.1 + 0.9 * scenario_rng.next_double();
      for (int i = 0; i < n; ++i)
        if (scenario_rng.bernoulli(0.7)) c.target.push_back(i);
      if (c.target.empty()) c.target.push_back(0);
      market.campaigns.push_back(c);
    }
    TreatmentSpec treatment;
    treatment.multiplier = 0.5 + scenario_rng.next_double();
    AssignmentPlan plan;
    switch (scenario_rng.bounded(3)) {
      case 0: plan = member_cr(n, 1 + static_cast<int>(scenario_rng.bounded(n)), trial); break;
      case 1: plan = budget_split(n, 0.5, trial); break;
      default: plan = switchback(market.horizon, trial); break;
    }
    const DeliveryResult run = run_delivery(market, plan, treatment);
    CHECK(count_invariant_violations(run.outcomes, campaign_budgets(market)) == 0);
  }
}
