#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "mktsim/assignment.hpp"
#include "mktsim/csv.hpp"
#include "mktsim/errors.hpp"
#include "mktsim/outcomes.hpp"
#include "mktsim/rng.hpp"
#include "mktsim/stats.hpp"

namespace mktsim {

struct EstimateReport {
  Estimand estimand = Estimand::kDelivered;
  double total_estimate = 0.0;
  std::vector<std::pair<int, double>> per_campaign;  // (campaign id, estimate)
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
};

// Welch two-sample t-test on unit totals; the analysis attached to every
// design except switchback.
inline TTestResult two_sample_t_test(std::span<const double> treat,
                                     std::span<const double> control) {
  if (treat.size() < 2 || control.size() < 2)
    throw UndefinedContrastError("t-test needs at least two units per arm");
  return welch_t_test(treat, control);
}

struct PermutationResult {
  double statistic = 0.0;  // observed sum of pair differences
  double p_value = 1.0;
  int n_pairs = 0;
  bool exact = false;
};

// Two-sided paired permutation (sign-flip) test on pair differences. Exact
// enumeration of all 2^K sign patterns for K <= max_exact pairs, Monte Carlo
// otherwise.
inline PermutationResult paired_permutation_test(std::span<const double> diffs,
                                                 std::uint64_t seed, int max_exact = 12,
                                                 int resamples = 100000) {
  if (diffs.empty()) throw UndefinedContrastError("permutation test needs at least one pair");
  PermutationResult r;
  r.n_pairs = static_cast<int>(diffs.size());
  KahanSum obs;
  for (double d : diffs) obs.add(d);
  r.statistic = obs.value();
  const double threshold = std::abs(r.statistic) * (1.0 - 1e-12);
  if (r.n_pairs <= max_exact) {
    r.exact = true;
    const std::uint64_t patterns = 1ULL << r.n_pairs;
    std::uint64_t at_least = 0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      double s = 0.0;
      for (int k = 0; k < r.n_pairs; ++k)
        s += (mask >> k) & 1ULL ? -diffs[static_cast<std::size_t>(k)]
                                : diffs[static_cast<std::size_t>(k)];
      if (std::abs(s) >= threshold) ++at_least;
    }
    r.p_value = static_cast<double>(at_least) / static_cast<double>(patterns);
  } else {
    Rng rng(derive_seed(seed, "permutation"));
    std::int64_t at_least = 0;
    for (int rep = 0; rep < resamples; ++rep) {
      double s = 0.0;
      for (double d : diffs) s += rng.bernoulli(0.5) ? -d : d;
      if (std::abs(s) >= threshold) ++at_least;
    }
    // Add-one correction keeps Monte Carlo p-values valid (never zero).
    r.p_value = static_cast<double>(at_least + 1) / static_cast<double>(resamples + 1);
  }
  return r;
}

namespace detail {

inline std::vector<double> select_totals(const std::vector<double>& totals,
                                         const std::vector<int>& indicator, int want) {
  std::vector<double> out;
  for (std::size_t i = 0; i < indicator.size(); ++i)
    if (indicator[i] == want) out.push_back(totals[i]);
  return out;
}

}  // namespace detail

// Plug-in estimator for member-level completely randomized experiments:
// per campaign, treated totals scaled by N/N1 minus control totals scaled by
// N/N0. Attached test: Welch t on per-member totals.
inline EstimateReport naive_plugin(const OutcomeMatrix& outcomes, const AssignmentPlan& plan,
                                   Estimand estimand) {
  if (plan.kind != DesignKind::kMemberCr)
    throw ValidationError("naive plug-in estimator requires a member-cr plan");
  const int n = static_cast<int>(plan.member_w.size());
  const int n1 = plan.treated_count(plan.member_w);
  const int n0 = n - n1;
  if (n1 == 0 || n0 == 0)
    throw UndefinedContrastError("plug-in estimator needs both arms non-empty");
  EstimateReport report;
  report.estimand = estimand;
  report.method = "member-cr-plugin";
  const double scale1 = static_cast<double>(n) / static_cast<double>(n1);
  const double scale0 = static_cast<double>(n) / static_cast<double>(n0);
  std::vector<KahanSum> treated(static_cast<std::size_t>(outcomes.n_campaigns));
  std::vector<KahanSum> control(static_cast<std::size_t>(outcomes.n_campaigns));
  for (const auto& cell : outcomes.cells) {
    const double y = outcomes.value(cell, estimand);
    if (plan.member_w[static_cast<std::size_t>(cell.member)] == 1)
      treated[static_cast<std::size_t>(cell.campaign)].add(y);
    else
      control[static_cast<std::size_t>(cell.campaign)].add(y);
  }
  KahanSum total;
  for (int j = 0; j < outcomes.n_campaigns; ++j) {
    const double est = scale1 * treated[static_cast<std::size_t>(j)].value() -
                       scale0 * control[static_cast<std::size_t>(j)].value();
    report.per_campaign.emplace_back(j, est);
    total.add(est);
  }
  report.total_estimate = total.value();
  const auto member_totals = outcomes.member_totals(estimand);
  const auto t = detail::select_totals(member_totals, plan.member_w, 1);
  const auto c = detail::select_totals(member_totals, plan.member_w, 0);
  if (t.size() >= 2 && c.size() >= 2) {
    const TTestResult tt = welch_t_test(t, c);
    report.statistic = tt.statistic;
    report.p_value = tt.p_value;
  }
  return report;
}

enum class BudgetSplitUnit { kMember, kCampaign };

// Budget-split estimator: per campaign, the treated bucket clone's total
// scaled by N/N_treated minus the control clone's total scaled by
// N/N_control. The attached test compares per-member totals across buckets
// (member-level experiments) or per-clone campaign totals (campaign-level
// experiments).
inline EstimateReport budget_split_estimator(const OutcomeMatrix& outcomes0,
                                             const OutcomeMatrix& outcomes1,
                                             const AssignmentPlan& plan, Estimand estimand,
                                             BudgetSplitUnit unit = BudgetSplitUnit::kMember) {
  if (plan.kind != DesignKind::kBudgetSplit)
    throw ValidationError("budget-split estimator requires a budget-split plan");
  const int n = static_cast<int>(plan.bucket_d.size());
  const int n_bucket1 = plan.treated_count(plan.bucket_d);
  const int n_bucket0 = n - n_bucket1;
  if (n_bucket0 == 0 || n_bucket1 == 0)
    throw ValidationError("budget-split estimator needs both buckets non-empty");
  const int treated_bucket = plan.coin == 1 ? 1 : 0;
  const OutcomeMatrix& treated = treated_bucket == 1 ? outcomes1 : outcomes0;
  const OutcomeMatrix& control = treated_bucket == 1 ? outcomes0 : outcomes1;
  const int n_treated = treated_bucket == 1 ? n_bucket1 : n_bucket0;
  const int n_control = n - n_treated;

  EstimateReport report;
  report.estimand = estimand;
  report.method = "budget-split";
  const double scale_t = static_cast<double>(n) / static_cast<double>(n_treated);
  const double scale_c = static_cast<double>(n) / static_cast<double>(n_control);
  const auto treated_totals = treated.campaign_totals(estimand);
  const auto control_totals = control.campaign_totals(estimand);
  KahanSum total;
  for (int j = 0; j < treated.n_campaigns; ++j) {
    const double est = scale_t * treated_totals[static_cast<std::size_t>(j)] -
                       scale_c * control_totals[static_cast<std::size_t>(j)];
    report.per_campaign.emplace_back(j, est);
    total.add(est);
  }
  report.total_estimate = total.value();

  if (unit == BudgetSplitUnit::kMember) {
    const auto totals_t = treated.member_totals(estimand);
    const auto totals_c = control.member_totals(estimand);
    const auto t = detail::select_totals(totals_t, plan.bucket_d, treated_bucket);
    const auto c = detail::select_totals(totals_c, plan.bucket_d, 1 - treated_bucket);
    if (t.size() >= 2 && c.size() >= 2) {
      const TTestResult tt = welch_t_test(t, c);
      report.statistic = tt.statistic;
      report.p_value = tt.p_value;
    }
  } else {
    // Clone totals scaled to full-population level are the paired units.
    std::vector<double> t, c;
    for (int j = 0; j < treated.n_campaigns; ++j) {
      t.push_back(scale_t * treated_totals[static_cast<std::size_t>(j)]);
      c.push_back(scale_c * control_totals[static_cast<std::size_t>(j)]);
    }
    if (t.size() >= 2) {
      const TTestResult tt = welch_t_test(t, c);
      report.statistic = tt.statistic;
      report.p_value = tt.p_value;
    }
  }
  return report;
}

// Switchback analysis: difference of per-period arm means scaled back to the
// full horizon, with a paired permutation test on consecutively paired
// (treated, control) period totals.
inline EstimateReport switchback_estimator(const std::vector<PeriodTotal>& periods,
                                           Estimand estimand, std::uint64_t seed = 0) {
  EstimateReport report;
  report.estimand = estimand;
  report.method = "switchback-paired-permutation";
  std::vector<double> treated, control;
  std::deque<double> queue_t, queue_c;
  std::vector<double> diffs;
  for (const auto& p : periods) {
    const double y = p.value(estimand);
    if (p.arm == 1) {
      treated.push_back(y);
      queue_t.push_back(y);
    } else {
      control.push_back(y);
      queue_c.push_back(y);
    }
    if (!queue_t.empty() && !queue_c.empty()) {
      diffs.push_back(queue_t.front() - queue_c.front());
      queue_t.pop_front();
      queue_c.pop_front();
    }
  }
  if (treated.empty() || control.empty())
    throw UndefinedContrastError("switchback needs at least one period per arm");
  const double t_mean = mean(treated);
  const double c_mean = mean(control);
  report.total_estimate = static_cast<double>(periods.size()) * (t_mean - c_mean);
  if (!diffs.empty()) {
    const PermutationResult perm = paired_permutation_test(diffs, seed);
    report.statistic = perm.statistic;
    report.p_value = perm.p_value;
  }
  return report;
}

// Campaign-level completely randomized analysis: difference of arm-mean
// campaign totals scaled to all M campaigns (the campaign-side analogue of
// the member plug-in), tested with Welch t on campaign totals.
inline EstimateReport campaign_level_estimator(const OutcomeMatrix& outcomes,
                                               const AssignmentPlan& plan, Estimand estimand) {
  if (plan.kind != DesignKind::kCampaignCr)
    throw ValidationError("campaign-level estimator requires a campaign-cr plan");
  const int m = static_cast<int>(plan.campaign_w.size());
  const int m1 = plan.treated_count(plan.campaign_w);
  const int m0 = m - m1;
  if (m1 == 0 || m0 == 0)
    throw UndefinedContrastError("campaign-level estimator needs both arms non-empty");
  EstimateReport report;
  report.estimand = estimand;
  report.method = "campaign-cr";
  const auto totals = outcomes.campaign_totals(estimand);
  const auto t = detail::select_totals(totals, plan.campaign_w, 1);
  const auto c = detail::select_totals(totals, plan.campaign_w, 0);
  const double scale1 = static_cast<double>(m) / static_cast<double>(m1);
  const double scale0 = static_cast<double>(m) / static_cast<double>(m0);
  KahanSum total;
  for (int j = 0; j < m; ++j) {
    const double y = totals[static_cast<std::size_t>(j)];
    const double est = plan.campaign_w[static_cast<std::size_t>(j)] == 1 ? scale1 * y : -scale0 * y;
    report.per_campaign.emplace_back(j, est);
    total.add(est);
  }
  report.total_estimate = total.value();
  if (t.size() >= 2 && c.size() >= 2) {
    const TTestResult tt = welch_t_test(t, c);
    report.statistic = tt.statistic;
    report.p_value = tt.p_value;
  }
  return report;
}

inline void write_report_csv(const std::vector<EstimateReport>& reports,
                             const std::string& path) {
  CsvWriter csv(path);
  csv.row("method", "estimand", "total_estimate", "statistic", "p_value");
  for (const auto& r : reports)
    csv.row(r.method, estimand_name(r.estimand), r.total_estimate, r.statistic, r.p_value);
}

inline std::string report_text(const EstimateReport& r) {
  std::string out;
  out += "method:    " + r.method + "\n";
  out += "estimand:  " + std::string(estimand_name(r.estimand)) + "\n";
  out += "estimate:  " + format_number(r.total_estimate) + "\n";
  out += "statistic: " + format_number(r.statistic) + "\n";
  out += "p-value:   " + format_number(r.p_value) + "\n";
  for (const auto& [id, est] : r.per_campaign)
    out += "  campaign " + std::to_string(id) + ": " + format_number(est) + "\n";
  return out;
}

}  // namespace mktsim
