#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mktsim/csv.hpp"
#include "mktsim/errors.hpp"
#include "mktsim/money.hpp"

namespace mktsim {

enum class Estimand { kDelivered, kRevenue };

inline const char* estimand_name(Estimand e) {
  return e == Estimand::kDelivered ? "delivered_value" : "revenue";
}

// Realized (member, campaign) outcomes of one run: delivered value and
// charged revenue, plus the treatment arm the row was produced under.
// Mechanistic runs store exact integer cents; analytic models store reals.
struct OutcomeMatrix {
  struct Cell {
    int member = 0;
    int campaign = 0;
    int arm = 0;
    double delivered = 0.0;
    double revenue = 0.0;
  };

  int n_members = 0;
  int n_campaigns = 0;
  std::vector<Cell> cells;  // sorted by (member, campaign)

  double value(const Cell& c, Estimand e) const {
    return e == Estimand::kDelivered ? c.delivered : c.revenue;
  }

  std::vector<double> member_totals(Estimand e) const {
    std::vector<double> t(static_cast<std::size_t>(n_members), 0.0);
    for (const auto& c : cells) t[static_cast<std::size_t>(c.member)] += value(c, e);
    return t;
  }

  std::vector<double> campaign_totals(Estimand e) const {
    std::vector<double> t(static_cast<std::size_t>(n_campaigns), 0.0);
    for (const auto& c : cells) t[static_cast<std::size_t>(c.campaign)] += value(c, e);
    return t;
  }

  double total(Estimand e) const {
    double sum = 0.0;
    for (const auto& c : cells) sum += value(c, e);
    return sum;
  }

  void sort_cells() {
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
      return a.member != b.member ? a.member < b.member : a.campaign < b.campaign;
    });
  }
};

// Checks the hard outcome constraints: values non-negative, revenue never
// above delivered value, and charged revenue per campaign never above its
// budget. Returns the number of violations (0 in any correct run).
inline int count_invariant_violations(const OutcomeMatrix& m, const std::vector<Cents>& budgets) {
  int violations = 0;
  std::vector<double> revenue_by_campaign(static_cast<std::size_t>(m.n_campaigns), 0.0);
  for (const auto& c : m.cells) {
    if (c.delivered < 0.0 || c.revenue < 0.0) ++violations;
    if (c.revenue > c.delivered) ++violations;
    revenue_by_campaign[static_cast<std::size_t>(c.campaign)] += c.revenue;
  }
  for (int j = 0; j < m.n_campaigns; ++j) {
    const Cents b = budgets[static_cast<std::size_t>(j)];
    if (!is_unlimited(b) && revenue_by_campaign[static_cast<std::size_t>(j)] >
                                static_cast<double>(b) + 1e-9)
      ++violations;
  }
  return violations;
}

inline void write_outcome_csv(const OutcomeMatrix& m, const std::string& path) {
  CsvWriter csv(path);
  csv.row("member_id", "campaign_id", "arm", "delivered_value_cents", "revenue_cents");
  for (const auto& c : m.cells) csv.row(c.member, c.campaign, c.arm, c.delivered, c.revenue);
}

// Per-period marketplace totals, the analysis unit of switchback runs.
struct PeriodTotal {
  int period = 0;
  int arm = 0;
  double delivered = 0.0;
  double revenue = 0.0;

  double value(Estimand e) const { return e == Estimand::kDelivered ? delivered : revenue; }
};

inline void write_period_csv(const std::vector<PeriodTotal>& periods, const std::string& path) {
  CsvWriter csv(path);
  csv.row("period", "arm", "delivered_value_cents", "revenue_cents");
  for (const auto& p : periods) csv.row(p.period, p.arm, p.delivered, p.revenue);
}

}  // namespace mktsim
