#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mktsim {

// Compensated (Kahan) summation; enumeration means must hold to 1e-9.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double mean(std::span<const double> xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 denominator).
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  KahanSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

struct TTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
  bool degenerate = false;  // zero pooled variance convention applied
};

// Welch two-sample t-test, two-sided. Degenerate variance is flagged and
// resolved as p = 1 when the means agree, p = 0 otherwise.
inline TTestResult welch_t_test(std::span<const double> treat, std::span<const double> control) {
  TTestResult r;
  const double n1 = static_cast<double>(treat.size());
  const double n0 = static_cast<double>(control.size());
  const double m1 = mean(treat);
  const double m0 = mean(control);
  const double v1 = sample_variance(treat);
  const double v0 = sample_variance(control);
  const double se2 = v1 / n1 + v0 / n0;
  if (!(se2 > 0.0)) {
    r.degenerate = true;
    if (m1 == m0) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = m1 > m0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = (m1 - m0) / std::sqrt(se2);
  // Welch-Satterthwaite degrees of freedom.
  const double num = se2 * se2;
  const double den = (v1 * v1) / (n1 * n1 * (n1 - 1.0)) + (v0 * v0) / (n0 * n0 * (n0 - 1.0));
  r.dof = den > 0.0 ? num / den : n1 + n0 - 2.0;
  const boost::math::students_t_distribution<double> dist(r.dof);
  r.p_value = 2.0 * boost::math::cdf(dist, -std::abs(r.statistic));
  return r;
}

// Upper-tail chi-square probability; used by the design uniformity tests.
inline double chi_square_p_value(double statistic, double dof) {
  const boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

// Pearson statistic of observed counts against uniform expected counts.
inline double chi_square_uniform(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

struct MeanCi {
  double mean = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Normal-approximation 95% confidence interval for a Monte Carlo mean.
inline MeanCi mean_ci95(std::span<const double> xs) {
  MeanCi ci;
  ci.mean = mean(xs);
  const double n = static_cast<double>(xs.size());
  ci.se = n > 1 ? std::sqrt(sample_variance(xs) / n) : 0.0;
  ci.lo = ci.mean - 1.959963984540054 * ci.se;
  ci.hi = ci.mean + 1.959963984540054 * ci.se;
  return ci;
}

}  // namespace mktsim
