#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hcp::stats {

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion.
inline double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Q(a,x) = 1 - P(a,x), the upper regularized incomplete gamma.
inline double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Survival function of the chi-square distribution with df degrees of freedom.
inline double chi2_sf(double stat, double df) {
  if (df <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * stat);
}

// Pearson chi-square accumulator. Categories are added one at a time;
// p-value computed against df = categories - 1 (or an explicit df).
struct ChiSquare {
  double stat = 0.0;
  int categories = 0;

  void add(double observed, double expected) {
    if (expected <= 0.0) throw std::invalid_argument("ChiSquare: expected must be > 0");
    double d = observed - expected;
    stat += d * d / expected;
    ++categories;
  }
  double df() const { return categories > 1 ? categories - 1 : 0; }
  double p_value() const { return chi2_sf(stat, df()); }
};

inline double binomial_stderr(double p_hat, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("binomial_stderr: n must be positive");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

// Total variation distance between two empirical distributions given as
// count vectors over a common state enumeration.
inline double total_variation(const std::vector<std::int64_t>& a,
                              const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  std::int64_t na = 0, nb = 0;
  for (auto v : a) na += v;
  for (auto v : b) nb += v;
  if (na == 0 || nb == 0) throw std::invalid_argument("total_variation: empty sample");
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    tv += std::fabs(static_cast<double>(a[i]) / na - static_cast<double>(b[i]) / nb);
  return 0.5 * tv;
}

inline double total_variation_vs_exact(const std::vector<std::int64_t>& counts,
                                       const std::vector<double>& law) {
  if (counts.size() != law.size()) throw std::invalid_argument("total_variation: size mismatch");
  std::int64_t n = 0;
  for (auto v : counts) n += v;
  if (n == 0) throw std::invalid_argument("total_variation: empty sample");
  double tv = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    tv += std::fabs(static_cast<double>(counts[i]) / n - law[i]);
  return 0.5 * tv;
}

}  // namespace hcp::stats
