#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcp/alpha.hpp"

namespace hcp::bounds {

// ---------------------------------------------------------------------------
// The scalar functions driving the renormalization map.
// ---------------------------------------------------------------------------

// xi(r) = gamma - sqrt(gamma^2 - 1/2), gamma = (3 + r/2)/4, evaluated in the
// rationalized form 1/2 / (gamma + sqrt(gamma^2 - 1/2)) so large r does not
// cancel catastrophically. Decreasing from xi(0) = 1/2, with r*xi(r) -> 2.
inline double xi_function(double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("xi_function: r must be >= 0");
  double gamma = 0.25 * (3.0 + 0.5 * r);
  if (gamma > 1e120) return 0.25 / gamma;  // gamma^2 would overflow; relative error ~ gamma^-2
  return 0.5 / (gamma + std::sqrt(gamma * gamma - 0.5));
}

// g(eps) = 4 eps xi(1/eps): the one-step map sending eps(k) to
// eps(k+1) / (alpha_{k+1}/alpha_{k+2}). Increasing, g(eps) = 8 eps^2 + O(eps^3).
inline double g_function(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("g_function: eps must be > 0");
  return 4.0 * eps * xi_function(1.0 / eps);
}

namespace detail {

// D(eps) = 1 + 6 eps + sqrt(1 + 12 eps + 4 eps^2); algebraically
// xi(1/eps) = 4 eps / D(eps) and g(eps) = 16 eps^2 / D(eps). These forms
// stay finite for log-domain eps far below the double underflow threshold.
inline double log_D(double log_eps) {
  if (log_eps < -350.0) return std::log(2.0);                 // D -> 2 as eps -> 0
  if (log_eps > 300.0) return std::log(8.0) + log_eps;        // D = 8 eps + 4 + O(1/eps)
  double eps = std::exp(log_eps);
  return std::log(1.0 + 6.0 * eps + std::sqrt(1.0 + 12.0 * eps + 4.0 * eps * eps));
}

inline double log_xi_of_log_eps(double log_eps) {
  return std::log(4.0) + log_eps - log_D(log_eps);
}

inline double log_g_of_log_eps(double log_eps) {
  return std::log(16.0) + 2.0 * log_eps - log_D(log_eps);
}

}  // namespace detail

// Crossing points of g(eps)/eps^2 against a level: the ratio equals
// 16 / D(eps), which decreases from 8 at 0+, so the level-7 crossing exists
// and the level-9 one does not. Located by bisection; the factor-7 minorant
// for eps(k) is valid below the returned c7, the factor-9 majorant globally.
struct SmallnessConstants {
  double c7;
  double c9;  // +inf: g <= 9 eps^2 holds for every eps > 0
};

inline SmallnessConstants smallness_constants() {
  auto ratio = [](double eps) { return g_function(eps) / (eps * eps); };
  double lo = 1e-12, hi = 1.0;
  if (!(ratio(lo) > 7.0 && ratio(hi) < 7.0))
    throw std::logic_error("smallness_constants: bracketing failed");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (ratio(mid) > 7.0 ? lo : hi) = mid;
  }
  double c9 = kPosInf;
  for (double eps = 1e-10; eps < 1e3; eps *= 1.5)
    if (ratio(eps) >= 9.0) c9 = std::min(c9, eps);
  return {0.5 * (lo + hi), c9};
}

// ---------------------------------------------------------------------------
// The renormalization recursion delta(n+1) = 2 xi(n) delta(n).
// ---------------------------------------------------------------------------

enum class Verdict { positive, zero_indicated, truncated };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::positive: return "positive";
    case Verdict::zero_indicated: return "zero-indicated";
    case Verdict::truncated: return "truncated";
  }
  return "?";
}

// alpha_1 at level k is 2^-k alpha_{k+1}; computed by exact power-of-two
// scaling, never by mutating a stored list.
template <AlphaLike A>
double level_alpha(const A& alpha, int k, int level) {
  return std::ldexp(alpha.alpha(k + level), -level);
}

struct RenormTrace {
  std::vector<double> delta_seq;        // delta(0..n)
  std::vector<double> xi_seq;           // xi(0..n-1)
  std::vector<double> eps_seq;          // eps(0..n-1); empty if some alpha is 0
  bool eps_valid = true;
  std::vector<double> product_partial;  // running prod (1 - xi(k))
  double c7 = 0.0;
  double c9 = kPosInf;
  double max_route_gap = 0.0;           // |xi via alpha/delta - xi via 1/eps|

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},       {"delta_seq", delta_seq},
            {"xi_seq", xi_seq},        {"eps_seq", eps_seq},
            {"eps_valid", eps_valid},  {"product_partial", product_partial},
            {"c7", c7},                {"c9", c9 == kPosInf ? -1.0 : c9},
            {"max_route_gap", max_route_gap}};
  }
};

// Runs n_levels steps of the recursion. xi(k) is computed from the ratio
// alpha_1(k)/delta(k); when every alpha is positive the independent
// eps-route eps(k+1) = (alpha_{k+1}/alpha_{k+2}) g(eps(k)) is iterated
// alongside and the two must agree (max_route_gap is reported).
template <AlphaLike A>
RenormTrace renorm_recursion(double delta, const A& alpha, int n_levels) {
  if (!(delta > 0.0)) throw std::invalid_argument("renorm_recursion: delta must be > 0");
  if (n_levels < 0) throw std::invalid_argument("renorm_recursion: n_levels must be >= 0");
  RenormTrace tr;
  auto c = smallness_constants();
  tr.c7 = c.c7;
  tr.c9 = c.c9;
  tr.delta_seq.push_back(delta);
  double eps = 0.0;
  for (int k = 0; k < n_levels; ++k) {
    if (alpha.alpha(k + 1) <= 0.0) tr.eps_valid = false;
    double dk = tr.delta_seq.back();
    double a1 = level_alpha(alpha, 1, k);
    double xi = xi_function(a1 / dk);
    tr.xi_seq.push_back(xi);
    tr.delta_seq.push_back(2.0 * xi * dk);
    tr.product_partial.push_back((tr.product_partial.empty() ? 1.0 : tr.product_partial.back()) *
                                 (1.0 - xi));
    if (tr.eps_valid) {
      if (k == 0)
        eps = delta / alpha.alpha(1);
      else if (eps > 0.0)
        eps = (alpha.alpha(k) / alpha.alpha(k + 1)) * g_function(eps);
      // eps sticks at zero once the linear route underflows; survival_product
      // carries the deep levels in the log domain instead.
      tr.eps_seq.push_back(eps);
      if (eps > 0.0)
        tr.max_route_gap = std::max(tr.max_route_gap, std::fabs(xi_function(1.0 / eps) - xi));
    }
  }
  if (!tr.eps_valid) tr.eps_seq.clear();
  return tr;
}

// ---------------------------------------------------------------------------
// Survival lower bounds.
// ---------------------------------------------------------------------------

// Lower bound on the probability that the level-n process started from a
// single infected site is still alive at time t:
//   prod_{k<n} (1 - xi(k)) * exp(-delta(n) t).
template <AlphaLike A>
double finite_survival_bound(double delta, const A& alpha, int n, double t) {
  if (n < 0) throw std::invalid_argument("finite_survival_bound: n must be >= 0");
  if (!(t >= 0.0)) throw std::invalid_argument("finite_survival_bound: t must be >= 0");
  auto tr = renorm_recursion(delta, alpha, n);
  double prod = n == 0 ? 1.0 : tr.product_partial.back();
  return prod * std::exp(-tr.delta_seq.back() * t);
}

struct SurvivalProduct {
  double pi_lower = 0.0;       // certified lower bound when verdict == positive
  Verdict verdict = Verdict::truncated;
  int levels_used = 0;
  double tail_sum_bound = 0.0;  // bound on sum of xi beyond the computed prefix
  std::string note;

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},
            {"pi_lower", pi_lower},
            {"verdict", to_string(verdict)},
            {"levels_used", levels_used},
            {"tail_sum_bound", tail_sum_bound},
            {"note", note}};
  }
};

struct SurvivalOptions {
  int max_levels = 400;
  double xi_tail_cutoff = 1e-8;  // switch to the majorant tail below this xi
  int divergence_run = 10;       // eps > 1 this many consecutive levels
};

// Evaluates prod_{k>=0} (1 - xi(k)) from below. The recursion runs in the
// log domain; once xi has fallen under the cutoff the remaining sum of xi is
// bounded through the factor-9 majorant eps~(j+1) = 9 (a_{K+j+1}/a_{K+j+2})
// eps~(j)^2, whose terms decay doubly geometrically, and the remaining
// product is bounded below by exp(-2 sum xi) (valid since every xi <= 1/2).
// "zero-indicated" is deliberately not a proof of a zero product: finite
// truncation cannot certify divergence unless some alpha vanishes forever.
template <AlphaLike A>
SurvivalProduct survival_product(double delta, const A& alpha,
                                 SurvivalOptions opts = {}) {
  if (!(delta > 0.0)) throw std::invalid_argument("survival_product: delta must be > 0");
  SurvivalProduct out;
  const double log2c = std::log(2.0);
  double log_delta = std::log(delta);
  double log_prefix = 0.0;  // sum log(1 - xi(k)) over the computed prefix
  int run_above_one = 0;

  for (int k = 0; k < opts.max_levels; ++k) {
    out.levels_used = k + 1;
    double log_a1 = alpha.log_alpha(k + 1) - k * log2c;
    if (log_a1 == kNegInf) {
      // alpha_{k+1} = 0 pins xi(k) at 1/2. A finite-support family repeats
      // this forever, so the product is genuinely zero.
      if (alpha.support_end() >= 0 && k + 1 > alpha.support_end()) {
        out.verdict = Verdict::zero_indicated;
        out.note = "alpha support ended; xi pinned at 1/2 for all further levels";
        return out;
      }
      log_prefix += std::log(0.5);
      continue;  // delta(k+1) = 2 * (1/2) * delta(k) = delta(k)
    }
    double log_eps = log_delta - log_a1;

    if (log_eps > 0.0) {
      if (++run_above_one >= opts.divergence_run) {
        out.verdict = Verdict::zero_indicated;
        out.note = "eps stayed above 1 for " + std::to_string(opts.divergence_run) +
                   " consecutive levels";
        return out;
      }
    } else {
      run_above_one = 0;
    }

    // xi(k) = 4 eps / D(eps), the rationalized form of f(1/eps); valid on
    // the whole eps range, not just small eps.
    double log_xi = detail::log_xi_of_log_eps(log_eps);
    double xi = std::min(0.5, std::exp(log_xi));
    if (xi >= 1e-300) log_prefix += std::log1p(-xi);

    // Tail certification through the factor-9 majorant.
    if (xi < opts.xi_tail_cutoff) {
      double u = std::log(9.0) + log_eps;  // u_j = log(9 eps~(j)), j = 0 at level k
      double tail_eps = 0.0;
      bool ok = true;
      for (int j = 0; j < 20000; ++j) {
        double log_rho = alpha.log_alpha(k + j + 1) - alpha.log_alpha(k + j + 2);
        if (std::isnan(log_rho)) { ok = false; break; }
        double u_next = 2.0 * u + log_rho;
        // Demand at least halving per step; once u has fallen under the
        // double underflow floor the remaining terms contribute exactly 0.
        if (!(u_next <= u - log2c)) { ok = false; break; }
        u = u_next;
        tail_eps += std::exp(u) / 9.0;  // eps~(j), j >= 1, majorizes eps(k+j)
        if (u < -750.0) break;
      }
      if (ok) {
        out.tail_sum_bound = 2.0 * tail_eps;              // sum xi <= 2 sum eps~
        out.pi_lower = std::exp(log_prefix - 2.0 * out.tail_sum_bound);
        out.verdict = out.pi_lower > 0.0 ? Verdict::positive : Verdict::truncated;
        if (out.verdict == Verdict::truncated)
          out.note = "prefix product underflowed";
        return out;
      }
    }

    log_delta = log2c + log_xi + log_delta;  // delta(k+1) = 2 xi(k) delta(k)
  }
  out.verdict = Verdict::truncated;
  out.note = "max_levels reached without resolution";
  return out;
}

// ---------------------------------------------------------------------------
// The quadratic majorant / minorant sequences and the summability function.
// ---------------------------------------------------------------------------

struct EpsTildeResult {
  std::vector<double> seq;       // eps~(0..n)
  double closed_form_last;       // closed form for eps~(n)
  int factor;
};

// eps~(0) = delta/alpha_1, eps~(k+1) = factor (alpha_{k+1}/alpha_{k+2}) eps~(k)^2,
// factor in {9, 7}. The closed form for the last term,
//   (1/f) (f delta)^(2^n) / (alpha_{n+1} prod_{k=1..n} alpha_k^(2^(n-k))),
// is evaluated in the log domain and reported for cross-checking.
template <AlphaLike A>
EpsTildeResult eps_tilde_sequence(double delta, const A& alpha, int n, int factor) {
  if (factor != 9 && factor != 7)
    throw std::invalid_argument("eps_tilde_sequence: factor must be 7 or 9");
  if (!(delta > 0.0)) throw std::invalid_argument("eps_tilde_sequence: delta must be > 0");
  if (n < 0) throw std::invalid_argument("eps_tilde_sequence: n must be >= 0");
  for (int k = 1; k <= n + 1; ++k)
    if (alpha.log_alpha(k) == kNegInf)
      throw std::domain_error("eps_tilde_sequence: alpha_" + std::to_string(k) + " is zero");

  EpsTildeResult out;
  out.factor = factor;
  double f = static_cast<double>(factor);
  double eps = delta / alpha.alpha(1);
  out.seq.push_back(eps);
  for (int k = 0; k < n; ++k) {
    eps = f * (alpha.alpha(k + 1) / alpha.alpha(k + 2)) * eps * eps;
    out.seq.push_back(eps);
  }
  double log_cf = -std::log(f) + std::ldexp(1.0, n) * std::log(f * delta) -
                  alpha.log_alpha(n + 1);
  for (int k = 1; k <= n; ++k) log_cf -= std::ldexp(1.0, n - k) * alpha.log_alpha(k);
  out.closed_form_last = std::exp(log_cf);
  return out;
}

struct SummabilityValue {
  double log_value;
  double value;  // exp(log_value); may overflow to inf or underflow to 0
};

// F_eta(n) = eta^(2^n) / (alpha_{n+1} prod_{k=1..n} alpha_k^(2^(n-k))),
// evaluated as a log-domain accumulation: the 2^n exponents overflow any
// naive product by n ~ 10.
template <AlphaLike A>
SummabilityValue f_eta(const A& alpha, double eta, int n) {
  if (!(eta > 0.0)) throw std::invalid_argument("f_eta: eta must be > 0");
  if (n < 0) throw std::invalid_argument("f_eta: n must be >= 0");
  for (int k = 1; k <= n + 1; ++k)
    if (!(alpha.alpha(k) > 0.0))
      throw std::domain_error("f_eta: alpha_" + std::to_string(k) + " is zero");
  double lv = std::ldexp(1.0, n) * std::log(eta) - alpha.log_alpha(n + 1);
  for (int k = 1; k <= n; ++k) lv -= std::ldexp(1.0, n - k) * alpha.log_alpha(k);
  return {lv, std::exp(lv)};
}

struct SummabilityScan {
  double eta;
  // log(eta) - sum_{k>=1} 2^-k log(alpha_k); negative iff F_eta(n) < 1 eventually.
  double criterion;
  bool eventually_below_one;
  std::vector<double> normalized;  // 2^-n log F_eta(n) for n = 0..depth
};

template <AlphaLike A>
SummabilityScan f_eta_scan(const A& alpha, double eta, int depth) {
  SummabilityScan out;
  out.eta = eta;
  double series = 0.0;
  bool diverged = false;
  double prev_term = kPosInf;
  for (int k = 1; k <= 4000; ++k) {
    double term = std::ldexp(alpha.log_alpha(k), -k);
    if (alpha.log_alpha(k) == kNegInf) { diverged = true; break; }
    series += term;
    double mag = std::fabs(term);
    if (mag < 1e-18 && k > 8) break;
    if (k > 64 && mag > prev_term) { diverged = true; break; }  // terms growing: sum = -inf
    prev_term = std::max(mag, 1e-300);
  }
  out.criterion = diverged ? kPosInf : std::log(eta) - series;
  out.eventually_below_one = out.criterion < 0.0;
  int cap = depth;
  if (alpha.support_end() >= 0) cap = std::min(cap, alpha.support_end() - 1);
  for (int n = 0; n <= cap; ++n)
    out.normalized.push_back(std::ldexp(f_eta(alpha, eta, n).log_value, -n));
  return out;
}

// ---------------------------------------------------------------------------
// Extinction certificate by branching comparison.
// ---------------------------------------------------------------------------

struct ExtinctionCertificate {
  int n_witness;
  double offspring_value;  // < 1
  double log_offspring;
  double delta;
  int N;

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},      {"n_witness", n_witness},
            {"offspring_value", offspring_value}, {"log_offspring", log_offspring},
            {"delta", delta},         {"N", N}};
  }
};

// Searches n = 1..max_depth for
//   (1 - 1/N) (1 + 1/delta^)^(N^n) beta^_{n+1} < 1
// in the model rescaled so the per-site outgoing infection total is 1
// (delta^ = delta/|a|, beta^ = beta/|a| with |a| = (1-1/N) sum alpha). Below
// one, infection clusters beget new clusters subcritically and the process
// dies out. All arithmetic is in the log domain.
inline std::optional<ExtinctionCertificate> certify_extinction(double delta,
                                                               const AlphaSeq& alpha, int N,
                                                               int max_depth = 60) {
  if (!(delta > 0.0)) throw std::invalid_argument("certify_extinction: delta must be > 0");
  if (N < 2) throw std::invalid_argument("certify_extinction: N must be >= 2");
  if (!alpha.summable()) throw std::domain_error("certify_extinction: alpha not summable");
  const double norm = (1.0 - 1.0 / N) * alpha.sum();
  if (!(norm > 0.0)) {
    // No infections at all; any depth certifies with offspring 0.
    return ExtinctionCertificate{1, 0.0, kNegInf, delta, N};
  }
  const double delta_hat = delta / norm;
  const double log_pref = std::log1p(-1.0 / N) - std::log(norm);
  for (int n = 1; n <= max_depth; ++n) {
    double log_beta = alpha.log_beta_tail(n + 1);
    if (log_beta == kNegInf)
      return ExtinctionCertificate{n, 0.0, kNegInf, delta, N};
    double log_off =
        log_pref + std::pow(static_cast<double>(N), n) * std::log1p(1.0 / delta_hat) + log_beta;
    if (log_off < 0.0)
      return ExtinctionCertificate{n, std::exp(log_off), log_off, delta, N};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Comparison reduction to freedom 2.
// ---------------------------------------------------------------------------

// Dominates a freedom-N model from below by a freedom-2 model: pick the
// smallest (m, n) with (N')^m <= 2^n <= N^m, level the plain rates
// gamma_k = alpha_k N^-k down to blockwise minima of width m, then spread
// each minimum over a run of n distances on the freedom-2 side. Any survival
// lower bound for the reduced model transfers to the original.
struct ComparisonReduction {
  int m = 1;
  int n = 1;
  int N = 2;
  double n_prime = 2.0;

  // log gamma''_k (freedom-2 plain rates) for k >= 1.
  std::function<double(int)> log_gamma_pp;

  double log_alpha_pp(int k) const { return log_gamma_pp(k) + k * std::log(2.0); }
  double alpha_pp(int k) const { return std::exp(log_alpha_pp(k)); }
};

// Adapter exposing the reduced alpha'' as an AlphaLike sequence.
struct ReducedAlpha {
  ComparisonReduction reduction;
  double alpha(int k) const { return reduction.alpha_pp(k); }
  double log_alpha(int k) const { return reduction.log_alpha_pp(k); }
  int support_end() const { return -1; }
};

static_assert(AlphaLike<ReducedAlpha>);

inline ComparisonReduction compare_reduce(const AlphaSeq& alpha, int N, double n_prime) {
  if (N < 2) throw std::invalid_argument("compare_reduce: N must be >= 2");
  const bool pow2 = (N & (N - 1)) == 0;
  if (pow2) {
    if (n_prime != static_cast<double>(N))
      throw std::invalid_argument("compare_reduce: N' must equal N when N is a power of 2");
  } else if (!(n_prime > 1.0 && n_prime < static_cast<double>(N))) {
    throw std::invalid_argument("compare_reduce: need 1 < N' < N");
  }

  ComparisonReduction red;
  red.N = N;
  red.n_prime = n_prime;

  if (pow2) {
    red.m = 1;
    red.n = 0;
    for (int v = N; v > 1; v >>= 1) ++red.n;  // 2^n = N exactly
  } else {
    const double lo = std::log2(n_prime), hi = std::log2(static_cast<double>(N));
    bool found = false;
    for (int m = 1; m <= 64 && !found; ++m) {
      int n_min = static_cast<int>(std::ceil(m * lo - 1e-12));
      if (n_min < 1) n_min = 1;
      if (static_cast<double>(n_min) <= m * hi + 1e-12) {
        red.m = m;
        red.n = n_min;
        found = true;
      }
    }
    if (!found) throw std::domain_error("compare_reduce: no (m, n) with m <= 64");
  }

  const int m = red.m, n = red.n;
  const double logN = std::log(static_cast<double>(N));
  // log gamma'_(block l) = min over the m original distances in block l.
  auto log_gamma_block = [alpha, m, logN](int l) {
    double best = kPosInf;
    for (int r = 1; r <= m; ++r) {
      int k = l * m + r;
      best = std::min(best, alpha.log_alpha(k) - k * logN);
    }
    return best;
  };
  red.log_gamma_pp = [log_gamma_block, n](int k) {
    if (k < 1) throw std::invalid_argument("log_gamma_pp: k must be >= 1");
    return log_gamma_block((k - 1) / n);
  };
  return red;
}

// ---------------------------------------------------------------------------
// Two-sided bracket on the critical recovery rate.
// ---------------------------------------------------------------------------

struct DeltaBracket {
  double lower = 0.0;       // certified survival up to here (0 = none found)
  double upper = kPosInf;   // certified extinction from here on (inf = none found)
  std::optional<double> mc_estimate;  // non-rigorous point estimate
  int bisection_iters = 40;
  std::string family;

  std::string to_csv() const {
    std::ostringstream os;
    os << family << "," << lower << ",";
    if (upper == kPosInf) os << "inf";
    else os << upper;
    os << ",";
    if (mc_estimate) os << *mc_estimate;
    os << "," << bisection_iters;
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"schema", "hcp/1"},
                     {"family", family},
                     {"lower", lower},
                     {"upper", upper == kPosInf ? -1.0 : upper},
                     {"bisection_iters", bisection_iters}};
    if (mc_estimate) j["mc_estimate"] = *mc_estimate;
    return j;
  }
};

struct BracketOptions {
  int iters = 40;
  double rel_tol = 1e-6;
  double probe_floor = 1e-8;   // below this, give up on finding a positive verdict
  double probe_ceiling = 1e6;
  double grid_min = 1e-6;      // smallest delta probed on the extinction side
};

// lower: sup of the bisection grid where the survival product is certified
// positive. upper: inf of the grid where the extinction certificate holds.
// Both predicates are monotone in delta, so plain bisection applies. For a
// finite-range family every delta certifies (the offspring bound vanishes),
// and upper = 0 is reported exactly.
template <AlphaLike A>
DeltaBracket bracket_delta_c(const AlphaSeq& alpha_for_cert, const A& alpha_for_survival,
                             int N, BracketOptions opts = {}) {
  DeltaBracket out;
  out.family = alpha_for_cert.label();
  out.bisection_iters = opts.iters;

  auto positive = [&](double d) {
    return survival_product(d, alpha_for_survival).verdict == Verdict::positive;
  };

  // Survival side.
  double lo = 0.0, hi = 0.0;
  double probe = 1.0;
  while (probe >= opts.probe_floor && !positive(probe)) probe *= 0.25;
  if (probe >= opts.probe_floor) {
    lo = probe;
    hi = probe * 2.0;
    while (hi <= opts.probe_ceiling && positive(hi)) { lo = hi; hi *= 2.0; }
    if (hi > opts.probe_ceiling) {
      out.lower = lo;
    } else {
      for (int it = 0; it < opts.iters && (hi - lo) > opts.rel_tol * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (positive(mid) ? lo : hi) = mid;
      }
      out.lower = lo;
    }
  }

  // Extinction side.
  if (alpha_for_cert.support_end() >= 0) {
    out.upper = 0.0;  // beta vanishes beyond the support: every delta certifies
    return out;
  }
  auto certifies = [&](double d) { return certify_extinction(d, alpha_for_cert, N).has_value(); };
  if (certifies(opts.grid_min)) {
    out.upper = opts.grid_min;
    return out;
  }
  double chi = 1.0;
  while (chi <= opts.probe_ceiling && !certifies(chi)) chi *= 2.0;
  if (chi > opts.probe_ceiling) return out;  // upper stays infinite
  double clo = std::max(opts.grid_min, chi * 0.5);
  for (int it = 0; it < opts.iters && (chi - clo) > opts.rel_tol * chi; ++it) {
    double mid = 0.5 * (clo + chi);
    (certifies(mid) ? chi : clo) = mid;
  }
  out.upper = chi;
  return out;
}

}  // namespace hcp::bounds
