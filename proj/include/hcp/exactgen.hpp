#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcp/bounds.hpp"

namespace hcp::exact {

// Exact state spaces: configurations on the freedom-2 lattice with 2^n
// sites are bitmasks, so level n has 2^(2^n) states (4, 16, 256, 65536 for
// n = 1..4). Exact construction is capped at n = 4; dense transient laws
// at n <= 2.
inline constexpr int kMaxExactLevel = 4;

inline int sites_at_level(int n) { return 1 << n; }
inline std::uint32_t states_at_level(int n) { return 1u << (1 << n); }

// Hierarchical distance between freedom-2 sites in flat-index form.
inline int site_hdist(std::uint32_t s, std::uint32_t t) {
  return std::bit_width(s ^ t);
}

// Block pattern classes: 0 = both healthy, 1 = exactly one infected,
// 2 = both infected.
enum : int { kPat00 = 0, kPat01 = 1, kPat11 = 2 };

inline int block_pattern(std::uint32_t x, int block) {
  std::uint32_t bits = (x >> (2 * block)) & 3u;
  return bits == 0 ? kPat00 : (bits == 3 ? kPat11 : kPat01);
}

// The 3x2 single-block kernel table: p(00,.) = (1, 0), p(01,.) = p(10,.) =
// (xi, 1-xi), p(11,.) = (0, 1).
struct PTable {
  double xi;
  explicit PTable(double xi_) : xi(xi_) {
    if (!(xi > 0.0 && xi <= 0.5))
      throw std::invalid_argument("PTable: xi must lie in (0, 1/2]");
  }
  double operator()(int pattern, int coarse_bit) const {
    switch (pattern) {
      case kPat00: return coarse_bit == 0 ? 1.0 : 0.0;
      case kPat01: return coarse_bit == 0 ? xi : 1.0 - xi;
      case kPat11: return coarse_bit == 0 ? 0.0 : 1.0;
    }
    throw std::invalid_argument("PTable: bad pattern");
  }
};

// Entries marked irrelevant in the infection-weight tables still need a
// value for simulation. Convention A keeps a >= 1/2 and b >= 0 everywhere,
// which the monotone sub-coupling relies on; convention B exists to verify
// that the checked identities do not depend on the choice.
enum class StarConvention { A, B };

// Infection weight a(target_pattern, source_pattern) applied when the
// coarse pair reads (0, 1), and b(.,.) when it reads (0, 0).
struct ABTables {
  double a[3][3];
  double b[3][3];

  ABTables(double xi, StarConvention conv) {
    const double sa = conv == StarConvention::A ? 0.5 : 1.0;
    const double sb = conv == StarConvention::A ? 0.0 : 1.0;
    for (auto& row : a)
      for (auto& v : row) v = sa;
    for (auto& row : b)
      for (auto& v : row) v = sb;
    a[kPat00][kPat01] = 1.0 - xi;
    a[kPat00][kPat11] = 2.0 * (1.0 - xi);
    a[kPat01][kPat01] = 0.5;
    a[kPat01][kPat11] = 1.0;
    b[kPat00][kPat00] = 0.0;
    b[kPat01][kPat00] = 0.0;
    b[kPat00][kPat01] = 1.0 - xi;
    b[kPat01][kPat01] = 0.5;
  }
};

// ---------------------------------------------------------------------------
// Sparse generator matrices
// ---------------------------------------------------------------------------

// Off-diagonal rates r(s, s'); the diagonal is implicitly -(row sum), so the
// generator property (nonnegative off-diagonals, zero row sums) holds by
// construction and is re-checked after assembly.
class GeneratorMatrix {
 public:
  explicit GeneratorMatrix(std::uint32_t dim) : dim_(dim), rows_(dim), row_sum_(dim, 0.0) {}

  std::uint32_t dim() const { return dim_; }

  void add(std::uint32_t from, std::uint32_t to, double rate) {
    if (from == to) throw std::invalid_argument("GeneratorMatrix: diagonal is implicit");
    if (!(rate >= 0.0)) throw std::invalid_argument("GeneratorMatrix: negative rate");
    if (rate == 0.0) return;
    for (auto& [col, r] : rows_[from]) {
      if (col == to) {
        r += rate;
        row_sum_[from] += rate;
        return;
      }
    }
    rows_[from].emplace_back(to, rate);
    row_sum_[from] += rate;
  }

  const std::vector<std::pair<std::uint32_t, double>>& row(std::uint32_t i) const {
    return rows_[i];
  }
  double row_sum(std::uint32_t i) const { return row_sum_[i]; }
  double diag(std::uint32_t i) const { return -row_sum_[i]; }

  double entry(std::uint32_t i, std::uint32_t j) const {
    if (i == j) return diag(i);
    for (auto& [col, r] : rows_[i])
      if (col == j) return r;
    return 0.0;
  }

  std::vector<double> dense() const {
    std::vector<double> m(static_cast<std::size_t>(dim_) * dim_, 0.0);
    for (std::uint32_t i = 0; i < dim_; ++i) {
      m[static_cast<std::size_t>(i) * dim_ + i] = diag(i);
      for (auto& [j, r] : rows_[i]) m[static_cast<std::size_t>(i) * dim_ + j] = r;
    }
    return m;
  }

  // (v G)(j) for a row vector v (distribution flow).
  std::vector<double> apply_left(const std::vector<double>& v) const {
    std::vector<double> out(dim_, 0.0);
    for (std::uint32_t i = 0; i < dim_; ++i) {
      if (v[i] == 0.0) continue;
      out[i] -= v[i] * row_sum_[i];
      for (auto& [j, r] : rows_[i]) out[j] += v[i] * r;
    }
    return out;
  }

  double max_abs_row_sum_violation() const { return 0.0; }  // diagonal is implicit

 private:
  std::uint32_t dim_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows_;
  std::vector<double> row_sum_;
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

// Contact generator on level n (freedom 2): infected sites recover at rate
// delta; a healthy site s gets infected at rate sum over infected v of
// alpha_k 2^-k with k = |s - v|. The all-healthy state is a trap.
inline GeneratorMatrix build_contact_generator(int n, double delta,
                                               std::span<const double> alpha) {
  if (n < 0 || n > kMaxExactLevel)
    throw std::invalid_argument("build_contact_generator: exact mode needs 0 <= n <= 4");
  if (!(delta > 0.0)) throw std::invalid_argument("build_contact_generator: delta must be > 0");
  if (static_cast<int>(alpha.size()) < n)
    throw std::invalid_argument("build_contact_generator: need alpha_1..alpha_n");
  for (double a : alpha)
    if (!(a >= 0.0)) throw std::invalid_argument("build_contact_generator: alpha must be >= 0");

  const int S = sites_at_level(n);
  GeneratorMatrix gen(states_at_level(n));
  for (std::uint32_t x = 0; x < states_at_level(n); ++x) {
    for (int s = 0; s < S; ++s) {
      const std::uint32_t bit = 1u << s;
      if (x & bit) {
        gen.add(x, x ^ bit, delta);
      } else {
        double rate = 0.0;
        for (int v = 0; v < S; ++v)
          if (x & (1u << v)) rate += std::ldexp(alpha[site_hdist(s, v) - 1], -site_hdist(s, v));
        if (rate > 0.0) gen.add(x, x | bit, rate);
      }
    }
  }
  return gen;
}

// Product kernel from level-n states to level-(n-1) states:
// P(x, y) = prod over coarse sites i of p(pattern_i(x), y_i). Rows sum to 1
// exactly up to rounding in the products.
class CoarseKernel {
 public:
  CoarseKernel(int n, double xi) : n_(n), p_(xi) {
    if (n < 1 || n > kMaxExactLevel)
      throw std::invalid_argument("CoarseKernel: need 1 <= n <= 4");
  }

  int n() const { return n_; }
  double xi() const { return p_.xi; }
  std::uint32_t rows() const { return states_at_level(n_); }
  std::uint32_t cols() const { return states_at_level(n_ - 1); }

  double entry(std::uint32_t x, std::uint32_t y) const {
    double prod = 1.0;
    const int coarse = sites_at_level(n_ - 1);
    for (int i = 0; i < coarse && prod != 0.0; ++i)
      prod *= p_(block_pattern(x, i), (y >> i) & 1u);
    return prod;
  }

  double row_sum(std::uint32_t x) const {
    double s = 0.0;
    for (std::uint32_t y = 0; y < cols(); ++y) s += entry(x, y);
    return s;
  }

 private:
  int n_;
  PTable p_;
};

inline CoarseKernel build_kernel(int n, double xi) { return CoarseKernel(n, xi); }

// Companion generator on the coarse level, evaluated at a fixed fine state
// x: coarse sites recover at rate delta'; coarse site i is infected from j
// at distance k at rate 2 alpha'_k 2^-k weighted by a(pattern_i, pattern_j)
// when (y_i, y_j) = (0, 1) and by b(pattern_i, pattern_j) when (0, 0).
inline GeneratorMatrix build_addon_generator(int n, std::uint32_t x, double delta_prime,
                                             std::span<const double> alpha_prime, double xi,
                                             StarConvention conv = StarConvention::A) {
  if (n < 1 || n > kMaxExactLevel)
    throw std::invalid_argument("build_addon_generator: need 1 <= n <= 4");
  if (static_cast<int>(alpha_prime.size()) < n - 1)
    throw std::invalid_argument("build_addon_generator: need alpha'_1..alpha'_{n-1}");
  const ABTables w(xi, conv);
  const int C = sites_at_level(n - 1);
  GeneratorMatrix gen(states_at_level(n - 1));
  for (std::uint32_t y = 0; y < states_at_level(n - 1); ++y) {
    for (int i = 0; i < C; ++i) {
      const std::uint32_t bit = 1u << i;
      if (y & bit) {
        gen.add(y, y ^ bit, delta_prime);
        continue;
      }
      double rate = 0.0;
      for (int j = 0; j < C; ++j) {
        if (j == i) continue;
        const int k = site_hdist(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        const double base = std::ldexp(2.0 * alpha_prime[k - 1], -k);  // alpha_{k+1} 2^-k
        const int pi = block_pattern(x, i), pj = block_pattern(x, j);
        rate += base * ((y >> j) & 1u ? w.a[pi][pj] : w.b[pi][pj]);
      }
      if (rate > 0.0) gen.add(y, y | bit, rate);
    }
  }
  return gen;
}

struct JointParams {
  int n;
  double delta;
  std::vector<double> alpha;   // alpha_1..alpha_n
  double xi;                    // defaults to xi_function(alpha_1/delta)
  StarConvention conv = StarConvention::A;

  JointParams(int n_, double delta_, std::vector<double> alpha_,
              double xi_ = -1.0, StarConvention conv_ = StarConvention::A)
      : n(n_), delta(delta_), alpha(std::move(alpha_)), xi(xi_), conv(conv_) {
    if (xi < 0.0) xi = bounds::xi_function(alpha.at(0) / delta);
  }
  double delta_prime() const { return 2.0 * xi * delta; }
  std::vector<double> alpha_prime() const {
    std::vector<double> ap;
    for (int k = 1; k < n; ++k) ap.push_back(0.5 * alpha[k]);
    return ap;
  }
};

// Joint generator on pairs (x, y): x-moves at rate r(x,x') P(x',y) / P(x,y);
// y-moves at the companion rates, dragging x through the kernel-weighted
// jump distribution q whenever the target y' has P(x, y') = 0. Rates that
// the definitions leave open are resolved as: t = 0 when P(x,y) = 0, and q =
// point mass at x when its normalization vanishes; both choices only touch
// states unreachable from kernel-consistent initial laws.
inline GeneratorMatrix build_joint_generator(const JointParams& jp) {
  if (jp.n < 1 || jp.n > 2)
    throw std::invalid_argument("build_joint_generator: dense joint mode needs n in {1, 2}");
  const CoarseKernel P(jp.n, jp.xi);
  const GeneratorMatrix G = build_contact_generator(jp.n, jp.delta, jp.alpha);
  const std::uint32_t NX = P.rows(), NY = P.cols();
  const auto ap = jp.alpha_prime();
  GeneratorMatrix gen(NX * NY);

  for (std::uint32_t x = 0; x < NX; ++x) {
    const GeneratorMatrix Gx = build_addon_generator(jp.n, x, jp.delta_prime(), ap, jp.xi, jp.conv);
    for (std::uint32_t y = 0; y < NY; ++y) {
      const std::uint32_t from = x * NY + y;
      const double Pxy = P.entry(x, y);
      if (Pxy > 0.0) {
        for (auto& [x2, r] : G.row(x)) {
          double t = r * P.entry(x2, y) / Pxy;
          if (t > 0.0) gen.add(from, x2 * NY + y, t);
        }
      }
      for (auto& [y2, rp] : Gx.row(y)) {
        if (P.entry(x, y2) > 0.0) {
          gen.add(from, x * NY + y2, rp);
          continue;
        }
        double denom = 0.0;
        for (auto& [x2, r] : G.row(x)) denom += r * P.entry(x2, y2);
        if (denom > 0.0) {
          for (auto& [x2, r] : G.row(x)) {
            double q = r * P.entry(x2, y2) / denom;
            if (q > 0.0) gen.add(from, x2 * NY + y2, rp * q);
          }
        } else {
          gen.add(from, x * NY + y2, rp);
        }
      }
    }
  }
  return gen;
}

// ---------------------------------------------------------------------------
// Transient laws by uniformization
// ---------------------------------------------------------------------------

// exp(G t) acting on an initial distribution, via the uniformized chain
// P = I + G/L: sum of Poisson(L t)-weighted powers, truncated when the
// accumulated weight reaches 1 - 1e-15. Long horizons are split so L t
// stays moderate.
inline std::vector<double> transient_distribution(const GeneratorMatrix& gen,
                                                  std::vector<double> dist, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("transient_distribution: t must be >= 0");
  if (dist.size() != gen.dim()) throw std::invalid_argument("transient_distribution: bad init");
  double L = 0.0;
  for (std::uint32_t i = 0; i < gen.dim(); ++i) L = std::max(L, gen.row_sum(i));
  if (L == 0.0 || t == 0.0) return dist;
  L *= 1.000001;
  int steps = static_cast<int>(std::ceil(L * t / 256.0));
  const double dt = t / steps;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> acc(dist.size(), 0.0);
    std::vector<double> v = dist;
    double logw = -L * dt;  // log Poisson weight, k = 0
    double total = 0.0;
    for (int k = 0; k < 100000; ++k) {
      double w = std::exp(logw);
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
      total += w;
      if (total > 1.0 - 1e-15 && k > L * dt) break;
      // v <- v (I + G/L)
      std::vector<double> gv = gen.apply_left(v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += gv[i] / L;
      logw += std::log(L * dt) - std::log1p(static_cast<double>(k));
    }
    dist = std::move(acc);
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

struct Residual {
  std::string check;
  int n = 0;
  nlohmann::json params;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass() const { return max_residual < threshold; }

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"}, {"check", check},         {"n", n},
            {"params", params},  {"max_residual", max_residual}, {"threshold", threshold},
            {"pass", pass()}};
  }
};

inline double intertwine_threshold(int n) { return n <= 2 ? 1e-12 : 1e-10; }
inline double commute_threshold(int n) { return n <= 1 ? 1e-12 : 1e-10; }

// (G P)(x, y) including the diagonal of G.
inline double gen_dot_kernel(const GeneratorMatrix& G, const CoarseKernel& P, std::uint32_t x,
                             std::uint32_t y) {
  double acc = G.diag(x) * P.entry(x, y);
  for (auto& [x2, r] : G.row(x)) acc += r * P.entry(x2, y);
  return acc;
}

// max over states x and coarse states y' of |(G P)(x,y') - sum_y P(x,y)
// G'_x(y,y')|: the defining identity of the coarse companion process,
// checked on indicator functions (sufficient by linearity).
inline Residual verify_intertwine(int n, double delta, std::span<const double> alpha,
                                  double xi_override = -1.0,
                                  StarConvention conv = StarConvention::A) {
  if (n < 1 || n > 3) throw std::invalid_argument("verify_intertwine: need 1 <= n <= 3");
  JointParams jp(n, delta, std::vector<double>(alpha.begin(), alpha.end()), xi_override, conv);
  const CoarseKernel P(n, jp.xi);
  const GeneratorMatrix G = build_contact_generator(n, delta, alpha);
  const auto ap = jp.alpha_prime();
  const std::uint32_t NX = P.rows(), NY = P.cols();

  double max_res = 0.0;
  for (std::uint32_t x = 0; x < NX; ++x) {
    const GeneratorMatrix Gx = build_addon_generator(n, x, jp.delta_prime(), ap, jp.xi, jp.conv);
    for (std::uint32_t y2 = 0; y2 < NY; ++y2) {
      double lhs = gen_dot_kernel(G, P, x, y2);
      double rhs = 0.0;
      for (std::uint32_t y = 0; y < NY; ++y) {
        double Pxy = P.entry(x, y);
        if (Pxy != 0.0) rhs += Pxy * Gx.entry(y, y2);
      }
      max_res = std::max(max_res, std::fabs(lhs - rhs));
    }
  }
  Residual rep;
  rep.check = "intertwine";
  rep.n = n;
  rep.params = {{"delta", delta},
                {"alpha", std::vector<double>(alpha.begin(), alpha.end())},
                {"xi", jp.xi},
                {"convention", conv == StarConvention::A ? "A" : "B"}};
  rep.max_residual = max_res;
  rep.threshold = intertwine_threshold(n);
  return rep;
}

// Full commutation of the joint generator with the kernel-average map:
// max over (x, x', y) of |G(x,x') P(x',y) - sum_{y''} P(x,y'') Ghat((x,y''),(x',y))|.
inline Residual verify_commute(int n, double delta, std::span<const double> alpha,
                               double xi_override = -1.0,
                               StarConvention conv = StarConvention::A) {
  if (n < 1 || n > 2) throw std::invalid_argument("verify_commute: need 1 <= n <= 2");
  JointParams jp(n, delta, std::vector<double>(alpha.begin(), alpha.end()), xi_override, conv);
  const CoarseKernel P(n, jp.xi);
  const GeneratorMatrix G = build_contact_generator(n, delta, alpha);
  const GeneratorMatrix Ghat = build_joint_generator(jp);
  const std::uint32_t NX = P.rows(), NY = P.cols();

  double max_res = 0.0;
  for (std::uint32_t x = 0; x < NX; ++x)
    for (std::uint32_t x2 = 0; x2 < NX; ++x2)
      for (std::uint32_t y = 0; y < NY; ++y) {
        double lhs = G.entry(x, x2) * P.entry(x2, y);
        double rhs = 0.0;
        for (std::uint32_t y2 = 0; y2 < NY; ++y2) {
          double Pxy = P.entry(x, y2);
          if (Pxy != 0.0) rhs += Pxy * Ghat.entry(x * NY + y2, x2 * NY + y);
        }
        max_res = std::max(max_res, std::fabs(lhs - rhs));
      }
  Residual rep;
  rep.check = "commute";
  rep.n = n;
  rep.params = {{"delta", delta},
                {"alpha", std::vector<double>(alpha.begin(), alpha.end())},
                {"xi", jp.xi},
                {"convention", conv == StarConvention::A ? "A" : "B"}};
  rep.max_residual = max_res;
  rep.threshold = commute_threshold(n);
  return rep;
}

// ---------------------------------------------------------------------------
// One-level spectrum
// ---------------------------------------------------------------------------

// The one-level generator restricted to symmetric functions vanishing on
// the trap acts as [[-(delta + alpha1/2), alpha1/2], [2 delta, -2 delta]];
// its eigenvalues are -2 delta (gamma -+ sqrt(gamma^2 - 1/2)) and the
// leading eigenfunction extends to (0, 1-xi, 1-xi, 1) on the four states.
struct OneLevelSpectrum {
  double lambda_lead;
  double lambda_sub;
  std::array<double, 4> eigvec;  // indexed by state bits (x0 + 2 x1)
  std::array<std::array<double, 2>, 2> restricted;
};

inline OneLevelSpectrum one_level_spectrum(double delta, double alpha1) {
  if (!(delta > 0.0)) throw std::invalid_argument("one_level_spectrum: delta must be > 0");
  if (!(alpha1 >= 0.0)) throw std::invalid_argument("one_level_spectrum: alpha1 must be >= 0");
  const double r = alpha1 / delta;
  const double gamma = 0.25 * (3.0 + 0.5 * r);
  const double root = std::sqrt(gamma * gamma - 0.5);
  const double xi = bounds::xi_function(r);
  OneLevelSpectrum out;
  out.lambda_lead = -2.0 * delta * (gamma - root);
  out.lambda_sub = -2.0 * delta * (gamma + root);
  out.eigvec = {0.0, 1.0 - xi, 1.0 - xi, 1.0};
  out.restricted = {{{-(delta + 0.5 * alpha1), 0.5 * alpha1}, {2.0 * delta, -2.0 * delta}}};
  return out;
}

// ---------------------------------------------------------------------------
// Two-level tables
// ---------------------------------------------------------------------------

struct TwoLevelReport {
  double xi = 0.0;
  double max_table_residual = 0.0;     // rebuilt vs closed-form P and IP tables
  double max_identity_residual = 0.0;  // componentwise-product identities
  double max_lump_residual = 0.0;      // block-pattern chain is lumpable with rates 1, 2, 1/2, 1
  double table_threshold = 1e-14;
  double identity_threshold = 1e-12;
  bool pass() const {
    return max_table_residual < table_threshold && max_identity_residual < identity_threshold &&
           max_lump_residual < table_threshold;
  }

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},
            {"check", "two-level"},
            {"xi", xi},
            {"max_table_residual", max_table_residual},
            {"max_identity_residual", max_identity_residual},
            {"max_lump_residual", max_lump_residual},
            {"threshold", std::max(table_threshold, identity_threshold)},
            {"pass", pass()}};
  }
};

// Rebuilds, from the kernel and the two-block infection operator, the
// tables P_y(c0, c1) and (I P)_y(c0, c1) indexed by the block patterns of
// the two blocks, and checks them against their closed forms together with
// the product identities that tie them to the a/b weight tables.
inline TwoLevelReport verify_two_level_tables(double xi,
                                              StarConvention conv = StarConvention::A) {
  TwoLevelReport rep;
  rep.xi = xi;
  const CoarseKernel P(2, xi);
  const ABTables w(xi, conv);

  // Two-block infection operator: block-0 sites {0,1} are infected by
  // infected block-1 sites {2,3}, each ordered pair at rate 1/2.
  GeneratorMatrix I(16);
  for (std::uint32_t x = 0; x < 16; ++x)
    for (int s = 0; s < 2; ++s) {
      if (x & (1u << s)) continue;
      double rate = 0.0;
      for (int v = 2; v < 4; ++v)
        if (x & (1u << v)) rate += 0.5;
      if (rate > 0.0) I.add(x, x | (1u << s), rate);
    }

  const double om = 1.0 - xi;
  // Closed forms, rows indexed by the block-0 pattern, columns by block-1.
  const double P00[3][3] = {{1, xi, 0}, {xi, xi * xi, 0}, {0, 0, 0}};
  const double P01[3][3] = {{0, om, 1}, {0, xi * om, xi}, {0, 0, 0}};
  const double P11[3][3] = {{0, 0, 0}, {0, om * om, om}, {0, om, 1}};
  const double IP00[3][3] = {{0, -xi * om, 0}, {0, -0.5 * xi * xi, 0}, {0, 0, 0}};
  const double IP01[3][3] = {{0, -om * om, -2 * om}, {0, -0.5 * xi * om, -xi}, {0, 0, 0}};

  auto y_index = [](int y0, int y1) { return static_cast<std::uint32_t>(y0 + 2 * y1); };
  const std::uint32_t y00 = y_index(0, 0), y01 = y_index(0, 1), y10 = y_index(1, 0),
                      y11 = y_index(1, 1);

  auto ip = [&](std::uint32_t x, std::uint32_t y) { return gen_dot_kernel(I, P, x, y); };

  for (std::uint32_t x = 0; x < 16; ++x) {
    const int c0 = block_pattern(x, 0), c1 = block_pattern(x, 1);
    auto upd = [&](double& slot, double got, double want) {
      slot = std::max(slot, std::fabs(got - want));
    };
    // Rebuilt tables against closed forms (also confirms the entries depend
    // on x only through its block patterns).
    upd(rep.max_table_residual, P.entry(x, y00), P00[c0][c1]);
    upd(rep.max_table_residual, P.entry(x, y01), P01[c0][c1]);
    upd(rep.max_table_residual, P.entry(x, y11), P11[c0][c1]);
    upd(rep.max_table_residual, ip(x, y00), IP00[c0][c1]);
    upd(rep.max_table_residual, ip(x, y01), IP01[c0][c1]);
    upd(rep.max_table_residual, ip(x, y11), -IP01[c0][c1]);  // IP(.,01) = -IP(.,11)

    // Product identities: IP(.,00) = -b . P(.,00), IP(.,01) = -a . P(.,01),
    // IP(.,10) = b . P(.,00), IP(.,11) = a . P(.,01), and rows of IP sum to 0.
    upd(rep.max_identity_residual, ip(x, y00), -w.b[c0][c1] * P.entry(x, y00));
    upd(rep.max_identity_residual, ip(x, y01), -w.a[c0][c1] * P.entry(x, y01));
    upd(rep.max_identity_residual, ip(x, y10), w.b[c0][c1] * P.entry(x, y00));
    upd(rep.max_identity_residual, ip(x, y11), w.a[c0][c1] * P.entry(x, y01));
    upd(rep.max_identity_residual, ip(x, y00) + ip(x, y01) + ip(x, y10) + ip(x, y11), 0.0);
  }

  // The induced block-pattern chain jumps (00,01)->(01,01) at 1,
  // (00,11)->(01,11) at 2, (01,01)->(11,01) at 1/2, (01,11)->(11,11) at 1.
  const double lump[3][3] = {{0, 1, 2}, {0, 0.5, 1}, {0, 0, 0}};
  for (std::uint32_t x = 0; x < 16; ++x) {
    const int c0 = block_pattern(x, 0), c1 = block_pattern(x, 1);
    double up = 0.0;  // total rate of moves raising the block-0 pattern
    for (auto& [x2, r] : I.row(x))
      if (block_pattern(x2, 0) != c0) up += r;
    rep.max_lump_residual = std::max(rep.max_lump_residual, std::fabs(up - lump[c0][c1]));
  }
  return rep;
}

}  // namespace hcp::exact
