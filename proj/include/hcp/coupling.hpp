#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcp/bounds.hpp"
#include "hcp/exactgen.hpp"
#include "hcp/lattice.hpp"
#include "hcp/rng.hpp"
#include "hcp/simulate.hpp"
#include "hcp/stats.hpp"

namespace hcp::coupling {

using exact::block_pattern;
using exact::kPat00;
using exact::kPat01;
using exact::kPat11;
using exact::PTable;
using exact::StarConvention;

// Per-block conditional draw: a 00 block maps to a healthy coarse site, an
// 11 block to an infected one, a mixed block to healthy with probability xi.
inline std::uint64_t init_conditional(std::uint64_t x_mask, int coarse_sites, double xi,
                                      Rng& rng) {
  std::uint64_t y = 0;
  for (int b = 0; b < coarse_sites; ++b) {
    std::uint64_t bits = (x_mask >> (2 * b)) & 3ull;
    bool infected = bits == 3ull || (bits != 0ull && !rng.bernoulli(xi));
    if (infected) y |= 1ull << b;
  }
  return y;
}

// ---------------------------------------------------------------------------
// The coupled tower
// ---------------------------------------------------------------------------
//
// Level 0 carries the fine contact process x on the freedom-2 lattice with
// 2^n sites. Pair m = 1..P couples the level-(m-1) process (x for m = 1,
// else the dominated process y_{m-1}) to a coarse companion ytilde_m and to
// the dominated contact process y_m <= ytilde_m, all on 2^(n-m) sites.
//
// Ordinary moves:
//   - fine/parent moves run at their contact rates reweighted by the kernel
//     ratio against the companion one pair down (a move of y_{m-1} is scaled
//     by p(new block pattern, ytilde_m) / p(old, ytilde_m));
//   - companion recoveries fire at rate delta(m) and recover y_m with them;
//   - companion infections i <- j fire at the a/b-weighted rates; when the
//     source is live in y_m too, the event is accepted for y_m with
//     probability 1/(2a), which leaves y_m infecting at exactly its contact
//     rate alpha_k(m) 2^-k;
//   - catch-up streams infect y_m(i) at its contact rate while
//     ytilde_m(i) = 1 is already ahead of y_m(i) = 0.
// Forced moves: a companion move into a state of zero kernel mass drags the
// parent with it (a recovery out of an 11 block recovers one block site
// uniformly, an infection into a 00 block infects a block site chosen
// proportionally to its parent-level infection pressure), recursing toward
// level 0 when the dragged parent move is itself a shared move.
class CoupledTower {
 public:
  struct Channel {
    enum Kind : int {
      x_recover,
      x_infect,
      pair_recover,
      pair_infect_accept,   // companion + dominated infected together
      pair_infect_tilde,    // companion only
      pair_extra            // dominated catch-up only
    };
    Kind kind;
    int pair;  // 0 for x_*, else 1..P
    int i;     // site acted on
    int j;     // source (infections); -1 otherwise
    double rate;
  };

  using Observer = std::function<void(double, const Channel&)>;

  CoupledTower(const RateModel& model, int n, int pairs, std::uint64_t seed,
               StarConvention conv = StarConvention::A)
      : n_(n), pairs_(pairs), conv_(conv), rng_(seed) {
    if (model.N != 2) throw std::invalid_argument("CoupledTower: coupling requires N = 2");
    if (n < 1 || n > 6) throw std::invalid_argument("CoupledTower: need 1 <= n <= 6");
    if (pairs < 1 || pairs > n) throw std::invalid_argument("CoupledTower: need 1 <= pairs <= n");
    for (int k = 1; k <= n; ++k) alpha0_.push_back(model.alpha.alpha(k));
    auto tr = bounds::renorm_recursion(model.delta, model.alpha, pairs);
    delta_ = tr.delta_seq;  // delta(0..pairs), bit-identical with the bounds module
    xi_ = tr.xi_seq;        // xi(0..pairs-1)
    y_.assign(pairs, 0);
    ytilde_.assign(pairs, 0);
  }

  int n() const { return n_; }
  int pairs() const { return pairs_; }
  const std::vector<double>& delta_seq() const { return delta_; }
  const std::vector<double>& xi_seq() const { return xi_; }
  std::uint64_t x() const { return x_; }
  std::uint64_t ytilde(int m) const { return ytilde_.at(m - 1); }
  std::uint64_t y(int m) const { return y_.at(m - 1); }
  double time() const { return t_; }
  std::int64_t domination_violations() const { return domination_violations_; }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  // Level-l process: x for l = 0, the dominated process otherwise.
  std::uint64_t level_state(int l) const { return l == 0 ? x_ : y_.at(l - 1); }

  // Start from a single infected site at the origin and draw every
  // companion level from its conditional block rule.
  void init_from_origin() { init_with(1ull); }

  void init_with(std::uint64_t x0) {
    x_ = x0;
    t_ = 0.0;
    for (int m = 1; m <= pairs_; ++m) {
      std::uint64_t parent = level_state(m - 1);
      std::uint64_t yt = init_conditional(parent, coarse_sites(m), xi_[m - 1], rng_);
      ytilde_[m - 1] = yt;
      y_[m - 1] = yt;
    }
    check_invariants();
  }

  // Install an explicit snapshot (kernel consistency is asserted).
  void set_state(std::uint64_t x0, std::vector<std::uint64_t> ytilde,
                 std::vector<std::uint64_t> y) {
    if (static_cast<int>(ytilde.size()) != pairs_ || static_cast<int>(y.size()) != pairs_)
      throw std::invalid_argument("set_state: wrong number of levels");
    x_ = x0;
    ytilde_ = std::move(ytilde);
    y_ = std::move(y);
    t_ = 0.0;
    check_invariants();
  }

  // Advances to t_max (or to absorption). Returns the terminal time.
  double run_until(double t_max) {
    while (x_ != 0) {
      build_channels();
      double total = 0.0;
      for (const auto& c : channels_) total += c.rate;
      if (total <= 0.0) throw std::logic_error("CoupledTower: stuck with live fine process");
      double dt = rng_.exponential(total);
      if (t_ + dt >= t_max) {
        t_ = t_max;
        break;
      }
      t_ += dt;
      execute(pick_channel(total));
      check_invariants();
    }
    if (x_ == 0 && t_ < t_max) t_ = t_max;  // absorbed; nothing happens afterwards
    return t_;
  }

  // Executes exactly one event (for snapshot-based first-jump tests).
  // Returns false if no event can fire.
  bool step_once(Channel* executed = nullptr) {
    if (x_ == 0) return false;
    build_channels();
    double total = 0.0;
    for (const auto& c : channels_) total += c.rate;
    if (total <= 0.0) return false;
    t_ += rng_.exponential(total);
    Channel c = pick_channel(total);
    execute(c);
    check_invariants();
    if (executed) *executed = c;
    return true;
  }

 private:
  int sites(int level) const { return 1 << (n_ - level); }
  int coarse_sites(int pair) const { return 1 << (n_ - pair); }

  static int hd(int a, int b) { return std::bit_width(static_cast<unsigned>(a ^ b)); }
  static int pattern_of(std::uint64_t mask, int block) {
    std::uint64_t bits = (mask >> (2 * block)) & 3ull;
    return bits == 0 ? kPat00 : (bits == 3ull ? kPat11 : kPat01);
  }

  // alpha_j at level l times 2^-j: exact power-of-two scaling of the base
  // sequence, alpha_j(l) = 2^-l alpha0_{j+l}.
  double pair_rate(int level, int j) const {
    int idx = j + level;  // 1-based index into alpha0
    if (idx > n_) return 0.0;
    return std::ldexp(alpha0_[idx - 1], -(level + j));
  }

  // Contact infection pressure on site s of the level-l process.
  double contact_rate(int level, int s) const {
    std::uint64_t mask = level_state(level);
    double rate = 0.0;
    for (int w = 0; w < sites(level); ++w)
      if ((mask >> w) & 1ull && w != s) rate += pair_rate(level, hd(s, w));
    return rate;
  }

  // Kernel ratio seen by pair `pair` when its parent site `site` flips to
  // `newbit`. The invariant P(parent, ytilde) > 0 guarantees the
  // denominator is positive.
  double parent_flip_ratio(int pair, int site, int newbit) const {
    std::uint64_t parent = level_state(pair - 1);
    int block = site >> 1;
    int oldpat = pattern_of(parent, block);
    std::uint64_t flipped = parent ^ (1ull << site);
    if (((parent >> site) & 1ull) == static_cast<std::uint64_t>(newbit))
      throw std::logic_error("parent_flip_ratio: site already in target state");
    int newpat = pattern_of(flipped, block);
    PTable p(xi_[pair - 1]);
    int c = static_cast<int>((ytilde_[pair - 1] >> block) & 1ull);
    double denom = p(oldpat, c);
    if (denom <= 0.0) throw std::logic_error("parent_flip_ratio: zero-mass current state");
    return p(newpat, c) / denom;
  }

  void build_channels() {
    channels_.clear();

    // Fine-level moves, reweighted through pair 1.
    for (int s = 0; s < sites(0); ++s) {
      bool infected = (x_ >> s) & 1ull;
      if (infected) {
        double r = delta_[0] * parent_flip_ratio(1, s, 0);
        if (r > 0.0) channels_.push_back({Channel::x_recover, 0, s, -1, r});
      } else {
        double lam = contact_rate(0, s);
        if (lam > 0.0) {
          double r = lam * parent_flip_ratio(1, s, 1);
          if (r > 0.0) channels_.push_back({Channel::x_infect, 0, s, -1, r});
        }
      }
    }

    for (int m = 1; m <= pairs_; ++m) {
      const int C = coarse_sites(m);
      const std::uint64_t yt = ytilde_[m - 1], ym = y_[m - 1];
      const std::uint64_t parent = level_state(m - 1);
      const exact::ABTables w(xi_[m - 1], conv_);

      for (int i = 0; i < C; ++i) {
        bool ti = (yt >> i) & 1ull;
        if (ti) {
          // Companion recovery, shared by the dominated process.
          double r = delta_[m];
          if (((ym >> i) & 1ull) && m < pairs_) r *= parent_flip_ratio(m + 1, i, 0);
          if (r > 0.0) channels_.push_back({Channel::pair_recover, m, i, -1, r});

          // Catch-up stream: the dominated process infects i at its own
          // contact rate while the companion is already ahead there.
          if (!((ym >> i) & 1ull)) {
            double lam = 0.0;
            for (int j = 0; j < C; ++j)
              if (((ym >> j) & 1ull) && j != i) lam += pair_rate(m, hd(i, j));
            if (lam > 0.0) {
              if (m < pairs_) lam *= parent_flip_ratio(m + 1, i, 1);
              if (lam > 0.0) channels_.push_back({Channel::pair_extra, m, i, -1, lam});
            }
          }
          continue;
        }
        // Companion infections i <- j.
        for (int j = 0; j < C; ++j) {
          if (j == i) continue;
          int k = hd(i, j);
          double base = std::ldexp(alpha0_.at(k + m - 1), -(m - 1) - k);  // alpha_{k+1}(m-1) 2^-k
          if (base <= 0.0) continue;
          int pi = pattern_of(parent, i);
          int pj = pattern_of(parent, j);
          bool a_type = (yt >> j) & 1ull;
          double weight = a_type ? w.a[pi][pj] : w.b[pi][pj];
          double r = base * weight;
          if (r <= 0.0) continue;
          if (a_type && ((ym >> j) & 1ull)) {
            double accept = 0.5 / weight;  // cancels the weight: y infects at alpha_k(m) 2^-k
            double racc = r * accept;
            if (m < pairs_) racc *= parent_flip_ratio(m + 1, i, 1);
            if (racc > 0.0)
              channels_.push_back({Channel::pair_infect_accept, m, i, j, racc});
            double rrej = r * (1.0 - accept);
            if (rrej > 0.0)
              channels_.push_back({Channel::pair_infect_tilde, m, i, j, rrej});
          } else {
            channels_.push_back({Channel::pair_infect_tilde, m, i, j, r});
          }
        }
      }
    }
  }

  Channel pick_channel(double total) {
    double u = rng_.next_double() * total;
    for (const auto& c : channels_) {
      if (u < c.rate) return c;
      u -= c.rate;
    }
    return channels_.back();
  }

  void execute(const Channel& c) {
    switch (c.kind) {
      case Channel::x_recover: x_ &= ~(1ull << c.i); break;
      case Channel::x_infect: x_ |= 1ull << c.i; break;
      case Channel::pair_recover: {
        int m = c.pair;
        bool forced = pattern_of(level_state(m - 1), c.i) == kPat11;
        ytilde_[m - 1] &= ~(1ull << c.i);
        y_[m - 1] &= ~(1ull << c.i);
        if (forced) {
          int site = 2 * c.i + static_cast<int>(rng_.below(2));
          force_recover_site(m - 1, site);
        }
        break;
      }
      case Channel::pair_infect_accept:
      case Channel::pair_infect_tilde: {
        int m = c.pair;
        bool forced = pattern_of(level_state(m - 1), c.i) == kPat00;
        ytilde_[m - 1] |= 1ull << c.i;
        if (c.kind == Channel::pair_infect_accept) y_[m - 1] |= 1ull << c.i;
        if (forced) force_infect_block(m - 1, c.i);
        break;
      }
      case Channel::pair_extra: {
        y_[c.pair - 1] |= 1ull << c.i;
        break;
      }
    }
    if (observer_) observer_(t_, c);
  }

  // Recover the level-l process at a given site, cascading upward: for
  // l >= 1 the only way y_l loses a site is together with its companion.
  void force_recover_site(int level, int site) {
    if (level == 0) {
      if (!((x_ >> site) & 1ull)) throw std::logic_error("force_recover_site: healthy fine site");
      x_ &= ~(1ull << site);
      return;
    }
    if (!((y_[level - 1] >> site) & 1ull) || !((ytilde_[level - 1] >> site) & 1ull))
      throw std::logic_error("force_recover_site: inconsistent dominated state");
    bool forced = pattern_of(level_state(level - 1), site) == kPat11;
    ytilde_[level - 1] &= ~(1ull << site);
    y_[level - 1] &= ~(1ull << site);
    if (forced) {
      int deeper = 2 * site + static_cast<int>(rng_.below(2));
      force_recover_site(level - 1, deeper);
    }
  }

  // Infect one site of block `block` of the level-l process, choosing the
  // site proportionally to its infection pressure at that level.
  void force_infect_block(int level, int block) {
    int s0 = 2 * block, s1 = 2 * block + 1;
    double l0 = contact_rate(level, s0), l1 = contact_rate(level, s1);
    if (!(l0 + l1 > 0.0))
      throw std::logic_error("force_infect_block: no infection pressure on forced block");
    int site = rng_.next_double() * (l0 + l1) < l0 ? s0 : s1;
    force_infect_site(level, site);
  }

  void force_infect_site(int level, int site) {
    if (level == 0) {
      if ((x_ >> site) & 1ull) throw std::logic_error("force_infect_site: fine site already infected");
      x_ |= 1ull << site;
      return;
    }
    if ((y_[level - 1] >> site) & 1ull)
      throw std::logic_error("force_infect_site: dominated site already infected");
    if ((ytilde_[level - 1] >> site) & 1ull) {
      // Companion already ahead: the dominated process catches up alone.
      y_[level - 1] |= 1ull << site;
      return;
    }
    bool forced = pattern_of(level_state(level - 1), site) == kPat00;
    ytilde_[level - 1] |= 1ull << site;
    y_[level - 1] |= 1ull << site;
    if (forced) force_infect_block(level - 1, site);
  }

  // Pathwise invariants: domination y <= ytilde at every level, and kernel
  // support P(parent, ytilde) > 0 for every pair.
  void check_invariants() {
    for (int m = 1; m <= pairs_; ++m) {
      if (y_[m - 1] & ~ytilde_[m - 1]) {
        ++domination_violations_;
        throw std::logic_error("CoupledTower: domination violated at pair " + std::to_string(m));
      }
      std::uint64_t parent = level_state(m - 1);
      for (int i = 0; i < coarse_sites(m); ++i) {
        int pat = pattern_of(parent, i);
        bool t = (ytilde_[m - 1] >> i) & 1ull;
        if ((pat == kPat00 && t) || (pat == kPat11 && !t))
          throw std::logic_error("CoupledTower: kernel support violated at pair " +
                                 std::to_string(m));
      }
    }
  }

  int n_;
  int pairs_;
  StarConvention conv_;
  Rng rng_;
  std::vector<double> alpha0_;  // alpha_1..alpha_n of the fine model
  std::vector<double> delta_;   // delta(0..pairs)
  std::vector<double> xi_;      // xi(0..pairs-1)
  std::uint64_t x_ = 0;
  std::vector<std::uint64_t> ytilde_, y_;
  double t_ = 0.0;
  std::vector<Channel> channels_;
  Observer observer_;
  std::int64_t domination_violations_ = 0;
};

// ---------------------------------------------------------------------------
// Frozen-parent companion dynamics (a test mode): the fine state is pinned,
// the companion runs the a/b-weighted dynamics alone, and the dominated
// process thins it. With an all-ones parent every weight lookup lands on a
// star entry, so under convention A acceptance is certain and y == ytilde
// stays an exact identity.
// ---------------------------------------------------------------------------

struct FrozenRun {
  std::uint64_t ytilde;
  std::uint64_t y;
  std::int64_t events = 0;
  bool identical_throughout = true;
};

inline FrozenRun run_addon_frozen(const RateModel& model, int n, std::uint64_t x_pinned,
                                  std::uint64_t ytilde0, double t_max, std::uint64_t seed,
                                  StarConvention conv = StarConvention::A) {
  if (model.N != 2) throw std::invalid_argument("run_addon_frozen: requires N = 2");
  if (n < 1 || n > 6) throw std::invalid_argument("run_addon_frozen: need 1 <= n <= 6");
  const int C = 1 << (n - 1);
  double xi = bounds::xi_function(model.alpha.alpha(1) / model.delta);
  double delta_prime = 2.0 * xi * model.delta;
  exact::ABTables w(xi, conv);
  Rng rng(seed);
  FrozenRun run{ytilde0, ytilde0, 0, true};
  double t = 0.0;

  auto pattern = [&](int block) {
    std::uint64_t bits = (x_pinned >> (2 * block)) & 3ull;
    return bits == 0 ? kPat00 : (bits == 3ull ? kPat11 : kPat01);
  };

  while (true) {
    struct Ev { int i, j; double rate; bool recover; bool a_type; };
    std::vector<Ev> evs;
    double total = 0.0;
    for (int i = 0; i < C; ++i) {
      if ((run.ytilde >> i) & 1ull) {
        evs.push_back({i, -1, delta_prime, true, false});
        total += delta_prime;
        continue;
      }
      for (int j = 0; j < C; ++j) {
        if (j == i) continue;
        int k = std::bit_width(static_cast<unsigned>(i ^ j));
        double base = std::ldexp(model.alpha.alpha(k + 1), -k);  // alpha_{k+1} 2^-k
        bool a_type = (run.ytilde >> j) & 1ull;
        double weight = a_type ? w.a[pattern(i)][pattern(j)] : w.b[pattern(i)][pattern(j)];
        if (base * weight > 0.0) {
          evs.push_back({i, j, base * weight, false, a_type});
          total += base * weight;
        }
      }
    }
    if (total <= 0.0) break;
    double dt = rng.exponential(total);
    if (t + dt >= t_max) break;
    t += dt;
    ++run.events;
    double u = rng.next_double() * total;
    const Ev* pick = &evs.back();
    for (const auto& e : evs) {
      if (u < e.rate) { pick = &e; break; }
      u -= e.rate;
    }
    if (pick->recover) {
      run.ytilde &= ~(1ull << pick->i);
      run.y &= ~(1ull << pick->i);
    } else {
      run.ytilde |= 1ull << pick->i;
      double weight = pick->a_type ? w.a[pattern(pick->i)][pattern(pick->j)]
                                   : w.b[pattern(pick->i)][pattern(pick->j)];
      bool accept = pick->a_type && ((run.y >> pick->j) & 1ull) &&
                    rng.bernoulli(std::min(1.0, 0.5 / weight));
      if (accept) run.y |= 1ull << pick->i;
    }
    if (run.y != run.ytilde) run.identical_throughout = false;
  }
  return run;
}

// ---------------------------------------------------------------------------
// Statistical test drivers
// ---------------------------------------------------------------------------

struct StratumReport {
  std::uint64_t x;
  std::int64_t count = 0;
  bool tested = false;
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;

  nlohmann::json to_json() const {
    return {{"x", x}, {"count", count}, {"tested", tested},
            {"chi2", chi2}, {"df", df}, {"p", p}};
  }
};

struct ConditionalLawReport {
  int n = 0;
  double t = 0.0;
  std::int64_t replicas = 0;
  std::vector<StratumReport> strata;
  double pooled_chi2 = 0.0;
  int pooled_df = 0;
  double pooled_p = 1.0;
  std::int64_t support_violations = 0;   // mass observed where the kernel has none
  std::int64_t domination_violations = 0;
  std::int64_t strata_tested = 0;
  bool inconclusive = false;

  bool pass(double significance = 1e-3) const {
    return !inconclusive && support_violations == 0 && domination_violations == 0 &&
           pooled_p > significance;
  }

  nlohmann::json to_json() const {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : strata) js.push_back(s.to_json());
    return {{"schema", "hcp/1"},
            {"test", "conditional_law"},
            {"n", n},
            {"t", t},
            {"replicas", replicas},
            {"strata", js},
            {"pooled_chi2", pooled_chi2},
            {"pooled_df", pooled_df},
            {"pooled_p", pooled_p},
            {"support_violations", support_violations},
            {"domination_violations", domination_violations},
            {"pass", pass()}};
  }
};

// Replicates the coupled pair from a single origin infection, stratifies
// the outcomes by the fine state at time t, and chi-square-tests the
// empirical companion law in each well-populated stratum against the
// conditional block rule. Independent strata pool by adding statistics and
// degrees of freedom.
inline ConditionalLawReport conditional_law_test(const RateModel& model, int n, double t,
                                                 std::int64_t replicas, std::uint64_t seed,
                                                 double min_expected = 5.0) {
  if (n < 2 || n > 3) throw std::invalid_argument("conditional_law_test: need n in {2, 3}");
  if (replicas < 1) throw std::invalid_argument("conditional_law_test: replicas must be >= 1");
  ConditionalLawReport rep;
  rep.n = n;
  rep.t = t;
  rep.replicas = replicas;

  const std::uint32_t ny = 1u << (1 << (n - 1));
  std::map<std::uint64_t, std::vector<std::int64_t>> counts;
  std::int64_t dom_viol = 0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    CoupledTower tower(model, n, 1, derive_stream_seed(seed, r));
    tower.init_from_origin();
    tower.run_until(t);
    auto& bucket = counts[tower.x()];
    if (bucket.empty()) bucket.assign(ny, 0);
    bucket[tower.ytilde(1)]++;
    dom_viol += tower.domination_violations();
  }
  rep.domination_violations = dom_viol;

  double xi = bounds::xi_function(model.alpha.alpha(1) / model.delta);
  exact::CoarseKernel kernel(n, xi);
  for (auto& [xs, bucket] : counts) {
    StratumReport sr;
    sr.x = xs;
    for (auto c : bucket) sr.count += c;
    std::vector<double> expected(ny, 0.0);
    double min_exp = kPosInf;
    for (std::uint32_t ys = 0; ys < ny; ++ys) {
      double p = kernel.entry(static_cast<std::uint32_t>(xs), ys);
      expected[ys] = p * static_cast<double>(sr.count);
      if (p == 0.0 && bucket[ys] > 0) ++rep.support_violations;
      if (p > 0.0) min_exp = std::min(min_exp, expected[ys]);
    }
    if (min_exp >= min_expected) {
      stats::ChiSquare chi;
      for (std::uint32_t ys = 0; ys < ny; ++ys)
        if (expected[ys] > 0.0) chi.add(static_cast<double>(bucket[ys]), expected[ys]);
      sr.tested = chi.categories >= 2;
      if (sr.tested) {
        sr.chi2 = chi.stat;
        sr.df = static_cast<int>(chi.df());
        sr.p = chi.p_value();
        rep.pooled_chi2 += sr.chi2;
        rep.pooled_df += sr.df;
        ++rep.strata_tested;
      }
    }
    rep.strata.push_back(sr);
  }
  if (rep.pooled_df == 0) {
    rep.inconclusive = true;
  } else {
    rep.pooled_p = stats::chi2_sf(rep.pooled_chi2, rep.pooled_df);
  }
  return rep;
}

struct MarginalReport {
  int n = 0;
  double t = 0.0;
  std::int64_t replicas = 0;
  double tv_vs_plain = -1.0;  // coupled empirical law vs plain-sampler law
  double tv_vs_exact = -1.0;  // coupled empirical law vs dense transient law (n <= 2)

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"}, {"test", "marginal"},       {"n", n},
            {"t", t},            {"replicas", replicas},     {"tv_vs_plain", tv_vs_plain},
            {"tv_vs_exact", tv_vs_exact}};
  }
};

// Law of the fine state at time t under the coupled dynamics versus (a) the
// plain thinning sampler and (b) the dense transient law when available.
inline MarginalReport marginal_test(const RateModel& model, int n, double t,
                                    std::int64_t replicas, std::uint64_t seed) {
  if (n < 1 || n > 2) throw std::invalid_argument("marginal_test: need n in {1, 2}");
  MarginalReport rep;
  rep.n = n;
  rep.t = t;
  rep.replicas = replicas;
  const std::uint32_t nx = 1u << (1 << n);

  std::vector<std::int64_t> coupled(nx, 0);
  for (std::int64_t r = 0; r < replicas; ++r) {
    CoupledTower tower(model, n, 1, derive_stream_seed(seed, r));
    tower.init_from_origin();
    tower.run_until(t);
    coupled[tower.x()]++;
  }

  std::vector<std::int64_t> plain(nx, 0);
  for (std::int64_t r = 0; r < replicas; ++r) {
    sim::SparseConfig cfg = sim::SparseConfig::single_origin(2, n);
    sim::SparseConfig out(2, n);
    sim::run_trajectory(model, n, cfg, t, derive_stream_seed(seed ^ 0x5bd1e995u, r), nullptr,
                        &out);
    std::uint32_t mask = 0;
    for (auto s : out.infected_sites()) mask |= 1u << s;
    plain[mask]++;
  }
  rep.tv_vs_plain = stats::total_variation(coupled, plain);

  std::vector<double> alpha;
  for (int k = 1; k <= n; ++k) alpha.push_back(model.alpha.alpha(k));
  auto gen = exact::build_contact_generator(n, model.delta, alpha);
  std::vector<double> init(nx, 0.0);
  init[1] = 1.0;
  auto law = exact::transient_distribution(gen, init, t);
  rep.tv_vs_exact = stats::total_variation_vs_exact(coupled, law);
  return rep;
}

// ---------------------------------------------------------------------------
// Cascade: the full tower from level n down to the single-site level.
// ---------------------------------------------------------------------------

struct CascadeResult {
  int n = 0;
  double t = 0.0;
  std::vector<std::uint64_t> initial;  // level-l dominated state at time 0, l = 0..n
  std::vector<std::uint64_t> final_;   // ... and at time t
  std::vector<bool> survived;          // level-l process nonzero at time t

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"}, {"test", "cascade"}, {"n", n}, {"t", t},
            {"initial", initial}, {"final", final_},
            {"survived", std::vector<int>(survived.begin(), survived.end())}};
  }
};

// One cascade trajectory: level l of the output is the level-l dominated
// process (level 0 = the fine process itself, level n = the single bit that
// dies at rate delta(n)).
inline CascadeResult run_cascade(const RateModel& model, int n, double t, std::uint64_t seed) {
  CoupledTower tower(model, n, n, seed);
  tower.init_from_origin();
  CascadeResult res;
  res.n = n;
  res.t = t;
  for (int l = 0; l <= n; ++l) res.initial.push_back(tower.level_state(l));
  tower.run_until(t);
  for (int l = 0; l <= n; ++l) {
    res.final_.push_back(tower.level_state(l));
    res.survived.push_back(tower.level_state(l) != 0);
  }
  return res;
}

struct CascadeBatchReport {
  int n = 0;
  double t = 0.0;
  std::int64_t replicas = 0;
  std::vector<double> init_freq;    // level l alive at time 0
  std::vector<double> init_expect;  // prod_{k<l} (1 - xi(k))
  std::vector<double> init_z;
  std::vector<double> final_freq;
  double bottom_expect = 0.0;  // prod (1 - xi(k)) exp(-delta(n) t)
  double bottom_z = 0.0;
  std::int64_t monotone_violations = 0;  // fine level dead but a coarse level alive

  bool pass(double z_max = 3.0) const {
    if (monotone_violations != 0) return false;
    for (double z : init_z)
      if (std::fabs(z) > z_max) return false;
    return std::fabs(bottom_z) <= z_max;
  }

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},       {"test", "cascade"},
            {"n", n},                  {"t", t},
            {"replicas", replicas},    {"init_freq", init_freq},
            {"init_expect", init_expect}, {"init_z", init_z},
            {"final_freq", final_freq},   {"bottom_expect", bottom_expect},
            {"bottom_z", bottom_z},    {"monotone_violations", monotone_violations},
            {"pass", pass()}};
  }
};

// Replicated cascades: the level-l initial state is a single infection with
// probability prod_{k<l} (1 - xi(k)) and empty otherwise, and the bottom
// level survives to time t with the product further damped by
// exp(-delta(n) t). Both are tested at 3 sigma, along with the pathwise
// implication "fine level dead => every coarse level dead".
inline CascadeBatchReport cascade_batch(const RateModel& model, int n, double t,
                                        std::int64_t replicas, std::uint64_t seed) {
  CascadeBatchReport rep;
  rep.n = n;
  rep.t = t;
  rep.replicas = replicas;
  std::vector<std::int64_t> init_alive(n + 1, 0), final_alive(n + 1, 0);
  for (std::int64_t r = 0; r < replicas; ++r) {
    auto cas = run_cascade(model, n, t, derive_stream_seed(seed, r));
    for (int l = 0; l <= n; ++l) {
      if (cas.initial[l] != 0) ++init_alive[l];
      if (cas.final_[l] != 0) ++final_alive[l];
    }
    if (!cas.survived[0])
      for (int l = 1; l <= n; ++l)
        if (cas.survived[l]) ++rep.monotone_violations;
  }
  auto tr = bounds::renorm_recursion(model.delta, model.alpha, n);
  for (int l = 0; l <= n; ++l) {
    double freq = static_cast<double>(init_alive[l]) / replicas;
    double expect = l == 0 ? 1.0 : tr.product_partial[l - 1];
    double se = std::sqrt(std::max(expect * (1.0 - expect), 1e-12) / replicas);
    rep.init_freq.push_back(freq);
    rep.init_expect.push_back(expect);
    rep.init_z.push_back(l == 0 ? 0.0 : (freq - expect) / se);
    rep.final_freq.push_back(static_cast<double>(final_alive[l]) / replicas);
  }
  rep.bottom_expect = tr.product_partial[n - 1] * std::exp(-tr.delta_seq[n] * t);
  double se = std::sqrt(std::max(rep.bottom_expect * (1.0 - rep.bottom_expect), 1e-12) / replicas);
  rep.bottom_z = (rep.final_freq[n] - rep.bottom_expect) / se;
  return rep;
}

}  // namespace hcp::coupling
