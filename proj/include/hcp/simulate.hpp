#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hcp/lattice.hpp"
#include "hcp/rng.hpp"
#include "hcp/stats.hpp"

namespace hcp::sim {

// Infected set with O(1) insert/erase/uniform-pick over a flat lattice.
class SparseConfig {
 public:
  SparseConfig(int N, int n) : lat_(N, n), slot_(lat_.size, -1) {}

  static SparseConfig single_origin(int N, int n) {
    SparseConfig c(N, n);
    c.infect(0);
    return c;
  }
  static SparseConfig full(int N, int n) {
    SparseConfig c(N, n);
    for (std::int64_t s = 0; s < c.lat_.size; ++s) c.infect(s);
    return c;
  }

  const FlatLattice& lattice() const { return lat_; }
  std::int64_t count() const { return static_cast<std::int64_t>(infected_.size()); }
  bool empty() const { return infected_.empty(); }
  bool is_infected(std::int64_t site) const { return slot_[site] >= 0; }
  const std::vector<std::int64_t>& infected_sites() const { return infected_; }

  void infect(std::int64_t site) {
    if (slot_[site] >= 0) return;
    slot_[site] = static_cast<std::int64_t>(infected_.size());
    infected_.push_back(site);
  }

  void heal(std::int64_t site) {
    std::int64_t pos = slot_[site];
    if (pos < 0) return;
    std::int64_t last = infected_.back();
    infected_[pos] = last;
    slot_[last] = pos;
    infected_.pop_back();
    slot_[site] = -1;
  }

  std::int64_t pick_infected(Rng& rng) const {
    return infected_[rng.below(infected_.size())];
  }

 private:
  FlatLattice lat_;
  std::vector<std::int64_t> slot_;
  std::vector<std::int64_t> infected_;
};

struct SimResult {
  bool survived_to_t = false;
  std::optional<double> extinction_time;
  std::int64_t final_infected_count = 0;
  std::int64_t event_count = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"survived", survived_to_t},
                     {"final_infected", final_infected_count},
                     {"events", event_count},
                     {"seed", seed}};
    j["extinction_time"] = extinction_time ? nlohmann::json(*extinction_time) : nlohmann::json();
    return j;
  }
};

// Per-level alpha truncation plus the cumulative distance weights the
// thinning sampler draws from. alpha_k with k <= n only; the per-site
// outgoing infection rate is (1 - 1/N) sum_k alpha_k.
struct TruncatedRates {
  int N;
  int n;
  double delta;
  std::vector<double> alpha;      // alpha_1..alpha_n
  std::vector<double> cum_alpha;  // cumulative sums for distance sampling
  double alpha_total = 0.0;
  double per_site_infection = 0.0;

  TruncatedRates(const RateModel& model, int n_) : N(model.N), n(n_), delta(model.delta) {
    if (n < 0) throw std::invalid_argument("TruncatedRates: n must be >= 0");
    for (int k = 1; k <= n; ++k) {
      alpha.push_back(model.alpha.alpha(k));
      alpha_total += alpha.back();
      cum_alpha.push_back(alpha_total);
    }
    per_site_infection = (1.0 - 1.0 / N) * alpha_total;
  }

  int sample_distance(Rng& rng) const {
    double u = rng.next_double() * alpha_total;
    for (int k = 0; k < n; ++k)
      if (u < cum_alpha[k]) return k + 1;
    return n;
  }
};

// One trajectory of the contact process on the level-n lattice, sampled
// exactly in distribution by distance thinning: every event picks a uniform
// infected source; with probability delta / (delta + (1-1/N) sum alpha) the
// source recovers, otherwise a distance k is drawn proportional to alpha_k
// and a uniform site at distance exactly k is proposed (a no-op if it is
// already infected). Time advances by exponential clocks at the current
// total rate; there is no discretization anywhere.
inline SimResult run_trajectory(const RateModel& model, int n, SparseConfig config, double t_max,
                                std::uint64_t seed, std::ostream* dump = nullptr,
                                SparseConfig* final_config = nullptr) {
  if (!(t_max >= 0.0)) throw std::invalid_argument("run_trajectory: t_max must be >= 0");
  auto started = std::chrono::steady_clock::now();
  TruncatedRates rates(model, n);
  Rng rng(seed);
  SimResult res;
  res.seed = seed;

  double t = 0.0;
  if (config.empty()) {
    res.extinction_time = 0.0;
  } else {
    const double per_site = rates.delta + rates.per_site_infection;
    while (true) {
      double total = static_cast<double>(config.count()) * per_site;
      double dt = rng.exponential(total);
      if (t + dt >= t_max) {
        t = t_max;
        res.survived_to_t = true;
        break;
      }
      t += dt;
      ++res.event_count;
      std::int64_t src = config.pick_infected(rng);
      if (rng.next_double() * per_site < rates.delta) {
        config.heal(src);
        if (dump)
          (*dump) << t << ",recover," << src << "," << config.count() << "\n";
        if (config.empty()) {
          res.extinction_time = t;
          break;
        }
      } else {
        int k = rates.sample_distance(rng);
        std::int64_t tgt = config.lattice().sample_at_distance(src, k, rng);
        if (!config.is_infected(tgt)) {
          config.infect(tgt);
          if (dump)
            (*dump) << t << ",infect," << tgt << "," << config.count() << "\n";
        }
        // already-infected target: thinning no-op
      }
    }
  }
  res.final_infected_count = config.count();
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (final_config) *final_config = std::move(config);
  return res;
}

struct SurvivalEstimate {
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::int64_t replicas = 0;
  std::int64_t survived = 0;

  nlohmann::json to_json() const {
    return {{"p_hat", p_hat}, {"stderr", stderr_}, {"replicas", replicas}, {"survived", survived}};
  }
};

namespace detail {

template <class Fn>
void parallel_replicas(std::int64_t replicas, int threads, Fn&& body) {
  if (threads <= 1 || replicas < 256) {
    for (std::int64_t r = 0; r < replicas; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  std::int64_t chunk = (replicas + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    std::int64_t lo = w * chunk, hi = std::min(replicas, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::int64_t r = lo; r < hi; ++r) body(r);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Fraction of independent trajectories alive at time t, with binomial
// standard error. Replica r runs on the stream hash(seed, r), so the
// estimate does not depend on scheduling or replica order.
inline SurvivalEstimate estimate_survival(const RateModel& model, int n,
                                          const SparseConfig& init, double t,
                                          std::int64_t replicas, std::uint64_t seed,
                                          int threads = 1) {
  if (replicas < 1) throw std::invalid_argument("estimate_survival: replicas must be >= 1");
  std::vector<std::uint8_t> alive(replicas, 0);
  detail::parallel_replicas(replicas, threads, [&](std::int64_t r) {
    SimResult res = run_trajectory(model, n, init, t, derive_stream_seed(seed, r));
    alive[r] = res.survived_to_t ? 1 : 0;
  });
  SurvivalEstimate est;
  est.replicas = replicas;
  for (auto a : alive) est.survived += a;
  est.p_hat = static_cast<double>(est.survived) / static_cast<double>(replicas);
  est.stderr_ = stats::binomial_stderr(est.p_hat, replicas);
  return est;
}

// ---------------------------------------------------------------------------
// Exact first-jump enumeration (the oracle the thinning sampler is tested
// against) and a matching sampler of the first effective jump.
// ---------------------------------------------------------------------------

struct Transition {
  bool infection;      // false = recovery
  std::int64_t site;
  double rate;
};

struct FirstJumpTable {
  std::vector<Transition> transitions;
  double total_rate = 0.0;
};

// Direct double loop over sites: recovery delta per infected site, and for
// every healthy site the sum of pair rates from all infected sites.
inline FirstJumpTable first_jump_distribution(const RateModel& model, int n,
                                              const SparseConfig& config) {
  const FlatLattice& lat = config.lattice();
  if (lat.size > 4096)
    throw std::invalid_argument("first_jump_distribution: exact enumeration needs N^n <= 4096");
  TruncatedRates rates(model, n);
  FirstJumpTable table;
  for (std::int64_t s = 0; s < lat.size; ++s) {
    if (config.is_infected(s)) {
      table.transitions.push_back({false, s, rates.delta});
      table.total_rate += rates.delta;
    } else {
      double rate = 0.0;
      for (std::int64_t v : config.infected_sites()) {
        int k = lat.hdist_index(s, v);
        rate += rates.alpha[k - 1] * std::exp(-k * std::log(static_cast<double>(lat.N)));
      }
      if (rate > 0.0) {
        table.transitions.push_back({true, s, rate});
        table.total_rate += rate;
      }
    }
  }
  return table;
}

// First state-changing jump drawn with the production sampler (no-op
// proposals are skipped, which leaves the embedded-jump law untouched).
inline Transition sample_first_jump(const RateModel& model, int n, const SparseConfig& config,
                                    Rng& rng) {
  if (config.empty()) throw std::invalid_argument("sample_first_jump: empty configuration");
  TruncatedRates rates(model, n);
  const double per_site = rates.delta + rates.per_site_infection;
  SparseConfig work = config;
  for (;;) {
    std::int64_t src = work.pick_infected(rng);
    if (rng.next_double() * per_site < rates.delta) return {false, src, 0.0};
    int k = rates.sample_distance(rng);
    std::int64_t tgt = work.lattice().sample_at_distance(src, k, rng);
    if (!work.is_infected(tgt)) return {true, tgt, 0.0};
  }
}

}  // namespace hcp::sim
