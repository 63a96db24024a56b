#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "hcp/simulate.hpp"
#include "hcp/stats.hpp"

using namespace hcp;
using namespace hcp::sim;

namespace {

// Chi-square of simulated first effective jumps against the exact table.
double first_jump_p_value(const RateModel& model, int n, const SparseConfig& cfg,
                          std::int64_t draws, std::uint64_t seed) {
  auto table = first_jump_distribution(model, n, cfg);
  REQUIRE(table.total_rate > 0.0);
  std::map<std::pair<bool, std::int64_t>, std::int64_t> counts;
  Rng rng(seed);
  for (std::int64_t d = 0; d < draws; ++d) {
    auto tr = sample_first_jump(model, n, cfg, rng);
    counts[{tr.infection, tr.site}]++;
  }
  stats::ChiSquare chi;
  std::int64_t seen = 0;
  for (const auto& t : table.transitions) {
    double expected = static_cast<double>(draws) * t.rate / table.total_rate;
    std::int64_t obs = 0;
    auto it = counts.find({t.infection, t.site});
    if (it != counts.end()) obs = it->second;
    seen += obs;
    chi.add(static_cast<double>(obs), expected);
  }
  CHECK(seen == draws);  // nothing outside the enumerated support
  return chi.p_value();
}

// Shared event skeleton for the monotone coupling check: recovery marks are
// generated at the highest recovery rate with an attached uniform, and both
// processes replay the same marks and infection arrows; the process with
// recovery rate d accepts a mark iff its uniform is below d / d_max.
struct Skeleton {
  struct Ev {
    double t;
    bool recovery;
    std::int64_t site;       // recovery site or infection target
    std::int64_t source;     // infection source
    double u;                // acceptance uniform for recoveries
  };
  std::vector<Ev> events;

  static Skeleton build(const RateModel& model, int n, double delta_max, double t_max,
                        std::uint64_t seed) {
    const FlatLattice lat(model.N, n);
    Skeleton sk;
    Rng rng(seed);
    for (std::int64_t s = 0; s < lat.size; ++s) {
      for (double t = rng.exponential(delta_max); t < t_max; t += rng.exponential(delta_max))
        sk.events.push_back({t, true, s, -1, rng.next_double()});
      for (std::int64_t v = 0; v < lat.size; ++v) {
        if (v == s) continue;
        double rate = model.infection_rate_at(lat.hdist_index(s, v));
        if (rate <= 0.0) continue;
        for (double t = rng.exponential(rate); t < t_max; t += rng.exponential(rate))
          sk.events.push_back({t, false, s, v, 0.0});
      }
    }
    std::sort(sk.events.begin(), sk.events.end(),
              [](const Ev& a, const Ev& b) { return a.t < b.t; });
    return sk;
  }

  // Replays the skeleton at recovery rate delta; returns the infected set
  // after each event (as sorted site lists).
  std::vector<std::vector<std::int64_t>> replay(const RateModel& model, int n, double delta,
                                                double delta_max) const {
    SparseConfig cfg = SparseConfig::single_origin(model.N, n);
    std::vector<std::vector<std::int64_t>> trace;
    for (const auto& e : events) {
      if (e.recovery) {
        if (e.u < delta / delta_max) cfg.heal(e.site);
      } else if (cfg.is_infected(e.source)) {
        cfg.infect(e.site);
      }
      auto sites = cfg.infected_sites();
      std::sort(sites.begin(), sites.end());
      trace.push_back(std::move(sites));
    }
    return trace;
  }
};

}  // namespace

TEST_CASE("pure death: no infections possible") {
  RateModel model(2, 2.0, AlphaSeq::explicit_list({0.0, 0.0}));
  // Extinction time of m initial infections = max of m Exp(delta) clocks;
  // its mean is H_m / delta.
  const int m = 4;
  double mean = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    auto res = run_trajectory(model, 2, SparseConfig::full(2, 2), 100.0,
                              derive_stream_seed(5, r));
    REQUIRE(res.extinction_time.has_value());
    CHECK_FALSE(res.survived_to_t);
    mean += *res.extinction_time;
  }
  mean /= reps;
  double expect = (1.0 + 0.5 + 1.0 / 3.0 + 0.25) / 2.0;
  // sd of the max of 4 Exp(2) clocks: sqrt(sum 1/k^2) / 2 ~ 0.597
  double sd = 0.597;
  CHECK(std::fabs(mean - expect) < 5.0 * sd / std::sqrt(static_cast<double>(reps)));
  (void)m;
}

TEST_CASE("huge recovery rate: single-site death race") {
  RateModel model(2, 1e6, AlphaSeq::explicit_list({1.0}));
  double mean = 0.0;
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    auto res = run_trajectory(model, 1, SparseConfig::single_origin(2, 1), 1.0,
                              derive_stream_seed(17, r));
    REQUIRE(res.extinction_time.has_value());
    mean += *res.extinction_time;
  }
  mean /= reps;
  CHECK(std::fabs(mean - 1e-6) < 0.05e-6);
}

TEST_CASE("empty initial configuration") {
  RateModel model(2, 1.0, AlphaSeq::geometric(0.5));
  auto res = run_trajectory(model, 2, SparseConfig(2, 2), 3.0, 1);
  REQUIRE(res.extinction_time.has_value());
  CHECK(*res.extinction_time == 0.0);
  CHECK_FALSE(res.survived_to_t);
  CHECK(res.event_count == 0);
}

TEST_CASE("determinism and survival/extinction dichotomy") {
  RateModel model(2, 0.4, AlphaSeq::geometric(0.5));
  auto a = run_trajectory(model, 3, SparseConfig::single_origin(2, 3), 4.0, 99);
  auto b = run_trajectory(model, 3, SparseConfig::single_origin(2, 3), 4.0, 99);
  CHECK(a.survived_to_t == b.survived_to_t);
  CHECK(a.event_count == b.event_count);
  CHECK(a.final_infected_count == b.final_infected_count);
  if (a.extinction_time)
    CHECK(*a.extinction_time == *b.extinction_time);
  for (int r = 0; r < 200; ++r) {
    auto res = run_trajectory(model, 3, SparseConfig::single_origin(2, 3), 4.0,
                              derive_stream_seed(7, r));
    CHECK(res.survived_to_t == !(res.extinction_time && *res.extinction_time <= 4.0));
  }
}

TEST_CASE("first-jump law matches the exact enumeration") {
  // Single infected site on the one-level pair: recovery at delta, partner
  // infection at alpha_1/2.
  {
    RateModel model(2, 1.7, AlphaSeq::explicit_list({3.0}));
    auto cfg = SparseConfig::single_origin(2, 1);
    auto table = first_jump_distribution(model, 1, cfg);
    REQUIRE(table.transitions.size() == 2);
    CHECK(table.total_rate == Catch::Approx(1.7 + 1.5));
    CHECK(first_jump_p_value(model, 1, cfg, 200000, 31) > 1e-3);
  }
  // Full lattice: recoveries only.
  {
    RateModel model(3, 0.9, AlphaSeq::geometric(0.4));
    auto table = first_jump_distribution(model, 2, SparseConfig::full(3, 2));
    CHECK(table.transitions.size() == 9);
    for (auto& t : table.transitions) {
      CHECK_FALSE(t.infection);
      CHECK(t.rate == Catch::Approx(0.9));
    }
  }
  // Random-ish configurations on two-level lattices for both freedoms.
  for (int N : {2, 3}) {
    RateModel model(N, 0.6, AlphaSeq::geometric(0.5));
    SparseConfig cfg(N, 2);
    for (std::int64_t s = 0; s < N * N; s += 2) cfg.infect(s);
    CHECK(first_jump_p_value(model, 2, cfg, 200000, 1000 + N) > 1e-3);
  }
  CHECK_THROWS_AS(
      first_jump_distribution(RateModel(2, 1.0, AlphaSeq::geometric(0.5)), 13,
                              SparseConfig(2, 13)),
      std::invalid_argument);
}

TEST_CASE("survival estimate basics") {
  RateModel model(2, 1e-9, AlphaSeq::geometric(0.5));
  auto nop = estimate_survival(model, 2, SparseConfig::single_origin(2, 2), 0.0, 50, 3);
  CHECK(nop.p_hat == 1.0);

  auto nodeath = estimate_survival(model, 2, SparseConfig::single_origin(2, 2), 5.0, 2000, 3);
  CHECK(nodeath.p_hat == 1.0);

  CHECK_THROWS_AS(estimate_survival(model, 2, SparseConfig::single_origin(2, 2), 1.0, 0, 3),
                  std::invalid_argument);

  // Threaded and sequential runs agree exactly.
  RateModel busy(2, 0.5, AlphaSeq::geometric(0.5));
  auto seq = estimate_survival(busy, 3, SparseConfig::single_origin(2, 3), 2.0, 4000, 11, 1);
  auto par = estimate_survival(busy, 3, SparseConfig::single_origin(2, 3), 2.0, 4000, 11, 4);
  CHECK(seq.survived == par.survived);
}

TEST_CASE("raising the recovery rate never grows the infected set") {
  // Coupled-path comparison over a shared skeleton, 100 seeds.
  RateModel lo(2, 0.3, AlphaSeq::geometric(0.5));
  RateModel hi(2, 1.0, AlphaSeq::geometric(0.5));
  const double dmax = 1.0;
  for (int s = 0; s < 100; ++s) {
    auto sk = Skeleton::build(lo, 2, dmax, 3.0, derive_stream_seed(2025, s));
    auto tl = sk.replay(lo, 2, 0.3, dmax);
    auto th = sk.replay(hi, 2, 1.0, dmax);
    REQUIRE(tl.size() == th.size());
    for (std::size_t e = 0; e < tl.size(); ++e)
      CHECK(std::includes(tl[e].begin(), tl[e].end(), th[e].begin(), th[e].end()));
  }
}

TEST_CASE("trajectory dump has the documented shape") {
  RateModel model(2, 0.8, AlphaSeq::geometric(0.5));
  std::ostringstream os;
  auto res = run_trajectory(model, 2, SparseConfig::single_origin(2, 2), 2.0, 5, &os);
  std::istringstream is(os.str());
  std::string line;
  std::int64_t lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
  }
  CHECK(lines <= res.event_count);  // no-op events produce no rows
}
