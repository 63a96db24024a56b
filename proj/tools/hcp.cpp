// Command-line front end: reproducible experiments over the library with
// JSON/CSV outputs. Exit codes: 0 = all checks passed, 1 = a scientific
// check failed, 2 = usage or configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcp/bounds.hpp"
#include "hcp/coupling.hpp"
#include "hcp/exactgen.hpp"
#include "hcp/lattice.hpp"
#include "hcp/simulate.hpp"

namespace {

using nlohmann::json;

struct Output {
  std::ofstream file;
  bool to_file = false;

  void open(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw std::runtime_error("cannot open output file: " + path);
    to_file = true;
  }
  std::ostream& stream() { return to_file ? static_cast<std::ostream&>(file) : std::cout; }
  void line(const json& j) { stream() << j.dump() << "\n"; }
};

hcp::AlphaSeq parse_alpha(const std::string& text, int N) {
  return hcp::AlphaSeq::parse(text, N);
}

// --------------------------------------------------------------------------
// simulate
// --------------------------------------------------------------------------

struct SimulateArgs {
  int N = 2;
  int n = 3;
  double delta = 0.1;
  std::string alpha;
  double t = 5.0;
  std::int64_t replicas = 1;
  std::uint64_t seed = 1;
  std::string init = "single";
  int threads = 0;
  std::string out;
  std::string dump;
};

int cmd_simulate(const SimulateArgs& a) {
  hcp::RateModel model(a.N, a.delta, parse_alpha(a.alpha, a.N));
  hcp::sim::SparseConfig init = a.init == "full" ? hcp::sim::SparseConfig::full(a.N, a.n)
                                                 : hcp::sim::SparseConfig::single_origin(a.N, a.n);
  Output out;
  out.open(a.out);

  if (!a.dump.empty()) {
    std::ofstream dump(a.dump);
    if (!dump) throw std::runtime_error("cannot open dump file: " + a.dump);
    dump << "t,event_type,site_index,infected_count\n";
    hcp::sim::run_trajectory(model, a.n, init, a.t, hcp::derive_stream_seed(a.seed, 0), &dump);
  }

  auto t0 = std::chrono::steady_clock::now();
  std::vector<json> lines(a.replicas);
  std::int64_t survived = 0;
  for (std::int64_t r = 0; r < a.replicas; ++r) {
    auto res = hcp::sim::run_trajectory(model, a.n, init, a.t, hcp::derive_stream_seed(a.seed, r));
    json j = res.to_json();
    j["replica"] = r;
    j.erase("seed");
    lines[r] = std::move(j);
    survived += res.survived_to_t ? 1 : 0;
  }
  for (auto& l : lines) out.line(l);

  double p_hat = a.replicas > 0 ? static_cast<double>(survived) / a.replicas : 0.0;
  json summary{{"schema", "hcp/1"},
               {"command", "simulate"},
               {"N", a.N},
               {"n", a.n},
               {"delta", a.delta},
               {"alpha", model.alpha.to_json()},
               {"t", a.t},
               {"replicas", a.replicas},
               {"seed", a.seed},
               {"p_hat", p_hat},
               {"stderr", hcp::stats::binomial_stderr(p_hat, a.replicas)}};
  if (a.N == 2)
    summary["finite_bound"] = hcp::bounds::finite_survival_bound(a.delta, model.alpha, a.n, a.t);
  summary["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.line(summary);
  return 0;
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

struct VerifyArgs {
  std::string check = "all";
  int grid = 20;
  std::uint64_t seed = 1;
  std::vector<double> alpha;
  double delta = 0.0;
  double xi = 0.25;
  double xi_override = -1.0;
  std::string out;
};

int cmd_verify(const VerifyArgs& a) {
  Output out;
  out.open(a.out);
  bool all_pass = true;
  std::string first_failure;
  auto record = [&](const json& j, bool pass, const std::string& name) {
    out.line(j);
    if (!pass) {
      all_pass = false;
      if (first_failure.empty()) first_failure = name;
    }
  };

  hcp::Rng rng(a.seed);
  auto rand_in = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_double(); };

  const bool run_int = a.check == "all" || a.check == "intertwine";
  const bool run_com = a.check == "all" || a.check == "commute";
  const bool run_spec = a.check == "all" || a.check == "spectrum";
  const bool run_two = a.check == "all" || a.check == "two-level";

  if (run_int || run_com) {
    std::vector<std::pair<double, std::vector<double>>> sets;
    if (a.delta > 0.0 && !a.alpha.empty()) {
      sets.emplace_back(a.delta, a.alpha);
    } else {
      for (int g = 0; g < a.grid; ++g) {
        std::vector<double> al;
        for (int k = 0; k < 3; ++k) al.push_back(rand_in(0.01, 10.0));
        sets.emplace_back(rand_in(0.05, 5.0), std::move(al));
      }
    }
    for (auto& [delta, alpha] : sets) {
      if (run_int) {
        for (int n = 1; n <= 3 && n <= static_cast<int>(alpha.size()); ++n) {
          for (auto conv : {hcp::exact::StarConvention::A, hcp::exact::StarConvention::B}) {
            auto rep = hcp::exact::verify_intertwine(n, delta, std::span(alpha).first(n),
                                                     a.xi_override, conv);
            record(rep.to_json(), rep.pass(), "intertwine");
          }
        }
      }
      if (run_com) {
        for (int n = 1; n <= 2 && n <= static_cast<int>(alpha.size()); ++n) {
          auto rep = hcp::exact::verify_commute(n, delta, std::span(alpha).first(n), a.xi_override);
          record(rep.to_json(), rep.pass(), "commute");
        }
      }
    }
  }

  if (run_spec) {
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i)
      for (int j = 0; j < 10; ++j) {
        double delta = 0.1 * i, alpha1 = 0.5 * j;
        auto sp = hcp::exact::one_level_spectrum(delta, alpha1);
        double xi = hcp::bounds::xi_function(alpha1 / delta);
        worst = std::max(worst, std::fabs(sp.lambda_lead - (-2.0 * delta * xi)));
        worst = std::max(worst, std::fabs(sp.eigvec[0]));
      }
    json j{{"schema", "hcp/1"}, {"check", "spectrum"},   {"n", 1},
           {"params", "10x10 grid"}, {"max_residual", worst}, {"threshold", 1e-12},
           {"pass", worst < 1e-12}};
    record(j, worst < 1e-12, "spectrum");
  }

  if (run_two) {
    std::vector<double> xis = a.check == "two-level" && a.xi > 0.0
                                  ? std::vector<double>{a.xi}
                                  : std::vector<double>{0.05, 0.25, 0.5};
    for (double xi : xis) {
      for (auto conv : {hcp::exact::StarConvention::A, hcp::exact::StarConvention::B}) {
        auto rep = hcp::exact::verify_two_level_tables(xi, conv);
        record(rep.to_json(), rep.pass(), "two-level");
      }
    }
  }

  if (!all_pass) {
    std::cerr << "verify: check failed: " << first_failure << "\n";
    return 1;
  }
  return 0;
}

// --------------------------------------------------------------------------
// couple
// --------------------------------------------------------------------------

struct CoupleArgs {
  int n = 2;
  double delta = 1.0;
  std::string alpha = "explicit:2,1";
  double t = 1.0;
  std::int64_t replicas = 100000;
  std::uint64_t seed = 1;
  std::string test = "both";
  std::string out;
  std::string dump;
};

int cmd_couple(const CoupleArgs& a) {
  hcp::RateModel model(2, a.delta, parse_alpha(a.alpha, 2));
  Output out;
  out.open(a.out);
  bool pass = true;

  if (!a.dump.empty()) {
    std::ofstream dump(a.dump);
    if (!dump) throw std::runtime_error("cannot open dump file: " + a.dump);
    dump << "t,pair,kind,site,source\n";
    int pairs = a.test == "cascade" ? a.n : 1;
    hcp::coupling::CoupledTower tower(model, a.n, pairs, hcp::derive_stream_seed(a.seed, 0));
    tower.set_observer([&dump](double t, const hcp::coupling::CoupledTower::Channel& c) {
      static const char* names[] = {"x_recover",          "x_infect",         "pair_recover",
                                    "pair_infect_accept", "pair_infect_tilde", "pair_extra"};
      dump << t << "," << c.pair << "," << names[c.kind] << "," << c.i << "," << c.j << "\n";
    });
    tower.init_from_origin();
    tower.run_until(a.t);
  }

  if (a.test == "conditional" || a.test == "both") {
    auto rep = hcp::coupling::conditional_law_test(model, a.n, a.t, a.replicas, a.seed);
    out.line(rep.to_json());
    pass = pass && rep.pass();
  }
  if (a.test == "marginal" || a.test == "both") {
    auto rep = hcp::coupling::marginal_test(model, std::min(a.n, 2), a.t, a.replicas, a.seed);
    out.line(rep.to_json());
    pass = pass && rep.tv_vs_plain < 0.02 && rep.tv_vs_exact < 0.02;
  }
  if (a.test == "cascade") {
    auto rep = hcp::coupling::cascade_batch(model, a.n, a.t, a.replicas, a.seed);
    out.line(rep.to_json());
    pass = pass && rep.pass();
  }
  return pass ? 0 : 1;
}

// --------------------------------------------------------------------------
// bounds
// --------------------------------------------------------------------------

struct BoundsArgs {
  std::string family;
  int N = 2;
  double delta = 0.1;
  int levels = 400;
  int depth = 24;
  std::string out;
};

int cmd_bounds(const BoundsArgs& a) {
  auto alpha = parse_alpha(a.family, a.N);
  Output out;
  out.open(a.out);

  out.line(hcp::condition_diagnostics(alpha, a.N, a.depth).to_json());

  if (a.N == 2) {
    auto tr = hcp::bounds::renorm_recursion(a.delta, alpha, std::min(a.depth, 24));
    out.line(tr.to_json());
    hcp::bounds::SurvivalOptions opts;
    opts.max_levels = a.levels;
    auto sp = hcp::bounds::survival_product(a.delta, alpha, opts);
    json spj = sp.to_json();
    spj["delta"] = a.delta;
    out.line(spj);
  }

  auto cert = hcp::bounds::certify_extinction(a.delta, alpha, a.N);
  json cj{{"schema", "hcp/1"}, {"check", "extinction_certificate"}, {"delta", a.delta},
          {"N", a.N},          {"found", cert.has_value()}};
  if (cert) cj["certificate"] = cert->to_json();
  out.line(cj);
  return 0;
}

// --------------------------------------------------------------------------
// bracket
// --------------------------------------------------------------------------

struct BracketArgs {
  std::string family;
  int N = 2;
  double nprime = -1.0;
  double grid_min = 1e-6;
  int iters = 40;
  std::string mc;  // "n,t,replicas"
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_bracket(const BracketArgs& a) {
  auto alpha = parse_alpha(a.family, a.N);
  Output out;
  out.open(a.out);

  hcp::bounds::BracketOptions opts;
  opts.iters = a.iters;
  opts.grid_min = a.grid_min;

  hcp::bounds::DeltaBracket bracket;
  if (a.N == 2) {
    bracket = hcp::bounds::bracket_delta_c(alpha, alpha, 2, opts);
  } else {
    const bool pow2 = (a.N & (a.N - 1)) == 0;
    double nprime = pow2 ? static_cast<double>(a.N) : a.nprime;
    if (!pow2 && !(nprime > 1.0))
      throw CLI::ValidationError("bracket", "--Nprime is required when N is not a power of 2");
    auto red = hcp::bounds::compare_reduce(alpha, a.N, nprime);
    bracket = hcp::bounds::bracket_delta_c(alpha, hcp::bounds::ReducedAlpha{red}, a.N, opts);
  }

  if (!a.mc.empty()) {
    int n = 4;
    double t = 10.0;
    long long reps_ll = 2000;
    if (std::sscanf(a.mc.c_str(), "%d,%lf,%lld", &n, &t, &reps_ll) < 1)
      throw CLI::ValidationError("bracket", "--mc expects n,t,replicas");
    std::int64_t reps = reps_ll;
    hcp::sim::SparseConfig init = hcp::sim::SparseConfig::single_origin(a.N, n);
    auto phat = [&](double d) {
      hcp::RateModel m(a.N, d, alpha);
      return hcp::sim::estimate_survival(m, n, init, t, reps, a.seed).p_hat;
    };
    // Non-rigorous point estimate: delta where the finite-(n, t) survival
    // frequency crosses 1/2, by bisection on an expanding bracket.
    double lo = bracket.lower > 0 ? bracket.lower : 1e-3, hi = lo;
    while (phat(hi) > 0.5 && hi < 1e6) hi *= 2.0;
    if (hi < 1e6) {
      for (int it = 0; it < 12; ++it) {
        double mid = 0.5 * (lo + hi);
        (phat(mid) > 0.5 ? lo : hi) = mid;
      }
      bracket.mc_estimate = 0.5 * (lo + hi);
    }
  }

  std::cout << "family,lower,upper,mc_estimate,bisection_iters\n" << bracket.to_csv() << "\n";
  if (out.to_file) out.line(bracket.to_json());
  return 0;
}

// --------------------------------------------------------------------------
// compare
// --------------------------------------------------------------------------

struct CompareArgs {
  int N = 3;
  double nprime = 2.5;
  std::string family = "geometric:0.5";
  int depth = 18;
  std::string out;
};

int cmd_compare(const CompareArgs& a) {
  auto alpha = parse_alpha(a.family, a.N);
  auto red = hcp::bounds::compare_reduce(alpha, a.N, a.nprime);
  std::vector<double> gamma_pp, alpha_pp;
  for (int k = 1; k <= a.depth; ++k) {
    gamma_pp.push_back(std::exp(red.log_gamma_pp(k)));
    alpha_pp.push_back(red.alpha_pp(k));
  }
  json j{{"schema", "hcp/1"}, {"command", "compare"}, {"N", a.N},
         {"Nprime", a.nprime}, {"family", alpha.label()}, {"m", red.m},
         {"n", red.n},         {"gamma_pp", gamma_pp},   {"alpha_pp", alpha_pp}};
  Output out;
  out.open(a.out);
  out.line(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contact processes on the hierarchical group: event-driven simulation, exact "
               "coarse-graining verification, and two-sided critical-recovery-rate bounds"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo survival estimation");
  sim->add_option("--N", sa.N, "hierarchical freedom")->check(CLI::Range(2, 64));
  sim->add_option("--n", sa.n, "lattice level")->required()->check(CLI::Range(0, 24));
  sim->add_option("--delta", sa.delta, "recovery rate")->required();
  sim->add_option("--alpha,--family", sa.alpha, "rate family, e.g. geometric:0.5")->required();
  sim->add_option("--t", sa.t, "time horizon")->required();
  sim->add_option("--replicas", sa.replicas)->required()->check(CLI::Range(std::int64_t{1}, std::int64_t{100000000}));
  sim->add_option("--seed", sa.seed);
  sim->add_option("--init", sa.init)->check(CLI::IsMember({"single", "full"}));
  sim->add_option("--threads", sa.threads);
  sim->add_option("--out", sa.out);
  sim->add_option("--dump", sa.dump, "trajectory CSV for replica 0");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "exact identity verification");
  ver->add_option("--check", va.check)
      ->check(CLI::IsMember({"all", "intertwine", "commute", "spectrum", "two-level"}));
  ver->add_option("--grid", va.grid, "number of random parameter sets")->check(CLI::Range(1, 10000));
  ver->add_option("--seed", va.seed);
  ver->add_option("--delta", va.delta);
  ver->add_option("--alpha", va.alpha, "explicit alpha list");
  ver->add_option("--xi", va.xi, "xi for the two-level tables");
  ver->add_option("--xi-override", va.xi_override, "force a (generally wrong) xi");
  ver->add_option("--out", va.out);

  CoupleArgs ca;
  auto* cou = app.add_subcommand("couple", "coupled-pair and cascade statistics");
  cou->add_option("--n", ca.n)->check(CLI::Range(1, 6));
  cou->add_option("--delta", ca.delta)->required();
  cou->add_option("--alpha,--family", ca.alpha)->required();
  cou->add_option("--t", ca.t);
  cou->add_option("--replicas", ca.replicas)->check(CLI::Range(std::int64_t{1}, std::int64_t{100000000}));
  cou->add_option("--seed", ca.seed);
  cou->add_option("--test", ca.test)
      ->check(CLI::IsMember({"conditional", "marginal", "cascade", "both"}));
  cou->add_option("--out", ca.out);
  cou->add_option("--dump", ca.dump, "event CSV for one trajectory");

  BoundsArgs ba;
  auto* bnd = app.add_subcommand("bounds", "condition diagnostics, recursion, survival product");
  bnd->add_option("--family,--alpha", ba.family)->required();
  bnd->add_option("--N", ba.N)->check(CLI::Range(2, 64));
  bnd->add_option("--delta", ba.delta)->required();
  bnd->add_option("--levels", ba.levels);
  bnd->add_option("--depth", ba.depth);
  bnd->add_option("--out", ba.out);

  BracketArgs bra;
  auto* brk = app.add_subcommand("bracket", "two-sided bracket on the critical recovery rate");
  brk->add_option("--family,--alpha", bra.family)->required();
  brk->add_option("--N", bra.N)->check(CLI::Range(2, 64));
  brk->add_option("--Nprime", bra.nprime);
  brk->add_option("--grid-min", bra.grid_min);
  brk->add_option("--iters", bra.iters);
  brk->add_option("--mc", bra.mc, "n,t,replicas for a non-rigorous MC point estimate");
  brk->add_option("--seed", bra.seed);
  brk->add_option("--out", bra.out);

  CompareArgs cpa;
  auto* cmp = app.add_subcommand("compare", "reduction of freedom N to freedom 2");
  cmp->add_option("--N", cpa.N)->required()->check(CLI::Range(2, 64));
  cmp->add_option("--Nprime", cpa.nprime)->required();
  cmp->add_option("--family,--alpha", cpa.family);
  cmp->add_option("--depth", cpa.depth);
  cmp->add_option("--out", cpa.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(sa);
    if (*ver) return cmd_verify(va);
    if (*cou) return cmd_couple(ca);
    if (*bnd) return cmd_bounds(ba);
    if (*brk) return cmd_bracket(bra);
    if (*cmp) return cmd_compare(cpa);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
