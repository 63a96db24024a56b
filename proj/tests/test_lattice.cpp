#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "hcp/lattice.hpp"
#include "hcp/rng.hpp"

using namespace hcp;

namespace {

std::vector<Address> all_of_omega(int n, int N) {
  std::vector<Address> out;
  std::int64_t size = 1;
  for (int k = 0; k < n; ++k) size *= N;
  for (std::int64_t i = 0; i < size; ++i) out.push_back(address_of_index(i, n, N));
  return out;
}

Address rand_address(int N, int depth, Rng& rng) {
  std::vector<int> digits(depth);
  for (int& d : digits) d = static_cast<int>(rng.below(N));
  return Address(N, std::move(digits));
}

}  // namespace

TEST_CASE("hierarchical distance basics") {
  Address o = Address::origin(2);
  CHECK(hdist(o, o) == 0);
  CHECK(hdist(Address(2, {1}), Address(2, {0})) == 1);
  CHECK(hdist(Address(2, {0, 0, 1}), Address(2, {0, 0, 0})) == 3);
  CHECK_THROWS_AS(hdist(Address(2, {1}), Address(3, {1})), std::invalid_argument);
}

TEST_CASE("hierarchical distance is an ultrametric") {
  Rng rng(2024);
  for (int N : {2, 3, 5}) {
    for (int trial = 0; trial < 10000; ++trial) {
      Address i = rand_address(N, 5, rng), j = rand_address(N, 5, rng),
              k = rand_address(N, 5, rng);
      CHECK(hdist(i, j) == hdist(j, i));
      CHECK(hdist(i, j) <= std::max(hdist(i, k), hdist(k, j)));
    }
  }
}

TEST_CASE("componentwise addition mod N") {
  Address o = Address::origin(2);
  Address i(2, {1, 0, 1});
  CHECK(add_mod(i, o) == i);
  CHECK(add_mod(Address(2, {1}), Address(2, {1})) == o);
  // (2,1) + (2,2) over base 3: digitwise (1, 0), canonical (1).
  CHECK(add_mod(Address(3, {2, 1}), Address(3, {2, 2})) == Address(3, {1}));
}

TEST_CASE("group laws hold exhaustively on small lattices") {
  for (int N : {2, 3}) {
    auto elems = all_of_omega(2, N);
    Address o = Address::origin(N);
    for (const auto& a : elems) {
      CHECK(add_mod(a, o) == a);
      CHECK(add_mod(a, negate_mod(a)) == o);
      for (const auto& b : elems) {
        CHECK(add_mod(a, b) == add_mod(b, a));
        for (const auto& c : elems)
          CHECK(add_mod(add_mod(a, b), c) == add_mod(a, add_mod(b, c)));
      }
    }
  }
}

TEST_CASE("blocks tile the lattice") {
  CHECK(block_members(0, Address(2, {1, 0}), 2) == std::vector<Address>{Address(2, {1, 0})});

  auto b = block_members(1, Address(2, {0}), 2);
  REQUIRE(b.size() == 2);
  CHECK(b[0] == Address::origin(2));
  CHECK(b[1] == Address(2, {1}));

  for (int N : {2, 3}) {
    for (int n = 0; n <= 3; ++n) {
      for (int m = 0; m <= n; ++m) {
        std::set<std::int64_t> seen;
        for (const auto& j : all_of_omega(n - m, N)) {
          auto members = block_members(m, j, n);
          CHECK(members.size() == static_cast<std::size_t>(std::pow(N, m)));
          for (const auto& site : members) CHECK(seen.insert(site_index(site, n)).second);
        }
        CHECK(seen.size() == static_cast<std::size_t>(std::pow(N, n)));
      }
    }
  }
  CHECK_THROWS_AS(block_members(3, Address::origin(2), 2), std::invalid_argument);
}

TEST_CASE("site index bijection") {
  CHECK(site_index(Address::origin(2), 3) == 0);
  CHECK(site_index(Address(2, {1, 1}), 2) == 3);
  CHECK(site_index(Address(3, {2, 0, 1}), 3) == 11);
  for (int N : {2, 3}) {
    for (std::int64_t idx = 0; idx < N * N * N; ++idx)
      CHECK(site_index(address_of_index(idx, 3, N), 3) == idx);
  }
  CHECK_THROWS_AS(address_of_index(9, 2, 3), std::exception);
  CHECK_NOTHROW(address_of_index(8, 2, 3));
  CHECK_THROWS_AS(Address(2, {2}), std::invalid_argument);
}

TEST_CASE("block restriction") {
  // Configuration on Omega^2 (N = 2) infected exactly at (1,0), index 1.
  Config x(4, 0);
  x[1] = 1;
  auto full = restrict_config(x, Address::origin(2), 2, 2, 2);
  CHECK(full == x);
  auto blk = restrict_config(x, Address(2, {0}), 1, 2, 2);
  CHECK(blk == Config{0, 1});
  Config ones(8, 1);
  CHECK(restrict_config(ones, Address(2, {1}), 2, 3, 2) == Config(4, 1));
}

TEST_CASE("pair infection rates") {
  RateModel model(2, 1.0, AlphaSeq::explicit_list({2.0, 1.0}));
  CHECK(infection_rate(model, Address::origin(2), Address(2, {0, 1})) == Catch::Approx(0.25));
  RateModel ed(2, 1.0, AlphaSeq::effective_dim(2.0, 2));
  CHECK(infection_rate(ed, Address::origin(2), Address(2, {0, 0, 1})) ==
        Catch::Approx(1.0 / 64.0).epsilon(1e-14));
  CHECK_THROWS_AS(infection_rate(model, Address(2, {1}), Address(2, {1})),
                  std::invalid_argument);
}

TEST_CASE("per-site outgoing rate matches the closed form") {
  // Brute-force sum over all of Omega^n with the family truncated at n,
  // compared against (1 - 1/N) sum_k alpha_k for every source site.
  for (int N : {2, 3}) {
    for (int n : {2, 3}) {
      RateModel model(N, 0.7, AlphaSeq::geometric(0.35));
      double closed = 0.0;
      for (int k = 1; k <= n; ++k) closed += model.alpha.alpha(k);
      closed *= 1.0 - 1.0 / N;
      for (const auto& i : all_of_omega(n, N)) {
        double total = 0.0;
        for (const auto& j : all_of_omega(n, N))
          if (!(i == j)) total += infection_rate(model, i, j);
        CHECK(std::fabs(total - closed) < 1e-12);
      }
    }
  }
}

TEST_CASE("beta tails") {
  auto ex = AlphaSeq::explicit_list({1.0, 0.5});
  CHECK(ex.beta_tail(3) == 0.0);
  CHECK(ex.beta_tail(1) == Catch::Approx(1.5));
  CHECK(ex.log_beta_tail(3) == kNegInf);

  auto ed = AlphaSeq::effective_dim(2.0, 2);  // alpha_k = 2^-k
  for (int k = 1; k <= 20; ++k)
    CHECK(ed.beta_tail(k) == Catch::Approx(std::ldexp(1.0, 1 - k)).epsilon(1e-14));

  // Direct 60-term partial sum as the oracle for the double-exponential tail.
  auto de = AlphaSeq::double_exp(2.0);
  double direct = 0.0;
  for (int n = 3; n < 63; ++n) direct += std::exp(-std::pow(2.0, n));
  CHECK(std::fabs(de.beta_tail(3) - direct) / direct < 1e-12);
  CHECK(de.log_beta_tail(3) == Catch::Approx(std::log(direct)).epsilon(1e-12));

  CHECK_THROWS_AS(AlphaSeq::geometric(1.5).beta_tail(1), std::domain_error);
}

TEST_CASE("alpha JSON round trip") {
  std::vector<AlphaSeq> fams = {AlphaSeq::explicit_list({2.0, 1.0, 0.25}),
                                AlphaSeq::geometric(0.5), AlphaSeq::double_exp(1.5),
                                AlphaSeq::effective_dim(2.0, 3)};
  for (const auto& a : fams) {
    auto b = AlphaSeq::from_json(a.to_json());
    for (int k = 1; k <= 8; ++k) CHECK(b.alpha(k) == a.alpha(k));
  }
  auto parsed = AlphaSeq::parse("explicit:2,1,0.25");
  CHECK(parsed.alpha(3) == 0.25);
  CHECK(AlphaSeq::parse("geometric:0.5").alpha(2) == Catch::Approx(0.25));
  CHECK_THROWS_AS(AlphaSeq::parse("nope:1"), std::invalid_argument);
}

TEST_CASE("condition diagnostics classify the canonical regimes") {
  auto fast = condition_diagnostics(AlphaSeq::double_exp(3.0), 2, 16);
  CHECK(fast.verdict == ConditionVerdict::extinction_indicated);
  CHECK(fast.heuristic);

  auto slow = condition_diagnostics(AlphaSeq::double_exp(1.5), 2, 16);
  CHECK(slow.verdict == ConditionVerdict::survival_indicated);

  auto finite = condition_diagnostics(AlphaSeq::explicit_list({1.0}), 2, 8);
  CHECK(finite.verdict == ConditionVerdict::extinction_indicated);
  CHECK(finite.beta_terms[2] == kNegInf);

  // At theta = N the scaled terms sit near a constant: no trend either way.
  auto edge = condition_diagnostics(AlphaSeq::double_exp(2.0), 2, 16);
  CHECK(edge.verdict == ConditionVerdict::inconclusive);

  CHECK_THROWS_AS(condition_diagnostics(AlphaSeq::geometric(0.5), 2, 1), std::invalid_argument);
}
