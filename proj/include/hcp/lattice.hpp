#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hcp/alpha.hpp"
#include "hcp/rng.hpp"

namespace hcp {

// A site of the hierarchical group with freedom N: a finite digit sequence,
// little-endian (digits_[k] is level k), canonical form strips trailing
// zeros so structural equality is group equality and the norm is the digit
// count.
class Address {
 public:
  explicit Address(int base, std::vector<int> digits = {}) : base_(base), digits_(std::move(digits)) {
    if (base_ < 2) throw std::invalid_argument("Address: base must be >= 2");
    for (int d : digits_)
      if (d < 0 || d >= base_) throw std::invalid_argument("Address: digit out of range");
    canonicalize();
  }

  static Address origin(int base) { return Address(base); }

  int base() const { return base_; }
  const std::vector<int>& digits() const { return digits_; }
  int digit(int level) const {
    return level < static_cast<int>(digits_.size()) ? digits_[level] : 0;
  }

  // Smallest k such that every digit at level >= k vanishes.
  int norm() const { return static_cast<int>(digits_.size()); }
  bool is_origin() const { return digits_.empty(); }

  friend bool operator==(const Address& a, const Address& b) {
    return a.base_ == b.base_ && a.digits_ == b.digits_;
  }

 private:
  void canonicalize() {
    while (!digits_.empty() && digits_.back() == 0) digits_.pop_back();
  }
  int base_;
  std::vector<int> digits_;
};

inline void require_same_base(const Address& i, const Address& j) {
  if (i.base() != j.base()) throw std::invalid_argument("addresses have different bases");
}

// Componentwise addition modulo N.
inline Address add_mod(const Address& i, const Address& j) {
  require_same_base(i, j);
  int n = std::max(i.norm(), j.norm());
  std::vector<int> digits(n);
  for (int k = 0; k < n; ++k) digits[k] = (i.digit(k) + j.digit(k)) % i.base();
  return Address(i.base(), std::move(digits));
}

inline Address negate_mod(const Address& i) {
  std::vector<int> digits(i.norm());
  for (int k = 0; k < i.norm(); ++k) digits[k] = (i.base() - i.digit(k)) % i.base();
  return Address(i.base(), std::move(digits));
}

// Hierarchical distance |i - j|: the norm of the componentwise difference,
// i.e. one past the highest level at which the two addresses differ.
inline int hdist(const Address& i, const Address& j) {
  require_same_base(i, j);
  int n = std::max(i.norm(), j.norm());
  for (int k = n - 1; k >= 0; --k)
    if (i.digit(k) != j.digit(k)) return k + 1;
  return 0;
}

// Flat-index form of Omega^n: the bijection i -> sum_k i_k N^k onto
// [0, N^n). Blocks B_m(j) are the contiguous stripes of length N^m.
inline std::int64_t site_index(const Address& i, int n) {
  if (i.norm() > n) throw std::invalid_argument("site_index: address outside Omega^n");
  std::int64_t idx = 0, p = 1;
  for (int k = 0; k < n; ++k) {
    idx += static_cast<std::int64_t>(i.digit(k)) * p;
    p *= i.base();
  }
  return idx;
}

inline Address address_of_index(std::int64_t idx, int n, int N) {
  if (idx < 0) throw std::invalid_argument("address_of_index: negative index");
  std::vector<int> digits(n);
  for (int k = 0; k < n; ++k) {
    digits[k] = static_cast<int>(idx % N);
    idx /= N;
  }
  if (idx != 0) throw std::invalid_argument("address_of_index: index outside Omega^n");
  return Address(N, std::move(digits));
}

// The m-block with index j in Omega^n: all sites i∘j with i in Omega^m.
inline std::vector<Address> block_members(int m, const Address& j, int n) {
  if (m < 0 || m > n) throw std::invalid_argument("block_members: need 0 <= m <= n");
  if (j.norm() > n - m) throw std::invalid_argument("block_members: index outside Omega^{n-m}");
  std::int64_t count = 1;
  for (int k = 0; k < m; ++k) count *= j.base();
  std::vector<Address> out;
  out.reserve(count);
  for (std::int64_t prefix = 0; prefix < count; ++prefix) {
    Address p = address_of_index(prefix, m, j.base());
    std::vector<int> digits(m + j.norm());
    for (int k = 0; k < m; ++k) digits[k] = p.digit(k);
    for (int k = 0; k < j.norm(); ++k) digits[m + k] = j.digit(k);
    out.emplace_back(j.base(), std::move(digits));
  }
  return out;
}

// Configurations on Omega^n as byte vectors indexed by site_index.
using Config = std::vector<std::uint8_t>;

// x_i: the restriction of x to the m-block with index i, as a configuration
// on Omega^m. Blocks are contiguous in flat-index order.
inline Config restrict_config(const Config& x, const Address& i, int m, int n, int N) {
  if (m < 0 || m > n) throw std::invalid_argument("restrict_config: need 0 <= m <= n");
  std::int64_t block = 1;
  for (int k = 0; k < m; ++k) block *= N;
  std::int64_t start = site_index(i, n - m) * block;
  if (start + block > static_cast<std::int64_t>(x.size()))
    throw std::invalid_argument("restrict_config: configuration too small");
  return Config(x.begin() + start, x.begin() + start + block);
}

// ---------------------------------------------------------------------------
// Rate model
// ---------------------------------------------------------------------------

// N, recovery rate delta, and the alpha family. Infection rates depend on
// sites only through hierarchical distance: a(i,j) = alpha_k N^-k at
// distance k, so the per-site outgoing total is (1 - 1/N) sum_k alpha_k.
struct RateModel {
  int N = 2;
  double delta = 1.0;
  AlphaSeq alpha = AlphaSeq::geometric(0.5);

  RateModel(int N_, double delta_, AlphaSeq alpha_)
      : N(N_), delta(delta_), alpha(std::move(alpha_)) {
    if (N < 2) throw std::invalid_argument("RateModel: N must be >= 2");
    if (!(delta > 0.0)) throw std::invalid_argument("RateModel: delta must be > 0");
    if (!alpha.summable()) throw std::invalid_argument("RateModel: alpha not summable");
  }

  double infection_rate_at(int distance) const {
    if (distance < 1) throw std::invalid_argument("infection_rate: distance must be >= 1");
    return alpha.alpha(distance) *
           std::exp(-static_cast<double>(distance) * std::log(static_cast<double>(N)));
  }
};

inline double infection_rate(const RateModel& model, const Address& i, const Address& j) {
  require_same_base(i, j);
  if (i == j) throw std::invalid_argument("infection_rate: i and j must differ");
  return model.infection_rate_at(hdist(i, j));
}

// ---------------------------------------------------------------------------
// Flat-index lattice helpers used by the event-driven simulator.
// ---------------------------------------------------------------------------

struct FlatLattice {
  int N;
  int n;
  std::int64_t size;
  std::vector<std::int64_t> pow;  // pow[k] = N^k

  FlatLattice(int N_, int n_) : N(N_), n(n_) {
    if (N < 2 || n < 0) throw std::invalid_argument("FlatLattice: bad dimensions");
    if (n * std::log2(static_cast<double>(N)) > 26.0)
      throw std::invalid_argument("FlatLattice: lattice too large");
    pow.assign(n + 1, 1);
    for (int k = 1; k <= n; ++k) pow[k] = pow[k - 1] * N;
    size = pow[n];
  }

  int digit(std::int64_t idx, int level) const {
    return static_cast<int>((idx / pow[level]) % N);
  }

  int hdist_index(std::int64_t i, std::int64_t j) const {
    for (int k = n - 1; k >= 0; --k)
      if (digit(i, k) != digit(j, k)) return k + 1;
    return 0;
  }

  // Uniform site at hierarchical distance exactly k from src: digits below
  // k-1 uniform, digit k-1 a uniform nonzero shift, added mod N. There are
  // N^(k-1) (N-1) such sites.
  std::int64_t sample_at_distance(std::int64_t src, int k, Rng& rng) const {
    if (k < 1 || k > n) throw std::invalid_argument("sample_at_distance: bad distance");
    std::int64_t out = src;
    for (int level = 0; level < k; ++level) {
      int shift = (level == k - 1) ? 1 + static_cast<int>(rng.below(N - 1))
                                   : static_cast<int>(rng.below(N));
      int sd = digit(src, level);
      int nd = (sd + shift) % N;
      out += static_cast<std::int64_t>(nd - sd) * pow[level];
    }
    return out;
  }
};

}  // namespace hcp
