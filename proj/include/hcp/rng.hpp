#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace hcp {

// SplitMix64 (Steele, Lea, Flood 2014). Used for seeding and for deriving
// independent per-replica streams from a single user seed.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Replica r of a batch with master seed s gets hash(s, r), so replica sets
// are independent of execution order.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t st = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  std::uint64_t a = splitmix64_next(st);
  std::uint64_t b = splitmix64_next(st);
  return a ^ (b >> 1);
}

// xoshiro256++ (Blackman, Vigna 2019), seeded through SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  double exponential(double rate) { return -std::log1p(-next_double()) / rate; }

  // Uniform integer in [0, n) via 128-bit multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace hcp
