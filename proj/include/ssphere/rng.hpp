#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ssphere {

/// One step of splitmix64; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** (Blackman and Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0);
  explicit Xoshiro256(const std::array<std::uint64_t, 4>& state) : s_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), bound > 0 (Lemire's nearly divisionless method).
  std::uint64_t below(std::uint64_t bound);

  /// Advances the state by 2^128 draws.
  void jump();

  const std::array<std::uint64_t, 4>& state() const { return s_; }

  friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_;
};

using Rng = Xoshiro256;

/// Stream for worker `worker_index` under `master_seed`: the master seed is
/// expanded to a 256-bit state by splitmix64, then jumped worker_index times,
/// so streams are non-overlapping blocks of length 2^128 of one sequence.
/// This derivation is part of the file-format reproducibility contract.
Rng seed_stream(std::uint64_t master_seed, std::uint64_t worker_index);

}  // namespace ssphere
