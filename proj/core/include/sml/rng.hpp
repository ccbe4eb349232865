#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "sml/matrix.hpp"

namespace sml {

/// Serializable snapshot of an Rng.
struct RngState {
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 4> words{};

  friend bool operator==(const RngState&, const RngState&) = default;
};

/// xoshiro256** generator (Blackman & Vigna), seeded through splitmix64.
///
/// Seeding: the four state words are the first four outputs of splitmix64
/// started at `seed` (increment 0x9e3779b97f4a7c15, finalizer multipliers
/// 0xbf58476d1ce4e5b9 and 0x94d049bb133111eb, shifts 30/27/31).
///
/// Output: next = rotl(s1 * 5, 7) * 9, followed by the reference state
/// transition with shift 17 and rotation 45.
///
/// Sub-streams: `split(key)` returns a generator seeded with
/// splitmix64_mix(seed ^ splitmix64_mix(key + 0x9e3779b97f4a7c15)). It depends
/// only on the original seed and the key, never on how many draws the parent
/// has made, so stream layout is stable under code changes that add draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);
  static Rng from_state(const RngState& state);

  std::uint64_t seed() const noexcept { return seed_; }
  RngState state() const noexcept { return {seed_, s_}; }

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Unbiased integer in [0, bound) (Lemire's multiply-and-reject). bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;
  // Standard normal via Box-Muller, cosine branch; consumes two uniforms.
  double gaussian() noexcept;

  Rng split(std::uint64_t key) const noexcept;
  Rng split(std::string_view key) const noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;
// FNV-1a 64 of a string; used to turn named stream keys into integers.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// n x 1 column of i.i.d. N(mean, std^2) draws. std < 0 is a contract violation.
Matrix sample_gaussian(Rng& rng, std::size_t n, double mean, double std);

/// rows x cols matrix of i.i.d. N(0, std^2) draws, filled row-major.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std);

/// fan_in x fan_out weights with entries ~ N(0, 2 / fan_in).
Matrix he_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace sml
