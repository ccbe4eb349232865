#include "sml/rng.hpp"

#include <cmath>
#include <numbers>

#include "sml/errors.hpp"

namespace sml {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) {
    x += kGolden;
    word = splitmix64_mix(x);
  }
}

Rng Rng::from_state(const RngState& state) {
  Rng r(state.seed);
  r.s_ = state.words;
  return r;
}

std::uint64_t Rng::next_u64() noexcept {
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

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

__extension__ using u128 = unsigned __int128;

std::uint64_t Rng::uniform_below(std::uint64_t bound) noexcept {
  u128 m = static_cast<u128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::gaussian() noexcept {
  const double u1 = uniform();
  const double u2 = uniform();
  // 1 - u1 lies in (0, 1], so the log is finite.
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t key) const noexcept {
  return Rng(splitmix64_mix(seed_ ^ splitmix64_mix(key + kGolden)));
}

Rng Rng::split(std::string_view key) const noexcept { return split(fnv1a64(key)); }

Matrix sample_gaussian(Rng& rng, std::size_t n, double mean, double std) {
  require(std >= 0.0, "sample_gaussian: std must be >= 0");
  Matrix m(n, 1);
  for (double& v : m.data()) v = mean + std * rng.gaussian();
  return m;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std) {
  require(std >= 0.0, "gaussian_matrix: std must be >= 0");
  Matrix m(rows, cols);
  for (double& v : m.data()) v = std * rng.gaussian();
  return m;
}

Matrix he_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  require(fan_in >= 1, "he_init: fan_in must be >= 1");
  return gaussian_matrix(rng, fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace sml
