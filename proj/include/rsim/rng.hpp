#pragma once

// Counter-based stream derivation plus a small xoshiro256++ generator.
//
// Every stochastic draw in the simulator comes from a generator seeded by
// hashing (key, entity, step, purpose). Work split across threads therefore
// reproduces the serial trajectory exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t s = x;
  return splitmix64(s);
}

/// Hash an ordered tuple of integers into a fresh 64-bit seed.
template <typename... Ts>
constexpr std::uint64_t derive_seed(std::uint64_t key, Ts... parts) noexcept {
  std::uint64_t h = mix64(key ^ 0x6a09e667f3bcc909ULL);
  ((h = mix64(h ^ (static_cast<std::uint64_t>(parts) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)))),
   ...);
  return h;
}

/// Purpose tags mixed into derive_seed so that unrelated streams never alias.
enum class Stream : std::uint64_t {
  Catalog = 1,
  Customers = 2,
  Pricing = 3,
  ProductMarketing = 4,
  StoreMarketing = 5,
  Choice = 6,
  Policy = 7,
  Batch = 8,
  Training = 9,
  Evaluation = 10,
  Tuning = 11,
  Subsample = 12,
  Jitter = 13,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform on (0, 1), safe as a log argument.
  double uniform_open() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Unbiased integer in [0, n) by Lemire's multiply-shift rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller (no cached second variate, so the
  /// generator state alone determines the stream).
  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  double gumbel(double location, double scale) noexcept {
    return location - scale * std::log(-std::log(uniform_open()));
  }

  /// Poisson draw: sequential inverse transform below 30, rounded normal
  /// approximation above.
  std::uint64_t poisson(double lambda) noexcept {
    if (!(lambda > 0.0)) return 0;
    if (lambda < 30.0) {
      const double u = uniform();
      double p = std::exp(-lambda);
      double cdf = p;
      std::uint64_t k = 0;
      while (u >= cdf && k < 1000) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
      }
      return k;
    }
    const double x = std::floor(lambda + std::sqrt(lambda) * normal() + 0.5);
    return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
  }

  const std::array<std::uint64_t, 4>& state() const noexcept { return s_; }

  static Rng from_state(const std::array<std::uint64_t, 4>& s) noexcept {
    Rng r;
    r.s_ = s;
    return r;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace rsim
