#pragma once

// Counter-based random streams.
//
// Every random quantity in the toolkit is a pure function of a 64-bit key and
// a counter. Keys are derived hierarchically from the user seed with
// derive_key(), so the value drawn for e.g. (seed, horizontal line, k = -3)
// does not depend on evaluation order or on which thread asked for it.

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace linewalk {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 output finalizer (a bijection on 64-bit words).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag) noexcept {
  return mix64(key ^ mix64(tag + kGolden));
}

template <class... Tags>
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag, Tags... rest) noexcept {
  return derive_key(derive_key(key, tag), static_cast<std::uint64_t>(rest)...);
}

/// Maps a signed lattice coordinate onto an unsigned counter (0,-1,1,-2,2,... -> 0,1,2,3,4,...).
constexpr std::uint64_t zigzag(std::int64_t k) noexcept {
  return (static_cast<std::uint64_t>(k) << 1) ^ static_cast<std::uint64_t>(k >> 63);
}

/// 53 random bits mapped into the open interval (0,1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Draw number `counter` of the family keyed by `key`; stateless.
constexpr std::uint64_t bits_at(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key + (counter + 1) * kGolden);
}

constexpr double uniform_at(std::uint64_t key, std::uint64_t counter) noexcept {
  return to_open_unit(bits_at(key, counter));
}

/// Fixed domain tags so that independent objects never share a key.
enum class Domain : std::uint64_t {
  horizontal_line = 1,
  vertical_line = 2,
  subordinator = 3,
  walk = 4,
  brownian = 5,
  ks_srw = 6,
  ensemble = 7,
  oracle = 8,
};

constexpr std::uint64_t tag(Domain d) noexcept { return static_cast<std::uint64_t>(d); }

/// Sequential view of one counter-based family: SplitMix64 started at `key`.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept { return bits_at(key_, counter_++); }
  double uniform() noexcept { return to_open_unit(next_u64()); }
  double exponential() noexcept { return -std::log(uniform()); }

  /// Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Bit pattern of a double, for keying on real-valued parameters such as a scale T.
constexpr std::uint64_t double_bits(double x) noexcept { return std::bit_cast<std::uint64_t>(x); }

}  // namespace linewalk
