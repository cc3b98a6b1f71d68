#pragma once

// Counter-based random numbers.
//
// All randomness in the library comes from Philox4x32-10 (Salmon et al., SC'11,
// the generator shipped in Random123, cuRAND and numpy). A 64-bit seed is the
// 2x32-bit key; the 4x32-bit counter addresses an independent block of output.
// Because every block is a pure function of (key, counter), edge draws and
// per-stream sequences are reproducible regardless of evaluation order.
//
// Conversions are fixed so another implementation can reproduce streams bit for bit:
//   uniform01:     (next_u64() >> 11) * 2^-53
//   uniform_below: Lemire's multiply-shift rejection on next_u64()
//   next_u64:      (word[2*i+1] << 32) | word[2*i] of the current block

#include <array>
#include <cstdint>
#include <limits>

namespace gemb {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// One Philox4x32-10 block.
constexpr Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) noexcept {
  constexpr std::uint64_t kMul0 = 0xD2511F53u;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = kMul0 * ctr[0];
    const std::uint64_t p1 = kMul1 * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

constexpr Philox4x32Key key_from_seed(std::uint64_t seed) noexcept {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Maps a Philox word pair to a double in [0, 1) with 53 random bits.
constexpr double to_unit_interval(std::uint32_t lo, std::uint32_t hi) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential stream: counter = (block_lo, block_hi, stream_lo, stream_hi).
/// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(key_from_seed(seed)), stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 2) refill();
    const std::uint64_t v =
        (static_cast<std::uint64_t>(block_[2 * pos_ + 1]) << 32) | block_[2 * pos_];
    ++pos_;
    return v;
  }

  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t stream_id() const noexcept { return stream_; }

 private:
  void refill() noexcept {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                        key_);
    ++counter_;
    pos_ = 0;
  }

  Philox4x32Key key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Philox4x32Counter block_{};
  int pos_ = 2;
};

/// SplitMix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed as a pure function of the parent seed and an ordered list of coordinates.
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t parent, Parts... parts) noexcept {
  std::uint64_t h = mix64(parent);
  ((h = mix64(h ^ static_cast<std::uint64_t>(parts))), ...);
  return h;
}

// Stream identifiers reserved by the library.
namespace streams {
inline constexpr std::uint32_t kLatent = 0x4C41540Au;
inline constexpr std::uint32_t kEdge = 0x45444745u;
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTrain = 2;
}  // namespace streams

}  // namespace gemb
