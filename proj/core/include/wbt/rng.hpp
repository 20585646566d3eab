#pragma once

// Counter-based random streams.
//
// Every random quantity in the toolkit is a pure function of a StreamKey and a
// position. Keys form a tree: a child key depends only on its parent key and a
// label, so the randomness attached to a tree node is a function of
// (seed, node path) alone and does not depend on the order in which nodes are
// visited. Two trees grown from the same keys see the same node randomness,
// which is how coupled trees share their draws.

#include <cstdint>
#include <limits>
#include <span>

namespace wbt {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 output function.
constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double bits_to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

class StreamKey {
 public:
  constexpr StreamKey() noexcept = default;
  constexpr explicit StreamKey(std::uint64_t seed) noexcept
      : value_(splitmix_finalize(seed + kGoldenGamma)) {}

  constexpr StreamKey child(std::uint64_t label) const noexcept {
    return from_raw(splitmix_finalize(value_ ^ splitmix_finalize((label + 1) * kGoldenGamma)));
  }

  /// Folds a whole label path; equal to repeated child() calls.
  constexpr StreamKey descend(std::span<const std::uint32_t> path) const noexcept {
    StreamKey k = *this;
    for (auto label : path) k = k.child(label);
    return k;
  }

  constexpr std::uint64_t raw() const noexcept { return value_; }
  static constexpr StreamKey from_raw(std::uint64_t v) noexcept {
    StreamKey k;
    k.value_ = v;
    return k;
  }

  friend constexpr bool operator==(StreamKey, StreamKey) noexcept = default;

 private:
  std::uint64_t value_ = 0;
};

/// Random-access uniforms attached to one key: at(k) is the k-th uniform.
class NodeUniforms {
 public:
  constexpr explicit NodeUniforms(StreamKey key) noexcept : key_(key) {}

  constexpr double at(std::uint64_t position) const noexcept {
    return bits_to_open_unit(splitmix_finalize(key_.raw() + (position + 1) * kGoldenGamma));
  }
  constexpr StreamKey key() const noexcept { return key_; }

 private:
  StreamKey key_;
};

/// Sequential view of a key (SplitMix64). Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit RandomStream(StreamKey key) noexcept : state_(key.raw()) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += kGoldenGamma;
    return splitmix_finalize(state_);
  }

  constexpr double uniform() noexcept { return bits_to_open_unit((*this)()); }

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

}  // namespace wbt
