#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <vector>

#include "lzguess/error.hpp"

namespace lzguess {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stable seed for substream k of a master seed:
//   splitmix64(splitmix64(master) ^ splitmix64(k + 0x632BE59BD9B4E019))
// Monte Carlo round k always uses substream k, so results do not depend on
// how rounds are distributed over workers.
constexpr std::uint64_t derive_substream_seed(std::uint64_t master, std::uint64_t k) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
}

// Anything that hands out fair bits, most significant bit of a word first.
template <typename T>
concept BitReader = requires(T& r, unsigned width) {
  { r.read(width) } -> std::convertible_to<std::uint64_t>;
};

// Unlimited deterministic supply of fair bits for one (seed, substream) pair.
// Single owner; not thread-safe.
class BitSource {
 public:
  BitSource(std::uint64_t seed, std::uint64_t substream)
      : seed_(seed), substream_(substream), engine_(derive_substream_seed(seed, substream)) {}

  // Reads `width` bits (<= 64); the first bit read is the most significant.
  std::uint64_t read(unsigned width) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v = (v << 1) | next_bit();
    return v;
  }

  unsigned next_bit() {
    if (avail_ == 0) {
      buffer_ = engine_();
      avail_ = 64;
    }
    --avail_;
    ++consumed_;
    return static_cast<unsigned>((buffer_ >> avail_) & 1U);
  }

  // Uniform double in [0,1) from 53 fresh bits.
  double uniform01() { return static_cast<double>(read(53)) * 0x1.0p-53; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t substream() const noexcept { return substream_; }
  std::uint64_t consumed() const noexcept { return consumed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
  std::uint64_t buffer_ = 0;
  unsigned avail_ = 0;
  std::uint64_t consumed_ = 0;
};

// Replays a fixed bit vector; past the end it yields zeros or throws.
class FixedBits {
 public:
  explicit FixedBits(std::vector<unsigned> bits, bool pad_zeros = true)
      : bits_(std::move(bits)), pad_(pad_zeros) {}

  std::uint64_t read(unsigned width) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) {
      unsigned b = 0;
      if (pos_ < bits_.size()) {
        b = bits_[pos_] & 1U;
      } else if (!pad_) {
        throw DecodeError("bit supply exhausted", pos_);
      }
      ++pos_;
      v = (v << 1) | b;
    }
    return v;
  }

  std::size_t consumed() const noexcept { return pos_; }

 private:
  std::vector<unsigned> bits_;
  bool pad_;
  std::size_t pos_ = 0;
};

}  // namespace lzguess
