#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cprune {

// SplitMix64 (Steele, Lea, Flood 2014). All seeded generation in the toolkit
// goes through this generator so games are reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// SplitMix64 output function applied to a single value.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a, used to turn purpose tags and language names into stream keys.
std::uint64_t fnv1a(std::string_view text);

// Independent stream keyed by (seed, purpose tag, index).
SplitMix64 derive_stream(std::uint64_t seed, std::string_view tag,
                         std::uint64_t index = 0);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace cprune
