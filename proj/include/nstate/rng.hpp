#pragma once

#include <array>
#include <cstdint>
#include <iterator>
#include <utility>

namespace nstate {

// Stream ids used across the pipeline; each consumer draws from its own
// stream so that changing one stage does not perturb the others.
namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kDropout = 2;
inline constexpr std::uint64_t kSynth = 3;
inline constexpr std::uint64_t kRansac = 4;
inline constexpr std::uint64_t kFolds = 5;
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x);

// xoshiro256** seeded through splitmix64 from (seed, stream). All derived
// draws (uniform, normal, bounded ints, shuffles) are implemented here so
// output does not depend on the standard library's distribution code.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      using std::swap;
      swap(first[static_cast<std::ptrdiff_t>(i - 1)],
           first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Rng seeded_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(seed, stream);
}

}  // namespace nstate
