#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace mrb {

// SplitMix64 (Steele, Lea & Flood). Every seeded choice in the benchmark
// (masks, splits, study plans, phantoms) draws from this stream so results
// are portable across implementations; see docs/rng.md.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next()
  {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound) by rejection: draws x until
  // x >= 2^64 mod bound, then returns x mod bound.
  std::uint64_t below(std::uint64_t bound)
  {
    std::uint64_t const limit = (0 - bound) % bound; // 2^64 mod bound
    for (;;) {
      std::uint64_t x = next();
      if (x >= limit) {
        return x % bound;
      }
    }
  }

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal();

private:
  std::uint64_t state_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

// Forward Fisher-Yates: for i = 0..n-2 swap v[i] with v[i + below(n - i)].
template <typename T> void seeded_shuffle(std::vector<T> &v, SplitMix64 &rng)
{
  if (v.size() < 2) {
    return;
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(v.size() - i));
    std::swap(v[i], v[j]);
  }
}

} // namespace mrb
