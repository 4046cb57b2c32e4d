#include "mrbench/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mrb {

double SplitMix64::normal()
{
  double u1 = uniform();
  double const u2 = uniform();
  if (u1 <= 0.0) {
    u1 = 0x1.0p-53;
  }
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label)
{
  SplitMix64 mix(base ^ fnv1a64(label));
  return mix.next();
}

} // namespace mrb
