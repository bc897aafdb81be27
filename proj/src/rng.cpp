#include "bljust/rng.hpp"

#include <cmath>
#include <numbers>

namespace bljust {

double Rng::gaussian() {
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, then two SplitMix rounds over the combination.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  Rng mix(seed ^ h);
  mix.next_u64();
  return mix.next_u64();
}

}  // namespace bljust
