#pragma once

// Seeded random streams. Every consumer of randomness asks for a named
// stream derived from the run seed, so adding a consumer never shifts the
// draws seen by the others. Conversions to doubles and indices are done
// here rather than through <random> distributions, whose output is
// implementation-defined.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace tailorsum {

using Rng = std::mt19937_64;

Rng make_stream(std::uint64_t seed, std::string_view name);

// Uniform in [0, 1).
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Uniform in [0, n); n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

template <class It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace tailorsum
