#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace yinyang {

using Rng = std::mt19937_64;

// Counter-based seed derivation (splitmix64 finalizer). A component asks for
// derive_seed(global, stream_id, counter) so that adding a new stream never
// perturbs the values drawn by existing ones.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t counter = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ counter);
}

// Inclusive bounds.
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng) < p; }

template <typename T>
void shuffle_in_place(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i - 1)));
    std::swap(items[i - 1], items[j]);
  }
}

template <typename T>
const T& pick(std::span<const T> items, Rng& rng) {
  return items[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(items.size()) - 1))];
}

}  // namespace yinyang
