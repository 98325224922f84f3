#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace nli {

// Deterministic RNG used everywhere randomness is needed. Wraps mt19937_64
// (whose output sequence is pinned by the standard) and derives all values
// from the raw engine output, so results are reproducible across standard
// library implementations -- std::uniform_*_distribution is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  // Uniform index in [0, n). n must be > 0.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(u64() % n); }

  // Uniform double in [0, 1).
  double real() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double real(double lo, double hi) { return lo + (hi - lo) * real(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // k distinct indices from [0, n), in ascending order. k must be <= n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(all[i], all[i + index(n - i)]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  }

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a. Stable across platforms; used to split the global seed into
// per-purpose sub-seeds.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Sub-seed derivation scheme: hash the scope and purpose strings into the
// global seed. Documented in the README; every command uses this.
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view scope,
                                 std::string_view purpose) {
  std::uint64_t h = fnv1a64(scope);
  h = fnv1a64("/", h);
  h = fnv1a64(purpose, h);
  return h ^ (global * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
}

}  // namespace nli
