#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace ecg {

// SplitMix64. Small, fast, and identical on every platform, which is what
// makes seeded runs bit-reproducible (std distributions are not portable).
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with a 24-bit mantissa.
  float next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

  // Uniform integer in [0, n). Fixed-point multiply keeps it branch-free.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  uint64_t state_;
};

// Derives an independent stream for a tagged purpose (per-layer init,
// per-epoch shuffle, ...) from one user-facing seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  SplitMix64 g(seed ^ (tag * 0xD1B54A32D192ED03ull));
  return g.next_u64();
}

template <class T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.next_below(i)]);
  }
}

}  // namespace ecg
