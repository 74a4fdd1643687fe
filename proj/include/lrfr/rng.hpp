#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lrfr {

// Deterministic random helpers. std::uniform_* distributions and
// std::shuffle are implementation-defined, so everything that must be
// reproducible bit-for-bit across toolchains goes through these instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t bits = (static_cast<std::uint64_t>(engine_()) << 32) | engine_();
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling over the top range to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t bits;
    do {
      bits = (static_cast<std::uint64_t>(engine_()) << 32) | engine_();
    } while (bits >= limit);
    return bits % n;
  }

  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937 engine_;
};

}  // namespace lrfr
