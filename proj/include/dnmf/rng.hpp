#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dnmf {

// All randomness in the toolkit flows through labeled streams derived from a
// single run seed, so one --seed flag reproduces every stage byte for byte.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a label into a base seed. Distinct labels give independent streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = base ^ 0x51'7c'c1'b7'27'22'0a'95ULL;
  for (unsigned char c : label) {
    h ^= c;
    splitmix64(h);
    h = splitmix64(h);
  }
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index) {
  std::uint64_t h = derive_seed(base, label) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t i, std::uint64_t j) {
  return derive_seed(derive_seed(base, label, i), label, j);
}

/// mt19937_64 with hand-rolled distributions; std:: distributions are
/// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double low, double high) {
    return low + uniform() * (high - low);
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  /// k distinct values from [0, n), in draw order. Partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dnmf
