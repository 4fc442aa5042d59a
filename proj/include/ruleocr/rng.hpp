#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ruleocr {

// Engine identifier recorded in dataset manifests. The raw engine output is
// pinned by the C++ standard; the derived draws below (uniform ints, [0,1)
// reals, normals) are implemented here rather than with std::*_distribution,
// whose output is implementation-defined.
inline constexpr const char* kPrngId = "mt19937_64/v1";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a master seed and a tag path,
// e.g. derive_seed(seed, {epoch, example_index}).
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ t);
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). Multiply-shift with rejection (Lemire).
  std::uint32_t below(std::uint32_t n) {
    std::uint64_t x = next_u64() & 0xffffffffULL;
    std::uint64_t m = x * n;
    auto l = static_cast<std::uint32_t>(m);
    if (l < n) {
      std::uint32_t t = (~n + 1u) % n;
      while (l < t) {
        x = next_u64() & 0xffffffffULL;
        m = x * n;
        l = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  // Uniform in [0, 1) with 53 random bits.
  double real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = real01();
    double u2 = real01();
    while (u1 <= 0.0) u1 = real01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ruleocr
